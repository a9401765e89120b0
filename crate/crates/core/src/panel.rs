//! Panel datasets, CSV ingestion and the growth-rate transform.
//!
//! A [`PanelDataset`] holds level observations indexed by (entity, period),
//! where every slot carries one optional value per declared variable. Missing
//! or unparseable cells stay in the index as `None`. [`to_growth_panel`]
//! turns levels into the (p, q) growth pairs used by every estimator.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::ops::Range;

use serde::Serialize;

use crate::{Error, Result};

/// Default variable names used when deriving productivity and growth rates.
pub const OUTPUT: &str = "output";
pub const PRODUCTIVITY: &str = "productivity";
pub const EMPLOYMENT: &str = "employment";

/// Maps CSV header names onto panel roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub entity: String,
    pub period: String,
    /// Optional grouping column (e.g. the industry); one panel per value.
    pub industry: Option<String>,
    pub variables: Vec<String>,
}

impl Schema {
    pub fn new(entity: &str, period: &str, variables: &[&str]) -> Self {
        Self {
            entity: entity.to_string(),
            period: period.to_string(),
            industry: None,
            variables: variables.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn with_industry(mut self, column: &str) -> Self {
        self.industry = Some(column.to_string());
        self
    }
}

/// A note about one observation that was dropped or altered.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub entity: String,
    pub period: Option<i64>,
    pub message: String,
}

impl Diagnostic {
    fn new(entity: &str, period: Option<i64>, message: impl Into<String>) -> Self {
        Self { entity: entity.to_string(), period, message: message.into() }
    }
}

/// Entity × period observations of named real variables, possibly unbalanced.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    entities: Vec<String>,
    periods: Vec<i64>,
    variables: Vec<String>,
    observations: BTreeMap<(usize, usize), Vec<Option<f64>>>,
}

impl PanelDataset {
    /// Empty dataset. Periods are sorted; duplicates are rejected.
    pub fn new(entities: Vec<String>, mut periods: Vec<i64>, variables: Vec<String>) -> Result<Self> {
        periods.sort_unstable();
        if periods.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("period labels must be unique".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = entities.iter().find(|e| !seen.insert(e.as_str())) {
            return Err(Error::Invalid(format!("entity {dup:?} declared twice")));
        }
        Ok(Self { entities, periods, variables, observations: BTreeMap::new() })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Number of indexed (entity, period) slots, complete or not.
    pub fn slot_count(&self) -> usize {
        self.observations.len()
    }

    /// Slots in which every declared variable is present.
    pub fn complete_count(&self) -> usize {
        self.observations.values().filter(|v| v.iter().all(Option::is_some)).count()
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v == name)
    }

    fn variable_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    fn entity_index(&self, entity: &str) -> Option<usize> {
        self.entities.iter().position(|e| e == entity)
    }

    fn period_index(&self, period: i64) -> Option<usize> {
        self.periods.binary_search(&period).ok()
    }

    /// Adds one slot. `values` follows the order of [`Self::variables`].
    pub fn insert(&mut self, entity: &str, period: i64, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.variables.len() {
            return Err(Error::Invalid(format!(
                "{} values for {} variables",
                values.len(),
                self.variables.len()
            )));
        }
        let e = self
            .entity_index(entity)
            .ok_or_else(|| Error::Invalid(format!("undeclared entity {entity:?}")))?;
        let t = self
            .period_index(period)
            .ok_or_else(|| Error::Invalid(format!("undeclared period {period}")))?;
        let values = values.into_iter().map(|v| v.filter(|x| x.is_finite())).collect();
        if self.observations.insert((e, t), values).is_some() {
            return Err(Error::DuplicateObservation { entity: entity.to_string(), period });
        }
        Ok(())
    }

    /// Whether the (entity, period) slot exists at all.
    pub fn has_slot(&self, entity: &str, period: i64) -> bool {
        match (self.entity_index(entity), self.period_index(period)) {
            (Some(e), Some(t)) => self.observations.contains_key(&(e, t)),
            _ => false,
        }
    }

    pub fn value(&self, entity: &str, period: i64, variable: &str) -> Option<f64> {
        let v = self.variables.iter().position(|x| x == variable)?;
        let key = (self.entity_index(entity)?, self.period_index(period)?);
        self.observations.get(&key).and_then(|vals| vals[v])
    }

    fn slot(&self, e: usize, t: usize, v: usize) -> Option<f64> {
        self.observations.get(&(e, t)).and_then(|vals| vals[v])
    }

    /// Renames the variables positionally; `names` must match in length.
    pub fn with_variable_names(mut self, names: &[&str]) -> Result<Self> {
        if names.len() != self.variables.len() {
            return Err(Error::Invalid(format!(
                "{} names given for {} variables",
                names.len(),
                self.variables.len()
            )));
        }
        self.variables = names.iter().map(|n| n.to_string()).collect();
        Ok(self)
    }

    /// Keeps only periods in `[from, to]`.
    pub fn restrict_periods(&self, from: i64, to: i64) -> Result<Self> {
        let periods: Vec<i64> = self.periods.iter().copied().filter(|p| (from..=to).contains(p)).collect();
        let mut out = Self::new(self.entities.clone(), periods, self.variables.clone())?;
        for (&(e, t), vals) in &self.observations {
            let period = self.periods[t];
            if (from..=to).contains(&period) {
                out.insert(&self.entities[e], period, vals.clone())?;
            }
        }
        Ok(out)
    }
}

/// Reads one panel from a CSV stream. Any industry column in the schema is
/// ignored; use [`load_industry_panels`] to split by it.
pub fn load_panel_csv<R: Read>(reader: R, schema: &Schema) -> Result<PanelDataset> {
    let schema = Schema { industry: None, ..schema.clone() };
    let mut panels = load_industry_panels(reader, &schema)?;
    Ok(panels.pop().map(|(_, p)| p).unwrap_or_else(|| {
        PanelDataset::new(Vec::new(), Vec::new(), schema.variables.clone())
            .expect("empty dataset is valid")
    }))
}

/// Reads a CSV stream and splits it into one panel per value of the
/// schema's industry column, in order of first appearance. Without an
/// industry column the whole file becomes a single panel labelled `all`.
pub fn load_industry_panels<R: Read>(reader: R, schema: &Schema) -> Result<Vec<(String, PanelDataset)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let entity_col = col(&schema.entity)?;
    let period_col = col(&schema.period)?;
    let industry_col = schema.industry.as_deref().map(col).transpose()?;
    let var_cols = schema.variables.iter().map(|v| col(v)).collect::<Result<Vec<_>>>()?;

    struct Raw {
        entity: String,
        period: i64,
        values: Vec<Option<f64>>,
    }
    let mut groups: Vec<(String, Vec<Raw>)> = Vec::new();
    let mut group_index: HashMap<String, usize> = HashMap::new();

    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let entity = field(entity_col).to_string();
        if entity.is_empty() {
            return Err(Error::Invalid(format!("data row {}: empty entity", line + 1)));
        }
        let period: i64 = field(period_col).parse().map_err(|_| {
            Error::Invalid(format!("data row {}: period {:?} is not an integer", line + 1, field(period_col)))
        })?;
        let values = var_cols
            .iter()
            .map(|&c| field(c).parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let industry = industry_col.map_or_else(|| "all".to_string(), |c| field(c).to_string());
        let g = *group_index.entry(industry.clone()).or_insert_with(|| {
            groups.push((industry, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(Raw { entity, period, values });
    }

    groups
        .into_iter()
        .map(|(industry, rows)| {
            let mut entities: Vec<String> = Vec::new();
            for r in &rows {
                if !entities.contains(&r.entity) {
                    entities.push(r.entity.clone());
                }
            }
            let mut periods: Vec<i64> = rows.iter().map(|r| r.period).collect();
            periods.sort_unstable();
            periods.dedup();
            let mut ds = PanelDataset::new(entities, periods, schema.variables.clone())?;
            for r in rows {
                ds.insert(&r.entity, r.period, r.values)?;
            }
            Ok((industry, ds))
        })
        .collect()
}

/// Fills in `productivity = output / employment` where productivity is
/// absent. Existing productivity values are left untouched. Slots with
/// non-positive employment get a diagnostic and a missing productivity.
pub fn derive_productivity(ds: &PanelDataset) -> Result<(PanelDataset, Vec<Diagnostic>)> {
    let mut out = ds.clone();
    if !out.has_variable(PRODUCTIVITY) {
        out.variables.push(PRODUCTIVITY.to_string());
        for vals in out.observations.values_mut() {
            vals.push(None);
        }
    }
    let prod = out.variable_index(PRODUCTIVITY)?;
    let output = out.variable_index(OUTPUT)?;
    let employment = out.variables.iter().position(|v| v == EMPLOYMENT);

    let mut diagnostics = Vec::new();
    let entities = out.entities.clone();
    let periods = out.periods.clone();
    for (&(e, t), vals) in out.observations.iter_mut() {
        if vals[prod].is_some() {
            continue;
        }
        let emp = employment.and_then(|i| vals[i]);
        match (vals[output], emp) {
            (Some(y), Some(l)) if l > 0.0 => vals[prod] = Some(y / l),
            (Some(_), Some(l)) => diagnostics.push(Diagnostic::new(
                &entities[e],
                Some(periods[t]),
                format!("employment {l} is not positive; productivity left missing"),
            )),
            _ => diagnostics.push(Diagnostic::new(
                &entities[e],
                Some(periods[t]),
                "neither productivity nor output and employment available",
            )),
        }
    }
    Ok((out, diagnostics))
}

/// How consecutive levels are turned into a growth rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum GrowthKind {
    /// ln(x_t) − ln(x_{t−1})
    #[default]
    LogDifference,
    /// (x_t − x_{t−1}) / x_{t−1}
    Relative,
}

impl GrowthKind {
    fn rate(self, prev: f64, cur: f64) -> f64 {
        match self {
            Self::LogDifference => cur.ln() - prev.ln(),
            Self::Relative => (cur - prev) / prev,
        }
    }
}

/// One entity-period growth observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub entity: String,
    pub period: i64,
    /// Productivity growth.
    pub p: f64,
    /// Output growth.
    pub q: f64,
}

/// Growth-rate pairs grouped by entity, ordered by entity then period.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GrowthPanel {
    rows: Vec<GrowthRow>,
    entities: Vec<String>,
    groups: Vec<Range<usize>>,
    diagnostics: Vec<Diagnostic>,
}

impl GrowthPanel {
    /// Builds a panel from arbitrary rows. Entity order follows first
    /// appearance; rows are sorted by period within each entity.
    pub fn from_rows(rows: Vec<GrowthRow>) -> Result<Self> {
        let mut entities: Vec<String> = Vec::new();
        let mut order: HashMap<String, usize> = HashMap::new();
        for r in &rows {
            if !r.p.is_finite() || !r.q.is_finite() {
                return Err(Error::Invalid(format!("non-finite growth value for {} {}", r.entity, r.period)));
            }
            if !order.contains_key(&r.entity) {
                order.insert(r.entity.clone(), entities.len());
                entities.push(r.entity.clone());
            }
        }
        let mut rows = rows;
        rows.sort_by_key(|r| (order[&r.entity], r.period));
        if let Some(w) = rows.windows(2).find(|w| w[0].entity == w[1].entity && w[0].period == w[1].period) {
            return Err(Error::DuplicateObservation { entity: w[0].entity.clone(), period: w[0].period });
        }
        let mut groups = Vec::with_capacity(entities.len());
        let mut start = 0;
        for i in 1..=rows.len() {
            if i == rows.len() || rows[i].entity != rows[start].entity {
                groups.push(start..i);
                start = i;
            }
        }
        Ok(Self { rows, entities, groups, diagnostics: Vec::new() })
    }

    pub fn rows(&self) -> &[GrowthRow] {
        &self.rows
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    /// Number of (p, q) pairs; the N.O. count of a static regression.
    pub fn usable_observations(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row ranges of each entity, aligned with [`Self::entities`].
    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    /// Exclusions and per-row problems met while building the panel.
    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn p(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.p).collect()
    }

    pub fn q(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.q).collect()
    }

    /// Applies `f` to every row's (q, p) and returns the new panel.
    pub fn map_values(&self, mut f: impl FnMut(&GrowthRow) -> (f64, f64)) -> Self {
        let mut out = self.clone();
        for r in &mut out.rows {
            let (q, p) = f(r);
            r.q = q;
            r.p = p;
        }
        out
    }
}

/// Builds the (p, q) growth panel from productivity and output levels.
///
/// A row exists for period t only when t − 1 is also present for the same
/// entity with both variables, the two labels are exactly one apart, and all
/// four levels are positive. Entities left with fewer than two rows are
/// dropped and reported in the diagnostics.
pub fn to_growth_panel(ds: &PanelDataset, kind: GrowthKind) -> Result<GrowthPanel> {
    let prod = ds.variable_index(PRODUCTIVITY)?;
    let output = ds.variable_index(OUTPUT)?;
    let mut diagnostics = Vec::new();
    let mut rows = Vec::new();

    for (e, entity) in ds.entities.iter().enumerate() {
        // Validated levels per period index.
        let levels: Vec<Option<(f64, f64)>> = (0..ds.periods.len())
            .map(|t| match (ds.slot(e, t, prod), ds.slot(e, t, output)) {
                (Some(pr), Some(y)) if pr > 0.0 && y > 0.0 => Some((pr, y)),
                (Some(pr), Some(y)) => {
                    diagnostics.push(Diagnostic::new(
                        entity,
                        Some(ds.periods[t]),
                        format!("non-positive level (productivity {pr}, output {y}) excluded"),
                    ));
                    None
                }
                _ => None,
            })
            .collect();

        let mut entity_rows = Vec::new();
        for t in 1..ds.periods.len() {
            if ds.periods[t] - ds.periods[t - 1] != 1 {
                continue;
            }
            if let (Some((p0, y0)), Some((p1, y1))) = (levels[t - 1], levels[t]) {
                entity_rows.push(GrowthRow {
                    entity: entity.clone(),
                    period: ds.periods[t],
                    p: kind.rate(p0, p1),
                    q: kind.rate(y0, y1),
                });
            }
        }
        if entity_rows.len() < 2 {
            diagnostics.push(Diagnostic::new(
                entity,
                None,
                format!("only {} usable growth rows; entity excluded", entity_rows.len()),
            ));
        } else {
            rows.extend(entity_rows);
        }
    }

    let mut gp = GrowthPanel::from_rows(rows)?;
    gp.diagnostics = diagnostics;
    Ok(gp)
}

/// Writes the scatter exchange CSV: `entity,period,q,p`, one line per row.
pub fn emit_scatter_csv<W: Write>(gp: &GrowthPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["entity", "period", "q", "p"])?;
    for r in gp.rows() {
        w.write_record([r.entity.clone(), r.period.to_string(), r.q.to_string(), r.p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
