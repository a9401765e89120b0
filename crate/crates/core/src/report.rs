//! Fixed-layout result tables and their CSV / JSON-lines mirrors.
//!
//! All numbers go through [`fmt3`]: three decimals, `.` as the decimal
//! point, no grouping, and `-0.000` printed as `0.000`. A `*` marks
//! significance at 5%; `-----` fills cells that do not apply to a row.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::estimators::{estimate, Coefficient, DpdOptions, EstimateResult, Method};
use crate::panel::GrowthPanel;
use crate::specification::{corr_effects_regressors, test_fe_vs_ols, test_hausman, test_re_vs_ols, TestResult};
use crate::unit_root::UnitRootReport;
use crate::Result;

pub const NOT_APPLICABLE: &str = "-----";

const LABEL_WIDTH: usize = 4;
const COEF_WIDTH: usize = 18;
const STAT_WIDTH: usize = 13;
const COUNT_WIDTH: usize = 5;

pub const FIT_COLUMNS: [&str; 10] = [
    "Const.¹",
    "Coef.²",
    "F/Wald(mod.)³",
    "F(Fe_OLS)⁴",
    "Corr(u_i)⁵",
    "F(Re_OLS)⁶",
    "Hausman⁷",
    "R²⁸",
    "N.O.⁹",
    "N.I.¹⁰",
];

pub const FIT_NOTE: &str = "Note: 1, Constant; 2, Coefficient; 3, F test for the fixed effects model, Wald test for the \
random effects and dynamic panel models; 4, F test of fixed effects against OLS (Ho is OLS); 5, correlation \
between fixed effects and regressors; 6, LM test of random effects against OLS (Ho is OLS), p-value in brackets; 7, Hausman test \
(Ho is GLS); 8, R square (within for FE and RE, overall for OLS); 9, number of observations; 10, number of \
instruments; *, statistically significant at 5%.";

/// Formats to three decimals, never producing `-0.000`.
pub fn fmt3(x: f64) -> String {
    let s = format!("{x:.3}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// `16.107*` style cell.
pub fn stat_cell(value: f64, significant: bool) -> String {
    let mut s = fmt3(value);
    if significant {
        s.push('*');
    }
    s
}

/// `0.675* (8.910)` style cell.
pub fn coefficient_cell(c: &Coefficient) -> String {
    format!("{} ({})", stat_cell(c.estimate, c.significant_5pct), fmt3(c.t_statistic))
}

fn test_cell(t: &Option<TestResult>) -> String {
    t.as_ref().map_or_else(|| NOT_APPLICABLE.to_string(), |t| stat_cell(t.statistic, t.significant_5pct))
}

/// `0.870 [0.351]`: statistic (starred when significant) and its p-value.
pub fn statistic_with_p_cell(t: &TestResult) -> String {
    format!("{} [{}]", stat_cell(t.statistic, t.significant_5pct), fmt3(t.p_value))
}

fn opt_cell<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map_or_else(|| NOT_APPLICABLE.to_string(), f)
}

/// One estimator row of a fit block. Cells that do not apply are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub method: Method,
    pub intercept: Option<Coefficient>,
    pub slope: Option<Coefficient>,
    pub model_test: Option<TestResult>,
    pub f_fe_ols: Option<TestResult>,
    pub corr_u: Option<f64>,
    pub lm_re_ols: Option<TestResult>,
    pub hausman: Option<TestResult>,
    pub r_squared: Option<f64>,
    pub n_observations: Option<usize>,
    pub n_instruments: Option<usize>,
    /// Why the estimator could not run, if it failed.
    pub error: Option<String>,
    pub notes: Vec<String>,
}

impl FitRow {
    fn empty(method: Method) -> Self {
        Self {
            method,
            intercept: None,
            slope: None,
            model_test: None,
            f_fe_ols: None,
            corr_u: None,
            lm_re_ols: None,
            hausman: None,
            r_squared: None,
            n_observations: None,
            n_instruments: None,
            error: None,
            notes: Vec::new(),
        }
    }

    /// Fills the estimator's own cells from a result.
    pub fn from_estimate(r: &EstimateResult) -> Self {
        let r_squared = match r.method {
            Method::Ols => r.r_squared_overall,
            Method::FixedEffects | Method::RandomEffects => r.r_squared_within,
            Method::DynamicPanel => None,
        };
        Self {
            intercept: Some(r.intercept),
            slope: Some(r.slope),
            model_test: Some(r.model_test.clone()),
            r_squared,
            n_observations: Some(r.n_observations),
            n_instruments: r.n_instruments,
            notes: r.notes.clone(),
            ..Self::empty(r.method)
        }
    }

    fn failed(method: Method, reason: String) -> Self {
        Self { error: Some(reason), ..Self::empty(method) }
    }
}

/// All rows for one industry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitBlock {
    pub industry: String,
    pub rows: Vec<FitRow>,
}

impl FitBlock {
    /// Row-level failures, as `(method, reason)`.
    pub fn failures(&self) -> impl Iterator<Item = (Method, &str)> {
        self.rows.iter().filter_map(|r| r.error.as_deref().map(|e| (r.method, e)))
    }
}

/// Row order used in the tables.
pub const ROW_ORDER: [Method; 4] = [Method::FixedEffects, Method::RandomEffects, Method::Ols, Method::DynamicPanel];

/// Runs the selected estimators and the cross-estimator tests for one
/// industry. Estimator failures end up in the affected row, not as an error.
pub fn fit_block(industry: &str, gp: &GrowthPanel, methods: &[Method], dpd: DpdOptions) -> FitBlock {
    let run = |m: Method| estimate(gp, m, dpd);
    // Tests need OLS/FE/RE even when those rows are not displayed.
    let ols = run(Method::Ols);
    let fe = run(Method::FixedEffects);
    let re = run(Method::RandomEffects);

    let mut rows = Vec::new();
    for m in ROW_ORDER.into_iter().filter(|m| methods.contains(m)) {
        let result = match m {
            Method::Ols => ols.as_ref().map(Clone::clone).map_err(|e| e.to_string()),
            Method::FixedEffects => fe.as_ref().map(Clone::clone).map_err(|e| e.to_string()),
            Method::RandomEffects => re.as_ref().map(Clone::clone).map_err(|e| e.to_string()),
            Method::DynamicPanel => run(m).map_err(|e| e.to_string()),
        };
        let mut row = match result {
            Ok(r) => FitRow::from_estimate(&r),
            Err(reason) => {
                rows.push(FitRow::failed(m, reason));
                continue;
            }
        };
        match m {
            Method::FixedEffects => {
                let fe = fe.as_ref().expect("row exists only if FE ran");
                if let Ok(ols) = &ols {
                    match test_fe_vs_ols(fe, ols) {
                        Ok(t) => row.f_fe_ols = Some(t),
                        Err(e) => row.notes.push(row_note("F(Fe_OLS)", e)),
                    }
                }
                match corr_effects_regressors(fe, gp) {
                    Ok(c) => row.corr_u = c,
                    Err(e) => row.notes.push(row_note("Corr(u_i)", e)),
                }
            }
            Method::RandomEffects => {
                let re = re.as_ref().expect("row exists only if RE ran");
                if let Ok(ols) = &ols {
                    match test_re_vs_ols(gp, ols) {
                        Ok(t) => row.lm_re_ols = Some(t),
                        Err(e) => row.notes.push(row_note("F(Re_OLS)", e)),
                    }
                }
                if let Ok(fe) = &fe {
                    match test_hausman(fe, re) {
                        Ok(t) => row.hausman = Some(t),
                        Err(e) => row.notes.push(row_note("Hausman", e)),
                    }
                }
            }
            _ => {}
        }
        rows.push(row);
    }
    FitBlock { industry: industry.to_string(), rows }
}

fn row_note(what: &str, e: crate::Error) -> String {
    format!("{what} unavailable: {e}")
}

/// An industry that produced no output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skip {
    pub industry: String,
    pub reason: String,
}

/// Writes a left-aligned cell followed by the two-space column gap. Cells
/// never contain two consecutive spaces, so the gap also delimits them.
fn pad(out: &mut String, cell: &str, width: usize) {
    let _ = write!(out, "{cell:<width$}  ");
}

fn column_widths() -> [usize; 10] {
    [
        COEF_WIDTH, COEF_WIDTH, STAT_WIDTH, STAT_WIDTH, STAT_WIDTH, COEF_WIDTH, STAT_WIDTH, STAT_WIDTH,
        COUNT_WIDTH, COUNT_WIDTH,
    ]
}

/// Text cells of a row, in [`FIT_COLUMNS`] order.
pub fn fit_row_cells(row: &FitRow) -> [String; 10] {
    [
        opt_cell(row.intercept.as_ref(), coefficient_cell),
        opt_cell(row.slope.as_ref(), coefficient_cell),
        test_cell(&row.model_test),
        test_cell(&row.f_fe_ols),
        opt_cell(row.corr_u, fmt3),
        opt_cell(row.lm_re_ols.as_ref(), statistic_with_p_cell),
        test_cell(&row.hausman),
        opt_cell(row.r_squared, fmt3),
        opt_cell(row.n_observations, |n| n.to_string()),
        opt_cell(row.n_instruments, |n| n.to_string()),
    ]
}

fn trim_line(out: &mut String) {
    let trimmed = out.trim_end_matches(' ').len();
    out.truncate(trimmed);
    out.push('\n');
}

/// Renders fit blocks as a fixed-width table, followed by the notes and
/// any skipped industries.
pub fn render_fit_text(title: &str, blocks: &[FitBlock], skips: &[Skip]) -> String {
    let widths = column_widths();
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    out.push('\n');
    pad(&mut out, "", LABEL_WIDTH);
    for (h, w) in FIT_COLUMNS.iter().zip(widths) {
        pad(&mut out, h, w);
    }
    trim_line(&mut out);
    for block in blocks {
        let _ = writeln!(out, "{}", block.industry);
        for row in &block.rows {
            pad(&mut out, row.method.label(), LABEL_WIDTH);
            for (cell, w) in fit_row_cells(row).iter().zip(widths) {
                pad(&mut out, cell, w);
            }
            trim_line(&mut out);
        }
    }
    out.push('\n');
    let _ = writeln!(out, "{FIT_NOTE}");
    let row_notes: Vec<String> = blocks
        .iter()
        .flat_map(|b| {
            b.rows.iter().flat_map(move |r| {
                r.error
                    .iter()
                    .map(move |e| format!("{} / {}: not estimated: {e}", b.industry, r.method.label()))
                    .chain(r.notes.iter().map(move |n| format!("{} / {}: {n}", b.industry, r.method.label())))
            })
        })
        .collect();
    if !row_notes.is_empty() {
        out.push('\n');
        let _ = writeln!(out, "Row notes:");
        for n in row_notes {
            let _ = writeln!(out, "  {n}");
        }
    }
    render_skips(&mut out, skips);
    out
}

fn render_skips(out: &mut String, skips: &[Skip]) {
    if skips.is_empty() {
        return;
    }
    out.push('\n');
    let _ = writeln!(out, "Skipped:");
    for s in skips {
        let _ = writeln!(out, "  {}: {}", s.industry, s.reason);
    }
}

/// Flat record mirroring one table row; written as CSV and JSON lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub industry: String,
    pub method: &'static str,
    pub constant: Option<f64>,
    pub constant_t: Option<f64>,
    pub constant_significant: Option<bool>,
    pub coefficient: Option<f64>,
    pub coefficient_t: Option<f64>,
    pub coefficient_significant: Option<bool>,
    pub model_stat: Option<f64>,
    pub model_p: Option<f64>,
    pub f_fe_ols: Option<f64>,
    pub f_fe_ols_p: Option<f64>,
    pub corr_u: Option<f64>,
    pub f_re_ols: Option<f64>,
    pub f_re_ols_p: Option<f64>,
    pub hausman: Option<f64>,
    pub hausman_p: Option<f64>,
    pub r_squared: Option<f64>,
    pub n_observations: Option<usize>,
    pub n_instruments: Option<usize>,
    pub error: Option<String>,
}

pub fn fit_records(blocks: &[FitBlock]) -> Vec<FitRecord> {
    let stat = |t: &Option<TestResult>| t.as_ref().map(|t| t.statistic);
    let p = |t: &Option<TestResult>| t.as_ref().map(|t| t.p_value);
    blocks
        .iter()
        .flat_map(|b| {
            b.rows.iter().map(move |r| FitRecord {
                industry: b.industry.clone(),
                method: r.method.label(),
                constant: r.intercept.map(|c| c.estimate),
                constant_t: r.intercept.map(|c| c.t_statistic),
                constant_significant: r.intercept.map(|c| c.significant_5pct),
                coefficient: r.slope.map(|c| c.estimate),
                coefficient_t: r.slope.map(|c| c.t_statistic),
                coefficient_significant: r.slope.map(|c| c.significant_5pct),
                model_stat: stat(&r.model_test),
                model_p: p(&r.model_test),
                f_fe_ols: stat(&r.f_fe_ols),
                f_fe_ols_p: p(&r.f_fe_ols),
                corr_u: r.corr_u,
                f_re_ols: stat(&r.lm_re_ols),
                f_re_ols_p: p(&r.lm_re_ols),
                hausman: stat(&r.hausman),
                hausman_p: p(&r.hausman),
                r_squared: r.r_squared,
                n_observations: r.n_observations,
                n_instruments: r.n_instruments,
                error: r.error.clone(),
            })
        })
        .collect()
}

/// Writes serializable records as CSV with a header row.
pub fn write_csv<W: Write, T: Serialize>(records: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(records: &[T], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Unit-root results for one industry: one report per variable (p, q).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitRootBlock {
    pub industry: String,
    pub reports: Vec<UnitRootReport>,
}

const UR_ROWS: [&str; 3] = ["Inverse¹", "Inverse²", "Inverse³"];

pub const UNIT_ROOT_NOTE: &str = "Note: 1, inverse chi-squared (P); 2, inverse normal (Z); 3, inverse logit t (L*); \
a, one lag; b, more than one lag; *, statistically significant at 5%.";

fn combination_tests(r: &UnitRootReport) -> Option<[&TestResult; 3]> {
    r.combination
        .as_ref()
        .map(|c| [&c.inverse_chi_squared, &c.inverse_normal, &c.inverse_logit])
}

/// Renders the Fisher-combination blocks.
pub fn render_unit_root_text(title: &str, blocks: &[UnitRootBlock], skips: &[Skip]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    out.push('\n');
    for block in blocks {
        let _ = writeln!(out, "{}", block.industry);
        if block.reports.iter().all(|r| r.combination.is_none()) {
            let excluded: usize = block.reports.iter().map(|r| r.excluded.len()).max().unwrap_or(0);
            let _ = writeln!(
                out,
                "  not computed: fewer than two entities have a usable series ({excluded} excluded)"
            );
            continue;
        }
        pad(&mut out, "", STAT_WIDTH);
        for r in &block.reports {
            pad(&mut out, &format!("{}^{}", r.variable.label(), r.lag_marker()), STAT_WIDTH);
        }
        trim_line(&mut out);
        for (i, label) in UR_ROWS.iter().enumerate() {
            pad(&mut out, label, STAT_WIDTH);
            for r in &block.reports {
                let cell = combination_tests(r)
                    .map_or_else(|| NOT_APPLICABLE.to_string(), |t| stat_cell(t[i].statistic, t[i].significant_5pct));
                pad(&mut out, &cell, STAT_WIDTH);
            }
            trim_line(&mut out);
        }
    }
    out.push('\n');
    let _ = writeln!(out, "{UNIT_ROOT_NOTE}");
    let exclusions: Vec<String> = blocks
        .iter()
        .flat_map(|b| {
            b.reports.iter().flat_map(move |r| {
                r.excluded
                    .iter()
                    .map(move |x| format!("{} / {} / {}: {}", b.industry, r.variable.label(), x.entity, x.reason))
            })
        })
        .collect();
    if !exclusions.is_empty() {
        out.push('\n');
        let _ = writeln!(out, "Excluded entities:");
        for e in exclusions {
            let _ = writeln!(out, "  {e}");
        }
    }
    render_skips(&mut out, skips);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitRootRecord {
    pub industry: String,
    pub variable: &'static str,
    pub lag_marker: String,
    pub statistic: String,
    pub value: f64,
    pub p_value: f64,
    pub significant: bool,
    pub n_entities: usize,
    pub clamped: bool,
}

pub fn unit_root_records(blocks: &[UnitRootBlock]) -> Vec<UnitRootRecord> {
    let mut out = Vec::new();
    for b in blocks {
        for r in &b.reports {
            let (Some(c), Some(tests)) = (&r.combination, combination_tests(r)) else { continue };
            for t in tests {
                out.push(UnitRootRecord {
                    industry: b.industry.clone(),
                    variable: r.variable.label(),
                    lag_marker: r.lag_marker().to_string(),
                    statistic: t.name.clone(),
                    value: t.statistic,
                    p_value: t.p_value,
                    significant: t.significant_5pct,
                    n_entities: c.n_entities,
                    clamped: c.clamped,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specification::{Distribution, Tail};

    fn coef(estimate: f64, t: f64, significant: bool) -> Coefficient {
        Coefficient { estimate, std_error: estimate / t, t_statistic: t, p_value: 0.0, significant_5pct: significant }
    }

    #[test]
    fn coefficient_cells() {
        assert_eq!(coefficient_cell(&coef(0.675, 8.910, true)), "0.675* (8.910)");
        assert_eq!(coefficient_cell(&coef(0.179, 1.410, false)), "0.179 (1.410)");
        assert_eq!(coefficient_cell(&coef(-0.059, -1.46, false)), "-0.059 (-1.460)");
        assert_eq!(stat_cell(16.107, true), "16.107*");
    }

    #[test]
    fn negative_zero_is_normalised() {
        assert_eq!(fmt3(-0.0), "0.000");
        assert_eq!(fmt3(-0.0004), "0.000");
        assert_eq!(fmt3(-0.0005001), "-0.001");
        assert_eq!(fmt3(12345.6789), "12345.679");
    }

    #[test]
    fn missing_cells_are_dashes() {
        let mut row = FitRow::empty(Method::DynamicPanel);
        row.slope = Some(coef(0.694, 8.0, true));
        row.n_observations = Some(24);
        row.n_instruments = Some(20);
        let cells = fit_row_cells(&row);
        assert_eq!(cells[1], "0.694* (8.000)");
        assert_eq!(cells[7], NOT_APPLICABLE);
        assert_eq!(cells[8], "24");
        assert_eq!(cells[9], "20");
    }

    #[test]
    fn table_columns_line_up() {
        let mut row = FitRow::empty(Method::FixedEffects);
        row.intercept = Some(coef(-0.059, -1.46, false));
        row.slope = Some(coef(0.675, 8.91, true));
        row.model_test =
            Some(TestResult::new("F", 79.31, Distribution::F { df1: 1.0, df2: 24.0 }, Tail::Upper, "b = 0").unwrap());
        let block = FitBlock { industry: "Metal industry".into(), rows: vec![row.clone(), row] };
        let text = render_fit_text("t", &[block], &[]);
        let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("FE")).collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("FE    -0.059 (-1.460)     0.675* (8.910)      79.310*"));
        let header = text.lines().nth(2).unwrap();
        let coef_col = header.chars().position(|c| c == 'C').unwrap();
        assert_eq!(coef_col, LABEL_WIDTH + 2);
    }
}
