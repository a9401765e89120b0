//! The four panel estimators of the growth regression `p = a + b·q`:
//! pooled OLS, fixed effects (within), random effects (Swamy–Arora feasible
//! GLS) and one-step Arellano–Bond difference GMM with a lagged dependent
//! variable.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::numerics::{solve_least_squares, Matrix, NumericsError};
use crate::panel::GrowthPanel;
use crate::specification::{pearson, tail_probability, Distribution, Tail, TestResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    #[serde(rename = "OLS")]
    Ols,
    #[serde(rename = "FE")]
    FixedEffects,
    #[serde(rename = "RE")]
    RandomEffects,
    #[serde(rename = "DPD")]
    DynamicPanel,
}

impl Method {
    /// Short row label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::Ols => "OLS",
            Self::FixedEffects => "FE",
            Self::RandomEffects => "RE",
            Self::DynamicPanel => "DPD",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ols" => Some(Self::Ols),
            "fe" => Some(Self::FixedEffects),
            "re" => Some(Self::RandomEffects),
            "dpd" | "gmm" => Some(Self::DynamicPanel),
            _ => None,
        }
    }
}

/// One estimated coefficient with its inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficient {
    pub estimate: f64,
    pub std_error: f64,
    pub t_statistic: f64,
    /// Two-sided p-value against the estimator's reference distribution.
    pub p_value: f64,
    pub significant_5pct: bool,
}

impl Coefficient {
    fn new(estimate: f64, std_error: f64, reference: Distribution) -> Result<Self> {
        let t_statistic = if std_error > 0.0 {
            estimate / std_error
        } else if estimate == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(estimate)
        };
        let p_value = tail_probability(t_statistic, &reference, Tail::TwoSided)?;
        Ok(Self { estimate, std_error, t_statistic, p_value, significant_5pct: p_value < 0.05 })
    }
}

/// Random-effects variance components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceComponents {
    pub sigma_u2: f64,
    pub sigma_e2: f64,
    /// Quasi-demeaning factor per entity, aligned with the panel's entities.
    pub theta: Vec<f64>,
    /// σ̂ᵤ² came out negative and was clamped to zero.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub method: Method,
    pub intercept: Coefficient,
    /// Coefficient on output growth.
    pub slope: Coefficient,
    /// Coefficient on the lagged dependent variable (DPD only).
    pub lagged_dependent: Option<Coefficient>,
    pub model_test: TestResult,
    pub r_squared_within: Option<f64>,
    pub r_squared_overall: Option<f64>,
    pub n_observations: usize,
    pub n_entities: usize,
    pub n_instruments: Option<usize>,
    /// Fixed effects per entity (FE only); observation-weighted mean zero.
    pub entity_effects: Option<Vec<(String, f64)>>,
    pub rss: f64,
    pub df_residual: usize,
    pub variance_components: Option<VarianceComponents>,
    pub notes: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn squared_corr(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(a, b).map(|r| r * r)
}

fn intercept_design(q: &[f64]) -> Result<Matrix> {
    Ok(Matrix::new(q.len(), 2, q.iter().flat_map(|&x| [1.0, x]).collect())?)
}

fn has_spread(v: &[f64]) -> bool {
    let m = mean(v);
    let scale = v.iter().fold(0.0_f64, |s, x| s.max(x.abs())).max(1e-300);
    v.iter().any(|x| (x - m).abs() > 1e-12 * scale)
}

/// Pooled OLS of p on a constant and q.
pub fn estimate_ols(gp: &GrowthPanel) -> Result<EstimateResult> {
    let n = gp.usable_observations();
    if n < 3 {
        return Err(Error::InsufficientData(format!("pooled OLS needs at least 3 rows, got {n}")));
    }
    let (p, q) = (gp.p(), gp.q());
    if !has_spread(&q) {
        return Err(Error::DegenerateRegressor("output growth is constant".into()));
    }
    let x = intercept_design(&q)?;
    let fit = solve_least_squares(&x, &p)?;
    let df = n - 2;
    let s2 = fit.residual_sum_squares / df as f64;
    let reference = Distribution::StudentT { df: df as f64 };
    let intercept = Coefficient::new(fit.coefficients[0], (s2 * fit.xtx_inverse[(0, 0)]).sqrt(), reference)?;
    let slope = Coefficient::new(fit.coefficients[1], (s2 * fit.xtx_inverse[(1, 1)]).sqrt(), reference)?;

    let pbar = mean(&p);
    let tss: f64 = p.iter().map(|v| (v - pbar).powi(2)).sum();
    let r2 = if tss > 0.0 { (1.0 - fit.residual_sum_squares / tss).clamp(0.0, 1.0) } else { 1.0 };

    let model_test = TestResult::new(
        "F",
        slope.t_statistic.powi(2),
        Distribution::F { df1: 1.0, df2: df as f64 },
        Tail::Upper,
        "slope is zero",
    )?;
    Ok(EstimateResult {
        method: Method::Ols,
        intercept,
        slope,
        lagged_dependent: None,
        model_test,
        r_squared_within: None,
        r_squared_overall: Some(r2),
        n_observations: n,
        n_entities: gp.entity_count(),
        n_instruments: None,
        entity_effects: None,
        rss: fit.residual_sum_squares,
        df_residual: df,
        variance_components: None,
        notes: Vec::new(),
    })
}

/// Entity means of p and q, aligned with the panel's entities.
fn entity_means(gp: &GrowthPanel) -> (Vec<f64>, Vec<f64>) {
    gp.groups()
        .iter()
        .map(|g| {
            let rows = &gp.rows()[g.clone()];
            let n = rows.len() as f64;
            (rows.iter().map(|r| r.p).sum::<f64>() / n, rows.iter().map(|r| r.q).sum::<f64>() / n)
        })
        .unzip()
}

struct WithinFit {
    slope: f64,
    sxx: f64,
    rss: f64,
    tss_within: f64,
    df: usize,
    p_dm: Vec<f64>,
    q_dm: Vec<f64>,
}

fn within_fit(gp: &GrowthPanel) -> Result<WithinFit> {
    let multi = gp.groups().iter().filter(|g| g.len() >= 2).count();
    if multi < 2 {
        return Err(Error::InsufficientData(format!(
            "within estimation needs at least 2 entities with 2 or more rows, found {multi}"
        )));
    }
    let n = gp.usable_observations();
    let n_entities = gp.entity_count();
    if n <= n_entities + 1 {
        return Err(Error::InsufficientData(format!("{n} rows leave no within degrees of freedom for {n_entities} entities")));
    }
    let (pbar, qbar) = entity_means(gp);
    let mut p_dm = Vec::with_capacity(n);
    let mut q_dm = Vec::with_capacity(n);
    for (i, g) in gp.groups().iter().enumerate() {
        for r in &gp.rows()[g.clone()] {
            p_dm.push(r.p - pbar[i]);
            q_dm.push(r.q - qbar[i]);
        }
    }
    let sxx: f64 = q_dm.iter().map(|v| v * v).sum();
    let q_scale: f64 = gp.rows().iter().map(|r| r.q * r.q).sum::<f64>();
    if sxx <= 1e-24 * q_scale.max(1e-300) || sxx == 0.0 {
        return Err(Error::DegenerateRegressor("output growth has no within-entity variation".into()));
    }
    let fit = solve_least_squares(&Matrix::column_vector(&q_dm)?, &p_dm).map_err(|e| match e {
        NumericsError::RankDeficient { .. } => {
            Error::DegenerateRegressor("output growth has no within-entity variation".into())
        }
        other => other.into(),
    })?;
    let tss_within = p_dm.iter().map(|v| v * v).sum();
    Ok(WithinFit {
        slope: fit.coefficients[0],
        sxx,
        rss: fit.residual_sum_squares,
        tss_within,
        df: n - n_entities - 1,
        p_dm,
        q_dm,
    })
}

/// Within (fixed-effects) estimator.
///
/// The reported constant is the grand mean p̄ − b·q̄, i.e. the
/// observation-weighted mean of the entity intercepts, and the entity
/// effects are measured around it.
pub fn estimate_fixed_effects(gp: &GrowthPanel) -> Result<EstimateResult> {
    let w = within_fit(gp)?;
    let n = gp.usable_observations();
    let (p, q) = (gp.p(), gp.q());
    let (pbar_i, qbar_i) = entity_means(gp);
    let (pbar, qbar) = (mean(&p), mean(&q));
    let b = w.slope;
    let a = pbar - b * qbar;

    let s2 = w.rss / w.df as f64;
    let reference = Distribution::StudentT { df: w.df as f64 };
    let slope = Coefficient::new(b, (s2 / w.sxx).sqrt(), reference)?;
    let intercept = Coefficient::new(a, (s2 * (1.0 / n as f64 + qbar * qbar / w.sxx)).sqrt(), reference)?;

    let effects = gp
        .entities()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.clone(), pbar_i[i] - b * qbar_i[i] - a))
        .collect();
    let r2_within = if w.tss_within > 0.0 { (1.0 - w.rss / w.tss_within).clamp(0.0, 1.0) } else { 1.0 };

    let model_test = TestResult::new(
        "F",
        slope.t_statistic.powi(2),
        Distribution::F { df1: 1.0, df2: w.df as f64 },
        Tail::Upper,
        "slope is zero",
    )?;
    Ok(EstimateResult {
        method: Method::FixedEffects,
        intercept,
        slope,
        lagged_dependent: None,
        model_test,
        r_squared_within: Some(r2_within),
        r_squared_overall: squared_corr(&p, &q),
        n_observations: n,
        n_entities: gp.entity_count(),
        n_instruments: None,
        entity_effects: Some(effects),
        rss: w.rss,
        df_residual: w.df,
        variance_components: None,
        notes: Vec::new(),
    })
}

/// Swamy–Arora random-effects feasible GLS.
pub fn estimate_random_effects(gp: &GrowthPanel) -> Result<EstimateResult> {
    let w = within_fit(gp)?;
    let n = gp.usable_observations();
    let n_entities = gp.entity_count();
    if n_entities < 3 {
        return Err(Error::InsufficientData(format!(
            "variance components need at least 3 entities, found {n_entities}"
        )));
    }
    let mut notes = Vec::new();
    let sigma_e2 = w.rss / w.df as f64;

    // Between regression on entity means.
    let (pbar_i, qbar_i) = entity_means(gp);
    let sigma_b2 = if has_spread(&qbar_i) {
        let fit = solve_least_squares(&intercept_design(&qbar_i)?, &pbar_i)?;
        fit.residual_sum_squares / (n_entities - 2) as f64
    } else {
        notes.push("entity means of q are identical; between variance taken around the mean".to_string());
        let m = mean(&pbar_i);
        pbar_i.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n_entities - 1) as f64
    };
    let lengths: Vec<f64> = gp.groups().iter().map(|g| g.len() as f64).collect();
    let t_harmonic = n_entities as f64 / lengths.iter().map(|t| 1.0 / t).sum::<f64>();
    let raw_u2 = sigma_b2 - sigma_e2 / t_harmonic;
    let clamped = raw_u2 < 0.0;
    let sigma_u2 = raw_u2.max(0.0);
    if clamped {
        notes.push("RE degenerates to pooled OLS: sigma_u^2 clamped to 0".to_string());
    }
    let theta: Vec<f64> = lengths
        .iter()
        .map(|&t| {
            if sigma_e2 == 0.0 {
                if sigma_u2 > 0.0 { 1.0 } else { 0.0 }
            } else {
                1.0 - (sigma_e2 / (t * sigma_u2 + sigma_e2)).sqrt()
            }
        })
        .collect();

    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for (i, g) in gp.groups().iter().enumerate() {
        for r in &gp.rows()[g.clone()] {
            x.push(1.0 - theta[i]);
            x.push(r.q - theta[i] * qbar_i[i]);
            y.push(r.p - theta[i] * pbar_i[i]);
        }
    }
    let fit = solve_least_squares(&Matrix::new(n, 2, x)?, &y)?;
    let df = n - 2;
    let s2 = fit.residual_sum_squares / df as f64;
    let reference = Distribution::StudentT { df: df as f64 };
    let intercept = Coefficient::new(fit.coefficients[0], (s2 * fit.xtx_inverse[(0, 0)]).sqrt(), reference)?;
    let slope = Coefficient::new(fit.coefficients[1], (s2 * fit.xtx_inverse[(1, 1)]).sqrt(), reference)?;

    let model_test = TestResult::new(
        "Wald",
        slope.t_statistic.powi(2),
        Distribution::ChiSquared { df: 1.0 },
        Tail::Upper,
        "slope is zero",
    )?;
    let (p, q) = (gp.p(), gp.q());
    Ok(EstimateResult {
        method: Method::RandomEffects,
        intercept,
        slope,
        lagged_dependent: None,
        model_test,
        r_squared_within: squared_corr(&w.p_dm, &w.q_dm),
        r_squared_overall: squared_corr(&p, &q),
        n_observations: n,
        n_entities,
        n_instruments: None,
        entity_effects: None,
        rss: fit.residual_sum_squares,
        df_residual: df,
        variance_components: Some(VarianceComponents { sigma_u2, sigma_e2, theta, clamped }),
        notes,
    })
}

/// Settings of the difference GMM estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DpdOptions {
    /// Deepest level lag used as an instrument, counted from t − 2.
    pub max_instrument_lags: usize,
    /// Include p_{t−1} as a regressor.
    pub lagged_dependent: bool,
}

impl Default for DpdOptions {
    fn default() -> Self {
        Self { max_instrument_lags: 99, lagged_dependent: true }
    }
}

/// The stacked first-difference system used by [`estimate_dpd_gmm`].
///
/// Rows are differenced equations, grouped by entity. Regressor columns are
/// `[constant, Δp_{t−1} (optional), Δq_t]`; instrument columns are one per
/// (period, lag) pair of level p, then Δq_t and the constant.
#[derive(Debug, Clone, PartialEq)]
pub struct DpdDesign {
    pub y: Vec<f64>,
    pub x: Matrix,
    pub z: Matrix,
    /// Row range of each contributing entity.
    pub groups: Vec<std::ops::Range<usize>>,
    /// Period label of each differenced equation.
    pub periods: Vec<i64>,
    /// (period, lag) key of each level-instrument column.
    pub level_columns: Vec<(i64, usize)>,
}

impl DpdDesign {
    pub fn n_instruments(&self) -> usize {
        self.z.cols()
    }
}

/// Builds the differenced equations and GMM-style instrument matrix.
pub fn dpd_design(gp: &GrowthPanel, opts: DpdOptions) -> Result<DpdDesign> {
    if opts.max_instrument_lags == 0 {
        return Err(Error::Invalid("max_instrument_lags must be at least 1".into()));
    }
    struct Eq {
        period: i64,
        dy: f64,
        dy_lag: f64,
        dq: f64,
        levels: Vec<(usize, f64)>,
    }
    let mut per_entity: Vec<Vec<Eq>> = Vec::new();
    let mut columns: BTreeSet<(i64, usize)> = BTreeSet::new();
    for g in gp.groups() {
        let rows = &gp.rows()[g.clone()];
        let by_period: HashMap<i64, (f64, f64)> = rows.iter().map(|r| (r.period, (r.p, r.q))).collect();
        let mut eqs = Vec::new();
        for r in rows {
            let t = r.period;
            let (Some(&(p1, q1)), Some(&(p2, _))) = (by_period.get(&(t - 1)), by_period.get(&(t - 2))) else {
                continue;
            };
            let levels: Vec<(usize, f64)> = (2..=opts.max_instrument_lags + 1)
                .filter_map(|lag| by_period.get(&(t - lag as i64)).map(|&(p, _)| (lag, p)))
                .collect();
            for (lag, _) in &levels {
                columns.insert((t, *lag));
            }
            eqs.push(Eq { period: t, dy: r.p - p1, dy_lag: p1 - p2, dq: r.q - q1, levels });
        }
        if !eqs.is_empty() {
            per_entity.push(eqs);
        }
    }
    let level_columns: Vec<(i64, usize)> = columns.into_iter().collect();
    let col_index: HashMap<(i64, usize), usize> =
        level_columns.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let n_rows: usize = per_entity.iter().map(Vec::len).sum();
    let kx = if opts.lagged_dependent { 3 } else { 2 };
    let kz = level_columns.len() + 2;

    let mut y = Vec::with_capacity(n_rows);
    let mut x = Vec::with_capacity(n_rows * kx);
    let mut z = vec![0.0; n_rows * kz];
    let mut groups = Vec::new();
    let mut periods = Vec::with_capacity(n_rows);
    let mut row = 0;
    for eqs in per_entity {
        let start = row;
        for e in eqs {
            y.push(e.dy);
            x.push(1.0);
            if opts.lagged_dependent {
                x.push(e.dy_lag);
            }
            x.push(e.dq);
            for (lag, v) in e.levels {
                z[row * kz + col_index[&(e.period, lag)]] = v;
            }
            z[row * kz + kz - 2] = e.dq;
            z[row * kz + kz - 1] = 1.0;
            periods.push(e.period);
            row += 1;
        }
        groups.push(start..row);
    }
    Ok(DpdDesign {
        y,
        x: Matrix::new(n_rows, kx, x)?,
        z: Matrix::new(n_rows, kz, z)?,
        groups,
        periods,
        level_columns,
    })
}

fn block(m: &Matrix, range: &std::ops::Range<usize>) -> Matrix {
    let data = range.clone().flat_map(|r| m.row(r).to_vec()).collect();
    Matrix::new(range.len(), m.cols(), data).expect("sub-block of a valid matrix")
}

/// One-step Arellano–Bond difference GMM with robust standard errors.
pub fn estimate_dpd_gmm(gp: &GrowthPanel, opts: DpdOptions) -> Result<EstimateResult> {
    let d = dpd_design(gp, opts)?;
    let n = d.y.len();
    let kz = d.n_instruments();
    let kx = d.x.cols();
    if n < kz || n <= kx {
        return Err(Error::TooFewRows { rows: n, instruments: kz });
    }
    let mut notes = Vec::new();

    // Σ Zᵢᵀ H Zᵢ with H = 2 on the diagonal, −1 between adjacent periods.
    let mut s = Matrix::zeros(kz, kz);
    for g in &d.groups {
        let zi = block(&d.z, g);
        let rows = g.len();
        let mut h = Matrix::zeros(rows, rows);
        for a in 0..rows {
            h[(a, a)] = 2.0;
            if a + 1 < rows && d.periods[g.start + a + 1] - d.periods[g.start + a] == 1 {
                h[(a, a + 1)] = -1.0;
                h[(a + 1, a)] = -1.0;
            }
        }
        s = s.add(&zi.transpose().matmul(&h)?.matmul(&zi)?)?;
    }
    s.symmetrize();
    let weight = match s.inverse() {
        Ok(w) => w,
        Err(NumericsError::Singular) => {
            let (w, rank) = s.pseudo_inverse_symmetric()?;
            notes.push(format!("weighting matrix singular (rank {rank} of {kz}); pseudo-inverse used"));
            w
        }
        Err(e) => return Err(e.into()),
    };

    let zt = d.z.transpose();
    let zx = zt.matmul(&d.x)?;
    let zy = zt.matvec(&d.y)?;
    let xz_w = zx.transpose().matmul(&weight)?;
    let a = xz_w.matmul(&zx)?;
    let a_inv = a.inverse().map_err(|_| {
        Error::DegenerateRegressor("differenced regressors are not identified by the instruments".into())
    })?;
    let beta = a_inv.matvec(&xz_w.matvec(&zy)?)?;

    let fitted = d.x.matvec(&beta)?;
    let resid: Vec<f64> = d.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mut meat = Matrix::zeros(kz, kz);
    for g in &d.groups {
        let zi = block(&d.z, g);
        let ze = zi.transpose().matvec(&resid[g.clone()])?;
        for i in 0..kz {
            for j in 0..kz {
                meat[(i, j)] += ze[i] * ze[j];
            }
        }
    }
    let bread = a_inv.matmul(&xz_w)?;
    let mut vcov = bread.matmul(&meat)?.matmul(&bread.transpose())?;
    vcov.symmetrize();

    let reference = Distribution::StandardNormal;
    let coef = |j: usize| Coefficient::new(beta[j], vcov[(j, j)].max(0.0).sqrt(), reference);
    let intercept = coef(0)?;
    let (lagged_dependent, slope) =
        if opts.lagged_dependent { (Some(coef(1)?), coef(2)?) } else { (None, coef(1)?) };
    let model_test = TestResult::new(
        "Wald",
        slope.t_statistic.powi(2),
        Distribution::ChiSquared { df: 1.0 },
        Tail::Upper,
        "slope is zero",
    )?;
    Ok(EstimateResult {
        method: Method::DynamicPanel,
        intercept,
        slope,
        lagged_dependent,
        model_test,
        r_squared_within: None,
        r_squared_overall: None,
        n_observations: n,
        n_entities: d.groups.len(),
        n_instruments: Some(kz),
        entity_effects: None,
        rss: resid.iter().map(|e| e * e).sum(),
        df_residual: n - kx,
        variance_components: None,
        notes,
    })
}

/// Runs the estimator named by `method` with default DPD options.
pub fn estimate(gp: &GrowthPanel, method: Method, dpd: DpdOptions) -> Result<EstimateResult> {
    match method {
        Method::Ols => estimate_ols(gp),
        Method::FixedEffects => estimate_fixed_effects(gp),
        Method::RandomEffects => estimate_random_effects(gp),
        Method::DynamicPanel => estimate_dpd_gmm(gp, dpd),
    }
}
