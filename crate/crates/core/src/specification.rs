//! Test statistics comparing the panel estimators: fixed effects against
//! pooled OLS, the Breusch–Pagan LM test for random effects, the Hausman
//! test, and the correlation between fixed effects and the fitted index.

use serde::Serialize;

use crate::estimators::{EstimateResult, Method};
use crate::numerics::{
    cdf_chi_squared, cdf_f, cdf_normal, cdf_student_t, sf_chi_squared, sf_f, sf_normal,
    sf_student_t,
};
use crate::panel::GrowthPanel;
use crate::{Error, Result};

/// Reference distribution of a test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family")]
pub enum Distribution {
    F { df1: f64, df2: f64 },
    ChiSquared { df: f64 },
    StandardNormal,
    StudentT { df: f64 },
}

impl Distribution {
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            Self::F { df1, df2 } => cdf_f(x, df1, df2)?,
            Self::ChiSquared { df } => cdf_chi_squared(x, df)?,
            Self::StandardNormal => cdf_normal(x),
            Self::StudentT { df } => cdf_student_t(x, df)?,
        })
    }

    pub fn sf(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            Self::F { df1, df2 } => sf_f(x, df1, df2)?,
            Self::ChiSquared { df } => sf_chi_squared(x, df)?,
            Self::StandardNormal => sf_normal(x),
            Self::StudentT { df } => sf_student_t(x, df)?,
        })
    }

    pub fn label(&self) -> String {
        match *self {
            Self::F { df1, df2 } => format!("F({df1},{df2})"),
            Self::ChiSquared { df } => format!("chi2({df})"),
            Self::StandardNormal => "N(0,1)".to_string(),
            Self::StudentT { df } => format!("t({df})"),
        }
    }
}

/// Which tail of the reference distribution gives the p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tail {
    Upper,
    Lower,
    TwoSided,
}

/// A test statistic together with its reference distribution and p-value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub distribution: Distribution,
    pub tail: Tail,
    pub p_value: f64,
    pub null_hypothesis: String,
    pub significant_5pct: bool,
    /// Conditions met while computing the statistic, e.g. a clamped
    /// variance difference.
    pub flags: Vec<String>,
}

impl TestResult {
    pub fn new(
        name: &str,
        statistic: f64,
        distribution: Distribution,
        tail: Tail,
        null_hypothesis: &str,
    ) -> Result<Self> {
        let p_value = tail_probability(statistic, &distribution, tail)?;
        Ok(Self {
            name: name.to_string(),
            statistic,
            distribution,
            tail,
            p_value,
            null_hypothesis: null_hypothesis.to_string(),
            significant_5pct: p_value < 0.05,
            flags: Vec::new(),
        })
    }

    /// Re-derives the p-value from the statistic and distribution.
    pub fn recompute_p_value(&self) -> Result<f64> {
        tail_probability(self.statistic, &self.distribution, self.tail)
    }

    fn with_flag(mut self, flag: &str) -> Self {
        self.flags.push(flag.to_string());
        self
    }
}

pub(crate) fn tail_probability(x: f64, dist: &Distribution, tail: Tail) -> Result<f64> {
    let p = match tail {
        Tail::Upper => dist.sf(x)?,
        Tail::Lower => dist.cdf(x)?,
        Tail::TwoSided => (2.0 * dist.sf(x.abs())?).min(1.0),
    };
    Ok(p.clamp(0.0, 1.0))
}

fn same_panel(a: &EstimateResult, b: &EstimateResult) -> Result<()> {
    if a.n_observations != b.n_observations || a.n_entities != b.n_entities {
        return Err(Error::Mismatch(format!(
            "{:?} has n = {}, N = {}; {:?} has n = {}, N = {}",
            a.method, a.n_observations, a.n_entities, b.method, b.n_observations, b.n_entities
        )));
    }
    Ok(())
}

fn expect_method(r: &EstimateResult, m: Method) -> Result<()> {
    if r.method != m {
        return Err(Error::Invalid(format!("expected a {m:?} result, got {:?}", r.method)));
    }
    Ok(())
}

/// F test of the entity effects: pooled OLS (null) against fixed effects.
pub fn test_fe_vs_ols(fe: &EstimateResult, ols: &EstimateResult) -> Result<TestResult> {
    expect_method(fe, Method::FixedEffects)?;
    expect_method(ols, Method::Ols)?;
    same_panel(fe, ols)?;
    let n = fe.n_observations as f64;
    let entities = fe.n_entities as f64;
    let df1 = entities - 1.0;
    let df2 = n - entities - 1.0;
    if df1 < 1.0 || df2 < 1.0 {
        return Err(Error::InsufficientData(format!("F test needs N > 1 and n > N + 1 (n = {n}, N = {entities})")));
    }
    let gain = (ols.rss - fe.rss).max(0.0);
    let stat = if gain == 0.0 {
        0.0
    } else if fe.rss > 0.0 {
        (gain / df1) / (fe.rss / df2)
    } else {
        return Err(Error::DegenerateRegressor("fixed effects fit is exact; F statistic is unbounded".into()));
    };
    TestResult::new(
        "F(FE vs OLS)",
        stat,
        Distribution::F { df1, df2 },
        Tail::Upper,
        "pooled OLS (no fixed effects)",
    )
}

/// Breusch–Pagan LM test for random effects, unbalanced form, computed from
/// the pooled OLS residuals on `gp`.
pub fn test_re_vs_ols(gp: &GrowthPanel, ols: &EstimateResult) -> Result<TestResult> {
    expect_method(ols, Method::Ols)?;
    if ols.n_observations != gp.usable_observations() {
        return Err(Error::Mismatch(format!(
            "OLS used {} rows, panel has {}",
            ols.n_observations,
            gp.usable_observations()
        )));
    }
    if gp.entity_count() < 2 {
        return Err(Error::InsufficientData("LM test needs at least two entities".into()));
    }
    let (a, b) = (ols.intercept.estimate, ols.slope.estimate);
    let resid: Vec<f64> = gp.rows().iter().map(|r| r.p - a - b * r.q).collect();
    let pairs: f64 = gp.groups().iter().map(|g| (g.len() * (g.len() - 1)) as f64).sum();
    if pairs == 0.0 {
        return Err(Error::InsufficientData("every entity has a single period; LM undefined".into()));
    }
    let ess: f64 = resid.iter().map(|e| e * e).sum();
    if ess == 0.0 {
        return Err(Error::DegenerateRegressor("pooled residuals are identically zero".into()));
    }
    let clustered: f64 = gp
        .groups()
        .iter()
        .map(|g| resid[g.clone()].iter().sum::<f64>().powi(2))
        .sum();
    let n = resid.len() as f64;
    let lm = (clustered / ess - 1.0).powi(2) * n * n / (2.0 * pairs);
    TestResult::new(
        "LM (RE vs OLS)",
        lm,
        Distribution::ChiSquared { df: 1.0 },
        Tail::Upper,
        "no random effects (pooled OLS)",
    )
}

/// Hausman test of fixed against random effects on the slope.
///
/// Both slope variances are taken on the FE error-variance scale: the RE
/// variance is rescaled from its transformed-regression s² to σ̂ₑ². In the
/// one-regressor case this keeps the difference non-negative, which the raw
/// reported variances do not guarantee once the effects are correlated with
/// q. A non-positive difference still yields a zero statistic carrying the
/// `negative_variance_difference` flag.
pub fn test_hausman(fe: &EstimateResult, re: &EstimateResult) -> Result<TestResult> {
    expect_method(fe, Method::FixedEffects)?;
    expect_method(re, Method::RandomEffects)?;
    same_panel(fe, re)?;
    let diff = fe.slope.estimate - re.slope.estimate;
    let var_fe = fe.slope.std_error.powi(2);
    let var_re = re.slope.std_error.powi(2) * common_scale(fe, re);
    let var_diff = var_fe - var_re;
    let chi2 = Distribution::ChiSquared { df: 1.0 };
    let null = "random effects (GLS) consistent";
    if diff == 0.0 {
        return TestResult::new("Hausman", 0.0, chi2, Tail::Upper, null);
    }
    if var_diff <= 0.0 {
        return Ok(TestResult::new("Hausman", 0.0, chi2, Tail::Upper, null)?
            .with_flag("negative_variance_difference"));
    }
    TestResult::new("Hausman", diff * diff / var_diff, chi2, Tail::Upper, null)
}

/// σ̂ₑ² (FE) over the RE transformed-regression s²; 1 when either is zero.
fn common_scale(fe: &EstimateResult, re: &EstimateResult) -> f64 {
    let sigma_e2 = fe.rss / fe.df_residual as f64;
    let s2_re = re.rss / re.df_residual as f64;
    if sigma_e2 > 0.0 && s2_re > 0.0 {
        sigma_e2 / s2_re
    } else {
        1.0
    }
}

/// Correlation across entities between the fixed effects and the fitted
/// index b·q̄ᵢ. `None` with fewer than three entities or when either side
/// has no variation.
pub fn corr_effects_regressors(fe: &EstimateResult, gp: &GrowthPanel) -> Result<Option<f64>> {
    expect_method(fe, Method::FixedEffects)?;
    let effects = fe
        .entity_effects
        .as_ref()
        .ok_or_else(|| Error::Invalid("fixed effects result carries no entity effects".into()))?;
    if effects.len() != gp.entity_count() {
        return Err(Error::Mismatch("entity effects do not match the panel".into()));
    }
    if effects.len() < 3 {
        return Ok(None);
    }
    let b = fe.slope.estimate;
    let mut u = Vec::with_capacity(effects.len());
    let mut xb = Vec::with_capacity(effects.len());
    for ((name, effect), (entity, range)) in effects.iter().zip(gp.entities().iter().zip(gp.groups())) {
        if name != entity {
            return Err(Error::Mismatch(format!("effect for {name:?} found where {entity:?} expected")));
        }
        let qbar = gp.rows()[range.clone()].iter().map(|r| r.q).sum::<f64>() / range.len() as f64;
        u.push(*effect);
        xb.push(b * qbar);
    }
    Ok(pearson(&u, &xb))
}

/// Pearson correlation; `None` when either vector has no spread.
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let scale = saa.sqrt() * sbb.sqrt();
    let tiny = 1e-14 * (1.0 + ma.abs().max(mb.abs()));
    if saa.sqrt() <= tiny * n.sqrt() || sbb.sqrt() <= tiny * n.sqrt() || scale == 0.0 {
        return None;
    }
    Some((sab / scale).clamp(-1.0, 1.0))
}
