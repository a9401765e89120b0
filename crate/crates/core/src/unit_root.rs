//! Fisher-type panel unit-root tests.
//!
//! Each entity's series gets a Phillips–Perron Z(τ) statistic from the
//! Dickey–Fuller regression with a constant, converted to a p-value with
//! MacKinnon's response surface. The per-entity p-values are then combined
//! into the inverse chi-squared (P), inverse normal (Z) and inverse logit
//! (L*) panel statistics.

use std::f64::consts::PI;

use serde::Serialize;

use crate::numerics::{cdf_normal, quantile_normal, solve_least_squares, Matrix, NumericsError};
use crate::panel::GrowthPanel;
use crate::specification::{Distribution, Tail, TestResult};
use crate::{Error, Result};

/// Per-entity p-values are clamped into `[P_FLOOR, 1 − P_FLOOR]`.
pub const P_FLOOR: f64 = 1e-6;

// MacKinnon (1994) response surface, one series, constant and no trend.
const TAU_MAX: f64 = 2.74;
const TAU_MIN: f64 = -18.83;
const TAU_STAR: f64 = -1.61;
const SMALL_P: [f64; 3] = [2.1659, 1.4412, 3.8269e-2];
const LARGE_P: [f64; 4] = [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2];

/// Left-tail p-value of a Dickey–Fuller τ (constant, no trend).
pub fn mackinnon_p_value(tau: f64) -> f64 {
    if tau > TAU_MAX {
        return 1.0;
    }
    if tau < TAU_MIN {
        return 0.0;
    }
    let coefs: &[f64] = if tau <= TAU_STAR { &SMALL_P } else { &LARGE_P };
    let poly = coefs.iter().rev().fold(0.0, |acc, c| acc * tau + c);
    cdf_normal(poly)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variable {
    /// Productivity growth.
    P,
    /// Output growth.
    Q,
}

impl Variable {
    pub fn label(self) -> &'static str {
        match self {
            Self::P => "p",
            Self::Q => "q",
        }
    }
}

/// Newey–West bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LagPolicy {
    Fixed(usize),
    /// Start at one lag and raise the bandwidth up to the
    /// `floor(4 (T/100)^(2/9))` cap.
    Escalate,
}

impl LagPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "escalate" {
            return Some(Self::Escalate);
        }
        let k = s.strip_prefix("fixed:").unwrap_or(&s);
        k.parse().ok().filter(|&k: &usize| k >= 1).map(Self::Fixed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityUnitRootStat {
    pub entity: String,
    /// Phillips–Perron Z(τ).
    pub t_statistic: f64,
    /// Newey–West bandwidth.
    pub lags_used: usize,
    /// MacKinnon p-value, clamped into the open unit interval.
    pub p_value: f64,
    /// The raw p-value fell outside the clamp range.
    pub clamped: bool,
}

/// Bandwidth cap `floor(4 (T/100)^(2/9))`, never below 1.
pub fn bandwidth_cap(len: usize) -> usize {
    ((4.0 * (len as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize).max(1)
}

struct DfRegression {
    rho: f64,
    se_rho: f64,
    residuals: Vec<f64>,
    rss: f64,
}

/// Δy_t = α + ρ·y_{t−1} + e_t.
fn df_regression(series: &[f64]) -> Result<DfRegression> {
    let n = series.len() - 1;
    let mut x = Vec::with_capacity(2 * n);
    let mut dy = Vec::with_capacity(n);
    for w in series.windows(2) {
        x.push(1.0);
        x.push(w[0]);
        dy.push(w[1] - w[0]);
    }
    let fit = solve_least_squares(&Matrix::new(n, 2, x)?, &dy).map_err(|e| match e {
        NumericsError::RankDeficient { .. } => Error::DegenerateRegressor("series is constant".into()),
        other => other.into(),
    })?;
    let scale: f64 = dy.iter().map(|v| v * v).sum::<f64>() + series.iter().map(|v| v * v).sum::<f64>();
    if fit.residual_sum_squares <= 1e-24 * scale {
        return Err(Error::DegenerateRegressor(
            "Dickey-Fuller regression fits exactly (deterministic series)".into(),
        ));
    }
    let s2 = fit.residual_sum_squares / (n - 2) as f64;
    Ok(DfRegression {
        rho: fit.coefficients[1],
        se_rho: (s2 * fit.xtx_inverse[(1, 1)]).sqrt(),
        rss: fit.residual_sum_squares,
        residuals: fit.residuals,
    })
}

/// Bartlett-kernel long-run variance with bandwidth `lags`.
fn long_run_variance(e: &[f64], lags: usize) -> f64 {
    let n = e.len() as f64;
    let gamma = |j: usize| e[j..].iter().zip(e).map(|(a, b)| a * b).sum::<f64>() / n;
    let mut lrv = gamma(0);
    for j in 1..=lags.min(e.len().saturating_sub(1)) {
        lrv += 2.0 * (1.0 - j as f64 / (lags as f64 + 1.0)) * gamma(j);
    }
    lrv
}

/// Phillips–Perron Z(τ) test of one series with a given bandwidth.
pub fn pp_test_entity(entity: &str, series: &[f64], lags: usize) -> Result<EntityUnitRootStat> {
    let required = lags + 4;
    if series.len() < required {
        return Err(Error::SeriesTooShort { length: series.len(), required });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("non-finite value at position {i}")));
    }
    let fit = df_regression(series)?;
    let n = fit.residuals.len() as f64;
    let gamma0 = fit.rss / n;
    let s = (fit.rss / (n - 2.0)).sqrt();
    let lambda2 = long_run_variance(&fit.residuals, lags);
    if lambda2 <= 0.0 {
        return Err(Error::DegenerateRegressor(format!("long-run variance is not positive at {lags} lags")));
    }
    let lambda = lambda2.sqrt();
    let tau = fit.rho / fit.se_rho;
    let z_tau = (gamma0 / lambda2).sqrt() * tau - 0.5 * (lambda2 - gamma0) / lambda * (n * fit.se_rho / s);
    let raw = mackinnon_p_value(z_tau);
    let p_value = raw.clamp(P_FLOOR, 1.0 - P_FLOOR);
    Ok(EntityUnitRootStat {
        entity: entity.to_string(),
        t_statistic: z_tau,
        lags_used: lags,
        p_value,
        clamped: p_value != raw,
    })
}

/// Chooses the Newey–West bandwidth for one series.
///
/// `Escalate` walks from one lag up to [`bandwidth_cap`] and returns the
/// first bandwidth with a positive long-run variance of the Dickey–Fuller
/// residuals.
pub fn select_lags(series: &[f64], policy: LagPolicy) -> usize {
    match policy {
        LagPolicy::Fixed(k) => k,
        LagPolicy::Escalate => {
            let cap = bandwidth_cap(series.len()).min(series.len().saturating_sub(4)).max(1);
            if series.len() < 5 {
                return 1;
            }
            match df_regression(series) {
                Ok(fit) => (1..=cap).find(|&l| long_run_variance(&fit.residuals, l) > 0.0).unwrap_or(cap),
                Err(_) => 1,
            }
        }
    }
}

/// The three Fisher-type combinations of N per-entity p-values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherCombination {
    pub n_entities: usize,
    /// P = −2 Σ ln pᵢ against χ²(2N), upper tail.
    pub inverse_chi_squared: TestResult,
    /// Z = N^(−1/2) Σ Φ⁻¹(pᵢ) against N(0,1), lower tail.
    pub inverse_normal: TestResult,
    /// L* against t(5N+4), lower tail.
    pub inverse_logit: TestResult,
    /// At least one input p-value sat at the clamp boundary.
    pub clamped: bool,
}

/// Combines per-entity unit-root p-values.
pub fn fisher_combine(stats: &[EntityUnitRootStat]) -> Result<FisherCombination> {
    let n = stats.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("Fisher combination needs at least 2 entities, got {n}")));
    }
    let mut clamped = false;
    let p: Vec<f64> = stats
        .iter()
        .map(|s| {
            let c = s.p_value.clamp(P_FLOOR, 1.0 - P_FLOOR);
            clamped |= s.clamped || c != s.p_value || c == P_FLOOR || c == 1.0 - P_FLOOR;
            c
        })
        .collect();
    let nf = n as f64;
    let chi = -2.0 * p.iter().map(|v| v.ln()).sum::<f64>();
    let z = p.iter().map(|&v| quantile_normal(v)).sum::<std::result::Result<f64, _>>()? / nf.sqrt();
    let logit: f64 = p.iter().map(|v| (v / (1.0 - v)).ln()).sum();
    let scale = PI * PI * nf * (5.0 * nf + 2.0) / (3.0 * (5.0 * nf + 4.0));
    let l_star = logit / scale.sqrt();

    let null = "all panels contain unit roots";
    let mut combination = FisherCombination {
        n_entities: n,
        inverse_chi_squared: TestResult::new(
            "Inverse chi-squared (P)",
            chi,
            Distribution::ChiSquared { df: 2.0 * nf },
            Tail::Upper,
            null,
        )?,
        inverse_normal: TestResult::new("Inverse normal (Z)", z, Distribution::StandardNormal, Tail::Lower, null)?,
        inverse_logit: TestResult::new(
            "Inverse logit t (L*)",
            l_star,
            Distribution::StudentT { df: 5.0 * nf + 4.0 },
            Tail::Lower,
            null,
        )?,
        clamped,
    };
    if clamped {
        for t in [
            &mut combination.inverse_chi_squared,
            &mut combination.inverse_normal,
            &mut combination.inverse_logit,
        ] {
            t.flags.push("clamped_p_value".to_string());
        }
    }
    Ok(combination)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub entity: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitRootReport {
    pub variable: Variable,
    pub policy: LagPolicy,
    pub entities: Vec<EntityUnitRootStat>,
    pub excluded: Vec<Exclusion>,
    /// Absent when fewer than two entities survive.
    pub combination: Option<FisherCombination>,
}

impl UnitRootReport {
    /// `a` when every entity used a single lag, `b` otherwise.
    pub fn lag_marker(&self) -> char {
        if self.entities.iter().any(|s| s.lags_used > 1) {
            'b'
        } else {
            'a'
        }
    }
}

/// Longest run of consecutive periods in one entity's rows.
fn longest_run(gp: &GrowthPanel, range: std::ops::Range<usize>, variable: Variable) -> Vec<f64> {
    let rows = &gp.rows()[range];
    let mut best: &[_] = &[];
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || rows[i].period != rows[i - 1].period + 1 {
            if i - start > best.len() {
                best = &rows[start..i];
            }
            start = i;
        }
    }
    best.iter()
        .map(|r| match variable {
            Variable::P => r.p,
            Variable::Q => r.q,
        })
        .collect()
}

fn run_entities(
    series: &[(String, Vec<f64>)],
    lag_for: impl Fn(&[f64]) -> usize,
) -> (Vec<EntityUnitRootStat>, Vec<Exclusion>) {
    let mut stats = Vec::new();
    let mut excluded = Vec::new();
    for (entity, s) in series {
        match pp_test_entity(entity, s, lag_for(s)) {
            Ok(st) => stats.push(st),
            Err(e) => excluded.push(Exclusion { entity: entity.clone(), reason: e.to_string() }),
        }
    }
    (stats, excluded)
}

/// Per-entity Phillips–Perron tests of one variable plus the Fisher
/// combination.
///
/// Under `Escalate` the bandwidth starts at one lag for every entity and is
/// raised (each entity capped at its own [`bandwidth_cap`]) until the
/// inverse chi-squared combination rejects at 5% or no entity can go
/// further.
pub fn unit_root_report(gp: &GrowthPanel, variable: Variable, policy: LagPolicy) -> Result<UnitRootReport> {
    let series: Vec<(String, Vec<f64>)> = gp
        .entities()
        .iter()
        .zip(gp.groups())
        .map(|(e, g)| (e.clone(), longest_run(gp, g.clone(), variable)))
        .collect();

    let finish = |(entities, excluded): (Vec<EntityUnitRootStat>, Vec<Exclusion>)| -> Result<UnitRootReport> {
        let combination = if entities.len() >= 2 { Some(fisher_combine(&entities)?) } else { None };
        Ok(UnitRootReport { variable, policy, entities, excluded, combination })
    };

    match policy {
        LagPolicy::Fixed(k) => finish(run_entities(&series, |_| k)),
        LagPolicy::Escalate => {
            let cap_of = |s: &[f64]| bandwidth_cap(s.len()).min(s.len().saturating_sub(4)).max(1);
            let max_cap = series.iter().map(|(_, s)| cap_of(s)).max().unwrap_or(1);
            let mut report = finish(run_entities(&series, |s| select_lags(s, policy)))?;
            for level in 2..=max_cap {
                let rejected = report
                    .combination
                    .as_ref()
                    .is_some_and(|c| c.inverse_chi_squared.significant_5pct);
                if rejected {
                    break;
                }
                report = finish(run_entities(&series, |s| select_lags(s, policy).max(level.min(cap_of(s)))))?;
            }
            Ok(report)
        }
    }
}
