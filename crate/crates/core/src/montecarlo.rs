//! Synthetic growth panels and a replication harness for checking bias,
//! coverage, size and power of the estimators and tests.
//!
//! Replication `r` of a study with master seed `s` draws from
//! `splitmix64(s + (r + 1)·0x9E3779B97F4A7C15)`. The map is injective in `r`,
//! so seeds never repeat within a study, and results do not depend on the
//! order (or thread) in which replications run.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::estimators::{estimate, DpdOptions, EstimateResult, Method};
use crate::panel::{GrowthPanel, GrowthRow};
use crate::specification::{tail_probability, test_fe_vs_ols, test_hausman, test_re_vs_ols, Distribution, Tail};
use crate::{estimate_fixed_effects, estimate_ols, estimate_random_effects, Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Data-generating process for `p = a + b·q + u_i + e_it`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DgpSpec {
    pub n_entities: usize,
    pub n_periods: usize,
    pub intercept: f64,
    pub slope: f64,
    /// Standard deviation of the entity effect's own noise.
    pub entity_effect_sd: f64,
    pub noise_sd: f64,
    /// u_i = endogeneity · q̄_i + N(0, entity_effect_sd²).
    pub endogeneity: f64,
    /// AR(1) coefficient of e_it.
    pub ar1_rho: f64,
    /// Draw q_it as a random walk over t instead of i.i.d.
    pub unit_root: bool,
    pub q_mean: f64,
    pub q_sd: f64,
    pub seed: u64,
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            n_entities: 7,
            n_periods: 8,
            intercept: 0.0,
            slope: 0.7,
            entity_effect_sd: 0.03,
            noise_sd: 0.02,
            endogeneity: 0.0,
            ar1_rho: 0.0,
            unit_root: false,
            q_mean: 0.02,
            q_sd: 0.05,
            seed: 42,
        }
    }
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_entities == 0 || self.n_periods == 0 {
            return Err(Error::Config("n_entities and n_periods must be positive".into()));
        }
        if [self.entity_effect_sd, self.noise_sd, self.q_sd].iter().any(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::Config("standard deviations must be non-negative".into()));
        }
        let limit_ok = if self.unit_root { self.ar1_rho.abs() <= 1.0 } else { self.ar1_rho.abs() < 1.0 };
        if !limit_ok {
            return Err(Error::Config(format!("ar1_rho {} outside the stationary range", self.ar1_rho)));
        }
        let finite = [self.intercept, self.slope, self.endogeneity, self.ar1_rho, self.q_mean];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite DGP parameter".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Draws one panel. Identical specs (seed included) give identical panels.
pub fn generate_panel(spec: &DgpSpec) -> Result<GrowthPanel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut z = move || -> f64 { StandardNormal.sample(&mut rng) };
    let t_len = spec.n_periods;
    let mut rows = Vec::with_capacity(spec.n_entities * t_len);
    for i in 0..spec.n_entities {
        let mut q = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let shock = spec.q_sd * z();
            let v = if spec.unit_root && t > 0 { q[t - 1] + shock } else { spec.q_mean + shock };
            q.push(v);
        }
        let qbar = q.iter().sum::<f64>() / t_len as f64;
        let u = spec.endogeneity * qbar + spec.entity_effect_sd * z();
        let stationary_sd = if spec.ar1_rho.abs() < 1.0 {
            spec.noise_sd / (1.0 - spec.ar1_rho * spec.ar1_rho).sqrt()
        } else {
            spec.noise_sd
        };
        let mut e = stationary_sd * z();
        for (t, &qt) in q.iter().enumerate() {
            if t > 0 {
                e = spec.ar1_rho * e + spec.noise_sd * z();
            }
            rows.push(GrowthRow {
                entity: format!("E{:03}", i + 1),
                period: t as i64 + 1,
                p: spec.intercept + spec.slope * qt + u + e,
                q: qt,
            });
        }
    }
    GrowthPanel::from_rows(rows)
}

/// Tests that can be studied for size and power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestKind {
    FeVsOls,
    ReVsOls,
    Hausman,
}

/// What each replication computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StudyTarget {
    Estimator(Method),
    Test(TestKind),
}

impl StudyTarget {
    pub fn parse(label: &str) -> Option<Self> {
        if let Some(m) = Method::parse(label) {
            return Some(Self::Estimator(m));
        }
        match label.trim().to_ascii_lowercase().as_str() {
            "f_fe_ols" | "fe_vs_ols" => Some(Self::Test(TestKind::FeVsOls)),
            "lm_re_ols" | "re_vs_ols" | "bp_lm" => Some(Self::Test(TestKind::ReVsOls)),
            "hausman" => Some(Self::Test(TestKind::Hausman)),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Estimator(m) => m.label(),
            Self::Test(TestKind::FeVsOls) => "f_fe_ols",
            Self::Test(TestKind::ReVsOls) => "lm_re_ols",
            Self::Test(TestKind::Hausman) => "hausman",
        }
    }
}

/// Result of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    /// Slope estimate, or the test statistic for test targets.
    pub value: f64,
    pub std_error: Option<f64>,
    /// Estimators: slope significant at 5%. Tests: null rejected at 5%.
    pub rejected: bool,
    /// Whether the 95% interval covers the true slope (estimators only).
    pub covered: Option<bool>,
}

fn outcome_from_estimate(r: &EstimateResult, truth: f64) -> Result<Outcome> {
    let reference = match r.method {
        Method::DynamicPanel => Distribution::StandardNormal,
        _ => Distribution::StudentT { df: r.df_residual as f64 },
    };
    let se = r.slope.std_error;
    let z = (r.slope.estimate - truth) / se;
    let covered = se > 0.0 && tail_probability(z, &reference, Tail::TwoSided)? >= 0.05;
    Ok(Outcome {
        value: r.slope.estimate,
        std_error: Some(se),
        rejected: r.slope.significant_5pct,
        covered: Some(covered),
    })
}

/// Runs one replication of `target` on a panel drawn from `spec`.
pub fn replicate(spec: &DgpSpec, target: StudyTarget, dpd: DpdOptions) -> Result<Outcome> {
    let gp = generate_panel(spec)?;
    match target {
        StudyTarget::Estimator(m) => outcome_from_estimate(&estimate(&gp, m, dpd)?, spec.slope),
        StudyTarget::Test(kind) => {
            let t = match kind {
                TestKind::FeVsOls => test_fe_vs_ols(&estimate_fixed_effects(&gp)?, &estimate_ols(&gp)?)?,
                TestKind::ReVsOls => test_re_vs_ols(&gp, &estimate_ols(&gp)?)?,
                TestKind::Hausman => test_hausman(&estimate_fixed_effects(&gp)?, &estimate_random_effects(&gp)?)?,
            };
            Ok(Outcome { value: t.statistic, std_error: None, rejected: t.significant_5pct, covered: None })
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `master`.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Runs every replication (in parallel) and returns outcomes in index order.
pub fn run_replications(
    spec: &DgpSpec,
    target: StudyTarget,
    replications: usize,
    dpd: DpdOptions,
) -> Result<Vec<Result<Outcome>>> {
    spec.validate()?;
    Ok((0..replications)
        .into_par_iter()
        .map(|r| replicate(&spec.with_seed(replication_seed(spec.seed, r as u64)), target, dpd))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub target: String,
    pub replications: usize,
    /// Replications whose estimator or test returned an error.
    pub failures: usize,
    pub mean_estimate: f64,
    /// Mean estimate minus the true slope (estimators only).
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    /// Monte Carlo standard deviation of the estimates.
    pub sd_estimate: f64,
    pub rejection_rate: f64,
    pub coverage_95: Option<f64>,
}

/// Aggregates outcomes in the order given.
pub fn summarize(
    target: StudyTarget,
    truth: f64,
    outcomes: &[Result<Outcome>],
) -> Result<McSummary> {
    let ok: Vec<&Outcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failures = outcomes.len() - ok.len();
    if ok.is_empty() {
        return Err(Error::InsufficientData(format!("all {} replications failed", outcomes.len())));
    }
    let n = ok.len() as f64;
    let mean = ok.iter().map(|o| o.value).sum::<f64>() / n;
    let var = if ok.len() > 1 {
        ok.iter().map(|o| (o.value - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let rejection_rate = ok.iter().filter(|o| o.rejected).count() as f64 / n;
    let is_estimator = matches!(target, StudyTarget::Estimator(_));
    let (bias, rmse, coverage) = if is_estimator {
        let mse = ok.iter().map(|o| (o.value - truth).powi(2)).sum::<f64>() / n;
        let covered = ok.iter().filter(|o| o.covered == Some(true)).count() as f64 / n;
        (Some(mean - truth), Some(mse.sqrt()), Some(covered))
    } else {
        (None, None, None)
    };
    Ok(McSummary {
        target: target.label().to_string(),
        replications: outcomes.len(),
        failures,
        mean_estimate: mean,
        bias,
        rmse,
        sd_estimate: var.sqrt(),
        rejection_rate,
        coverage_95: coverage,
    })
}

/// Runs a full study: replications plus summary.
pub fn run_study(spec: &DgpSpec, target: StudyTarget, replications: usize) -> Result<McSummary> {
    run_study_with(spec, target, replications, DpdOptions::default())
}

pub fn run_study_with(
    spec: &DgpSpec,
    target: StudyTarget,
    replications: usize,
    dpd: DpdOptions,
) -> Result<McSummary> {
    if replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    let outcomes = run_replications(spec, target, replications, dpd)?;
    summarize(target, spec.slope, &outcomes)
}

/// A study read from a `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub spec: DgpSpec,
    pub targets: Vec<StudyTarget>,
    pub replications: usize,
    pub dpd: DpdOptions,
}

impl StudyConfig {
    /// Parses `key = value` lines; `#` starts a comment. Recognised keys are
    /// the [`DgpSpec`] field names plus `estimator` (comma-separated list of
    /// ols, fe, re, dpd, f_fe_ols, lm_re_ols, hausman), `replications`,
    /// `max_instrument_lags` and `lagged_dependent`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self {
            spec: DgpSpec::default(),
            targets: vec![StudyTarget::Estimator(Method::FixedEffects)],
            replications: 1000,
            dpd: DpdOptions::default(),
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.spec.validate()?;
        if cfg.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
        }
        let s = &mut self.spec;
        match key {
            "n_entities" => s.n_entities = num(key, value)?,
            "n_periods" => s.n_periods = num(key, value)?,
            "intercept" => s.intercept = num(key, value)?,
            "slope" => s.slope = num(key, value)?,
            "entity_effect_sd" => s.entity_effect_sd = num(key, value)?,
            "noise_sd" => s.noise_sd = num(key, value)?,
            "endogeneity" => s.endogeneity = num(key, value)?,
            "ar1_rho" => s.ar1_rho = num(key, value)?,
            "unit_root" => s.unit_root = num(key, value)?,
            "q_mean" => s.q_mean = num(key, value)?,
            "q_sd" => s.q_sd = num(key, value)?,
            "seed" => s.seed = num(key, value)?,
            "replications" => self.replications = num(key, value)?,
            "max_instrument_lags" => self.dpd.max_instrument_lags = num(key, value)?,
            "lagged_dependent" => self.dpd.lagged_dependent = num(key, value)?,
            "estimator" | "estimators" => {
                self.targets = value
                    .split(',')
                    .map(|l| StudyTarget::parse(l).ok_or_else(|| format!("unknown estimator {:?}", l.trim())))
                    .collect::<std::result::Result<_, _>>()?;
                if self.targets.is_empty() {
                    return Err("no estimator given".into());
                }
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes summaries as CSV, one row each.
pub fn write_summary_csv<W: Write>(summaries: &[McSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "target",
        "replications",
        "failures",
        "mean_estimate",
        "bias",
        "rmse",
        "sd_estimate",
        "rejection_rate",
        "coverage_95",
    ])?;
    for s in summaries {
        w.write_record([
            s.target.clone(),
            s.replications.to_string(),
            s.failures.to_string(),
            s.mean_estimate.to_string(),
            opt(s.bias),
            opt(s.rmse),
            s.sd_estimate.to_string(),
            s.rejection_rate.to_string(),
            opt(s.coverage_95),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_panel_is_exact() {
        let spec = DgpSpec { entity_effect_sd: 0.0, noise_sd: 0.0, intercept: 0.01, ..DgpSpec::default() };
        let gp = generate_panel(&spec).unwrap();
        assert_eq!(gp.usable_observations(), 56);
        for r in gp.rows() {
            assert!((r.p - (0.01 + 0.7 * r.q)).abs() < 1e-15);
        }
        let ols = estimate_ols(&gp).unwrap();
        assert!((ols.slope.estimate - 0.7).abs() < 1e-12);
        assert!((ols.intercept.estimate - 0.01).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_panel() {
        let spec = DgpSpec::default();
        assert_eq!(generate_panel(&spec).unwrap(), generate_panel(&spec).unwrap());
        assert_ne!(generate_panel(&spec).unwrap(), generate_panel(&spec.with_seed(43)).unwrap());
    }

    #[test]
    fn endogeneity_shows_in_sample_correlation() {
        let spec = DgpSpec { n_entities: 50, endogeneity: 0.8, entity_effect_sd: 0.005, ..DgpSpec::default() };
        let gp = generate_panel(&spec).unwrap();
        // Recover u_i exactly: p − a − b q − e has mean u_i, so use noise-free e.
        let spec0 = DgpSpec { noise_sd: 0.0, ..spec.clone() };
        let gp0 = generate_panel(&spec0).unwrap();
        let mut u = Vec::new();
        let mut qbar = Vec::new();
        for g in gp0.groups() {
            let rows = &gp0.rows()[g.clone()];
            let n = rows.len() as f64;
            qbar.push(rows.iter().map(|r| r.q).sum::<f64>() / n);
            u.push(rows[0].p - 0.7 * rows[0].q);
        }
        let c = crate::specification::pearson(&u, &qbar).unwrap();
        assert!(c > 0.4, "corr = {c}");
        assert_eq!(gp.usable_observations(), 400);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(DgpSpec { ar1_rho: 1.0, ..DgpSpec::default() }.validate().is_err());
        assert!(DgpSpec { ar1_rho: 1.0, unit_root: true, ..DgpSpec::default() }.validate().is_ok());
        assert!(DgpSpec { noise_sd: -1.0, ..DgpSpec::default() }.validate().is_err());
        assert!(DgpSpec { n_entities: 0, ..DgpSpec::default() }.validate().is_err());
    }

    #[test]
    fn single_replication_rmse_is_abs_bias() {
        let s = run_study(&DgpSpec::default(), StudyTarget::Estimator(Method::FixedEffects), 1).unwrap();
        assert_eq!(s.replications, 1);
        assert!((s.rmse.unwrap() - s.bias.unwrap().abs()).abs() < 1e-15);
    }

    #[test]
    fn summary_is_order_independent() {
        let spec = DgpSpec::default();
        let target = StudyTarget::Estimator(Method::Ols);
        let outcomes = run_replications(&spec, target, 50, DpdOptions::default()).unwrap();
        let forward = summarize(target, 0.7, &outcomes).unwrap();
        // Same outcomes computed sequentially in reverse.
        let mut reversed: Vec<(usize, Result<Outcome>)> = (0..50)
            .rev()
            .map(|r| (r, replicate(&spec.with_seed(replication_seed(spec.seed, r as u64)), target, DpdOptions::default())))
            .collect();
        reversed.sort_by_key(|(r, _)| *r);
        let again: Vec<Result<Outcome>> = reversed.into_iter().map(|(_, o)| o).collect();
        assert_eq!(summarize(target, 0.7, &again).unwrap(), forward);
    }

    #[test]
    fn failures_are_counted() {
        // One entity: FE cannot run, every replication fails.
        let spec = DgpSpec { n_entities: 1, ..DgpSpec::default() };
        let outcomes = run_replications(&spec, StudyTarget::Estimator(Method::FixedEffects), 5, DpdOptions::default()).unwrap();
        assert!(outcomes.iter().all(Result::is_err));
        assert!(summarize(StudyTarget::Estimator(Method::FixedEffects), 0.7, &outcomes).is_err());
    }

    #[test]
    fn config_parsing() {
        let cfg = StudyConfig::parse(
            "# demo\nn_entities = 10\nslope=0.5\nestimator = fe, hausman\nreplications = 20\nunit_root = false\n",
        )
        .unwrap();
        assert_eq!(cfg.spec.n_entities, 10);
        assert_eq!(cfg.spec.slope, 0.5);
        assert_eq!(cfg.targets, [StudyTarget::Estimator(Method::FixedEffects), StudyTarget::Test(TestKind::Hausman)]);
        assert_eq!(cfg.replications, 20);
        assert!(StudyConfig::parse("estimator = magic").is_err());
        assert!(StudyConfig::parse("colour = blue").is_err());
        assert!(StudyConfig::parse("just words").is_err());
    }

    #[test]
    fn summary_csv_layout() {
        let s = McSummary {
            target: "FE".into(),
            replications: 2,
            failures: 0,
            mean_estimate: 0.5,
            bias: Some(-0.2),
            rmse: Some(0.25),
            sd_estimate: 0.1,
            rejection_rate: 1.0,
            coverage_95: None,
        };
        let mut buf = Vec::new();
        write_summary_csv(&[s], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "target,replications,failures,mean_estimate,bias,rmse,sd_estimate,rejection_rate,coverage_95\nFE,2,0,0.5,-0.2,0.25,0.1,1,\n"
        );
    }
}
