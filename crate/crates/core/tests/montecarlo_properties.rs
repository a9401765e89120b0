use std::collections::HashSet;

use verdoorn::estimators::{estimate_ols, estimate_fixed_effects};
use verdoorn::montecarlo::{replication_seed, run_study_with, summarize, write_summary_csv, StudyConfig};
use verdoorn::specification::corr_effects_regressors;
use verdoorn::*;

#[test]
fn replication_seeds_never_collide() {
    for master in [0, 1, 42, u64::MAX, 0x9E37_79B9_7F4A_7C15] {
        let mut seen = HashSet::with_capacity(100_000);
        for r in 0..100_000 {
            assert!(seen.insert(replication_seed(master, r)), "master {master}: seed reused at {r}");
        }
    }
}

#[test]
fn ols_coverage_is_nominal_without_effects() {
    let spec = DgpSpec { n_entities: 25, n_periods: 8, entity_effect_sd: 0.0, seed: 7, ..DgpSpec::default() };
    let s = run_study(&spec, StudyTarget::Estimator(Method::Ols), 2000).unwrap();
    let cov = s.coverage_95.unwrap();
    assert!((0.93..=0.97).contains(&cov), "coverage {cov}");
}

#[test]
fn summaries_respect_their_invariants() {
    let spec = DgpSpec { seed: 3, ..DgpSpec::default() };
    for label in ["ols", "fe", "re", "dpd", "hausman", "lm_re_ols", "f_fe_ols"] {
        let s = run_study(&spec, StudyTarget::parse(label).unwrap(), 100).unwrap();
        assert!((0.0..=1.0).contains(&s.rejection_rate), "{label}");
        if let (Some(b), Some(rmse), Some(c)) = (s.bias, s.rmse, s.coverage_95) {
            assert!(rmse + 1e-15 >= b.abs(), "{label}: rmse {rmse} < |bias| {b}");
            assert!((0.0..=1.0).contains(&c));
        }
    }
}

#[test]
fn studies_are_reproducible() {
    let spec = DgpSpec { seed: 5, ..DgpSpec::default() };
    let a = run_study(&spec, StudyTarget::Estimator(Method::RandomEffects), 300).unwrap();
    let b = run_study(&spec, StudyTarget::Estimator(Method::RandomEffects), 300).unwrap();
    assert_eq!(a, b);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    write_summary_csv(&[a], &mut csv_a).unwrap();
    write_summary_csv(&[b], &mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn replication_order_does_not_matter() {
    let spec = DgpSpec { seed: 6, ..DgpSpec::default() };
    let target = StudyTarget::Estimator(Method::FixedEffects);
    let mut outcomes: Vec<(u64, _)> = (0..200u64)
        .rev()
        .map(|r| (r, verdoorn::montecarlo::replicate(&spec.with_seed(replication_seed(spec.seed, r)), target, DpdOptions::default())))
        .collect();
    outcomes.sort_by_key(|(r, _)| *r);
    let ordered: Vec<_> = outcomes.into_iter().map(|(_, o)| o).collect();
    let via_study = run_study(&spec, target, 200).unwrap();
    assert_eq!(summarize(target, spec.slope, &ordered).unwrap(), via_study);
}

#[test]
fn endogeneity_correlates_effects_with_mean_output_growth() {
    let spec = DgpSpec { n_entities: 50, endogeneity: 0.8, entity_effect_sd: 0.01, noise_sd: 0.0, ..DgpSpec::default() };
    let gp = generate_panel(&spec).unwrap();
    // Without noise the FE effects are the true u_i up to a common constant.
    let fe = estimate_fixed_effects(&gp).unwrap();
    let c = corr_effects_regressors(&fe, &gp).unwrap().unwrap();
    assert!(c > 0.4, "corr {c}");
}

#[test]
fn unit_root_dgp_produces_random_walk_output_growth() {
    let spec = DgpSpec { unit_root: true, n_periods: 100, n_entities: 50, ..DgpSpec::default() };
    let gp = generate_panel(&spec).unwrap();
    // Cross-entity variance of q at period t grows like t·q_sd².
    let spread = |period: i64| {
        let q: Vec<f64> = gp.rows().iter().filter(|r| r.period == period).map(|r| r.q).collect();
        let m = q.iter().sum::<f64>() / q.len() as f64;
        q.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (q.len() - 1) as f64
    };
    let periods: Vec<i64> = gp.rows().iter().map(|r| r.period).collect();
    let (first, last) = (*periods.iter().min().unwrap(), *periods.iter().max().unwrap());
    assert!(spread(last) > 20.0 * spread(first), "{} vs {}", spread(last), spread(first));
    assert!(estimate_ols(&gp).is_ok());
}

#[test]
fn bundled_demo_study_parses_and_runs() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/demo_study.cfg")).unwrap();
    let cfg = StudyConfig::parse(&text).unwrap();
    for t in &cfg.targets {
        let s = run_study_with(&cfg.spec, *t, 50, cfg.dpd).unwrap();
        assert_eq!(s.replications, 50);
    }
}
