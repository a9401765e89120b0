mod common;

use proptest::prelude::*;
use verdoorn::estimators::estimate;
use verdoorn::montecarlo::replication_seed;
use verdoorn::numerics::cdf_student_t;
use verdoorn::report::{fit_block, fit_row_cells, NOT_APPLICABLE};
use verdoorn::*;

/// Unbalanced panel: per entity a list of (q, noise) and an effect.
fn panel_strategy() -> impl Strategy<Value = GrowthPanel> {
    let entity = (prop::collection::vec((-0.2..0.2f64, -0.05..0.05f64), 3..10), -0.1..0.1f64);
    prop::collection::vec(entity, 3..8).prop_map(|entities| {
        let mut rows = Vec::new();
        for (i, (obs, effect)) in entities.iter().enumerate() {
            for (t, &(q, e)) in obs.iter().enumerate() {
                rows.push(GrowthRow {
                    entity: format!("E{i}"),
                    period: t as i64,
                    q,
                    p: 0.02 + 0.6 * q + effect + e,
                });
            }
        }
        GrowthPanel::from_rows(rows).unwrap()
    })
}

fn has_q_variation(gp: &GrowthPanel) -> bool {
    let q = gp.q();
    let m = q.iter().sum::<f64>() / q.len() as f64;
    q.iter().map(|v| (v - m).powi(2)).sum::<f64>() > 1e-6
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fe_matches_lsdv(gp in panel_strategy()) {
        let fe = estimate_fixed_effects(&gp).unwrap();
        prop_assert!((fe.slope.estimate - common::lsdv_slope(&gp)).abs() <= 1e-8);
    }

    #[test]
    fn slope_t_invariant_to_rescaling_q(gp in panel_strategy(), c in 0.01..100.0f64) {
        prop_assume!(has_q_variation(&gp));
        let scaled = gp.map_values(|r| (r.q * c, r.p));
        for m in [Method::Ols, Method::FixedEffects, Method::RandomEffects] {
            let a = estimate(&gp, m, DpdOptions::default()).unwrap();
            let b = estimate(&scaled, m, DpdOptions::default()).unwrap();
            prop_assert!(rel(b.slope.t_statistic, a.slope.t_statistic) <= 1e-9, "{:?}", m);
            prop_assert!(rel(b.slope.estimate * c, a.slope.estimate) <= 1e-9, "{:?}", m);
        }
    }

    #[test]
    fn fe_slope_ignores_entity_level_shift_in_q(gp in panel_strategy(), shift in -100.0..100.0f64) {
        let first = gp.entities()[0].clone();
        let shifted = gp.map_values(|r| (if r.entity == first { r.q + shift } else { r.q }, r.p));
        let a = estimate_fixed_effects(&gp).unwrap();
        let b = estimate_fixed_effects(&shifted).unwrap();
        prop_assert!(rel(b.slope.estimate, a.slope.estimate) <= 1e-9);
    }

    #[test]
    fn identity_data_gives_unit_slope(gp in panel_strategy()) {
        prop_assume!(has_q_variation(&gp));
        let exact = gp.map_values(|r| (r.q, r.q));
        for m in [Method::Ols, Method::FixedEffects, Method::RandomEffects] {
            let r = estimate(&exact, m, DpdOptions::default()).unwrap();
            prop_assert!((r.slope.estimate - 1.0).abs() <= 1e-10, "{:?}", m);
            prop_assert!(r.intercept.estimate.abs() <= 1e-10, "{:?}", m);
        }
    }

    #[test]
    fn fe_vs_ols_f_invariant_to_shifting_p(gp in panel_strategy(), k in -5.0..5.0f64) {
        let shifted = gp.map_values(|r| (r.q, r.p + k));
        let f = |g: &GrowthPanel| {
            test_fe_vs_ols(&estimate_fixed_effects(g).unwrap(), &estimate_ols(g).unwrap()).unwrap().statistic
        };
        prop_assert!(rel(f(&shifted), f(&gp)) <= 1e-7);
    }

    #[test]
    fn every_p_value_is_reproducible(gp in panel_strategy()) {
        let ols = estimate_ols(&gp).unwrap();
        let fe = estimate_fixed_effects(&gp).unwrap();
        let re = estimate_random_effects(&gp).unwrap();
        let tests = [
            ols.model_test.clone(),
            fe.model_test.clone(),
            re.model_test.clone(),
            test_fe_vs_ols(&fe, &ols).unwrap(),
            test_re_vs_ols(&gp, &ols).unwrap(),
            test_hausman(&fe, &re).unwrap(),
        ];
        for t in &tests {
            prop_assert!((0.0..=1.0).contains(&t.p_value));
            prop_assert!((t.recompute_p_value().unwrap() - t.p_value).abs() <= 1e-9, "{}", t.name);
            prop_assert_eq!(t.significant_5pct, t.p_value < 0.05);
        }
    }
}

#[test]
fn re_lies_between_ols_and_fe_on_balanced_panels() {
    let mut checked = 0;
    for r in 0..300 {
        let spec = DgpSpec { entity_effect_sd: 0.02, seed: replication_seed(77, r), ..DgpSpec::default() };
        let gp = generate_panel(&spec).unwrap();
        let re = estimate_random_effects(&gp).unwrap();
        if re.variance_components.as_ref().unwrap().sigma_u2 <= 0.0 {
            continue;
        }
        let ols = estimate_ols(&gp).unwrap().slope.estimate;
        let fe = estimate_fixed_effects(&gp).unwrap().slope.estimate;
        let (lo, hi) = (ols.min(fe), ols.max(fe));
        let b = re.slope.estimate;
        assert!(b >= lo - 1e-12 && b <= hi + 1e-12, "draw {r}: RE {b} outside [{lo}, {hi}]");
        checked += 1;
        if checked == 100 {
            break;
        }
    }
    assert_eq!(checked, 100);
}

#[test]
fn re_approaches_fe_with_huge_effects() {
    for r in 0..20 {
        let spec = DgpSpec { entity_effect_sd: 0.0, seed: replication_seed(78, r), ..DgpSpec::default() };
        let gp = generate_panel(&spec).unwrap();
        let gp = gp.map_values(|row| {
            let i: f64 = row.entity[1..].parse().unwrap();
            (row.q, row.p + 1000.0 * (i - 4.0))
        });
        let re = estimate_random_effects(&gp).unwrap().slope.estimate;
        let fe = estimate_fixed_effects(&gp).unwrap().slope.estimate;
        assert!((re - fe).abs() <= 1e-3, "draw {r}: RE {re} vs FE {fe}");
    }
}

#[test]
fn residual_correlation_under_independence_follows_its_null() {
    // With effects independent of q̄ᵢ and N = 7, the entity-level correlation
    // behaves like a sample r from n = 7 pairs: r·√5/√(1−r²) ~ t(5).
    let t = 0.5 * 5f64.sqrt() / 0.75f64.sqrt();
    let exact = 2.0 * cdf_student_t(t, 5.0).unwrap() - 1.0;
    let draws = 2000;
    let mut inside = 0;
    for r in 0..draws {
        let spec = DgpSpec { entity_effect_sd: 0.05 / 3f64.sqrt(), seed: replication_seed(79, r), ..DgpSpec::default() };
        let gp = generate_panel(&spec).unwrap();
        let fe = estimate_fixed_effects(&gp).unwrap();
        let c = corr_effects_regressors(&fe, &gp).unwrap().unwrap();
        assert!((-1.0..=1.0).contains(&c));
        inside += usize::from(c.abs() < 0.5);
    }
    let frac = inside as f64 / draws as f64;
    assert!((frac - exact).abs() <= 0.03, "P(|corr| < 0.5) = {frac}, null {exact}");
}

#[test]
fn correlation_is_one_for_proportional_effects() {
    let spec = DgpSpec { entity_effect_sd: 0.0, noise_sd: 0.0, endogeneity: 0.8, ..DgpSpec::default() };
    let gp = generate_panel(&spec).unwrap();
    let fe = estimate_fixed_effects(&gp).unwrap();
    let c = corr_effects_regressors(&fe, &gp).unwrap().unwrap();
    assert!((c - 1.0).abs() < 1e-9, "corr {c}");
}

#[test]
fn hausman_median_falls_with_noise() {
    let median = |noise: f64| {
        let mut h: Vec<f64> = (0..200)
            .map(|r| {
                let spec = DgpSpec {
                    n_entities: 50,
                    endogeneity: 0.5,
                    entity_effect_sd: 0.0,
                    noise_sd: noise,
                    seed: replication_seed(80, r),
                    ..DgpSpec::default()
                };
                let gp = generate_panel(&spec).unwrap();
                test_hausman(&estimate_fixed_effects(&gp).unwrap(), &estimate_random_effects(&gp).unwrap())
                    .unwrap()
                    .statistic
            })
            .collect();
        h.sort_by(f64::total_cmp);
        (h[99] + h[100]) / 2.0
    };
    let (base, noisy) = (median(0.02), median(0.2));
    assert!(noisy <= base, "median H {noisy} at 10x noise vs {base}");
}

#[test]
fn lm_rejects_clustered_residuals() {
    let s = verdoorn::run_study(
        &DgpSpec { entity_effect_sd: 0.1, seed: 81, ..DgpSpec::default() },
        StudyTarget::parse("lm_re_ols").unwrap(),
        500,
    )
    .unwrap();
    assert!(s.rejection_rate >= 0.99, "{}", s.rejection_rate);
}

#[test]
fn large_injected_effects_give_tiny_f_p_values() {
    let gp = generate_panel(&DgpSpec { entity_effect_sd: 0.0, seed: 82, ..DgpSpec::default() }).unwrap();
    let gp = gp.map_values(|row| {
        let i: usize = row.entity[1..].parse().unwrap();
        (row.q, row.p + if i.is_multiple_of(2) { 0.2 } else { -0.2 })
    });
    let t = test_fe_vs_ols(&estimate_fixed_effects(&gp).unwrap(), &estimate_ols(&gp).unwrap()).unwrap();
    assert!(t.p_value < 0.001, "p = {}", t.p_value);
}

#[test]
fn short_window_dpd_row_has_counts_but_no_r_squared() {
    // Five level years give four growth periods.
    let gp = generate_panel(&DgpSpec { n_periods: 4, ..DgpSpec::default() }).unwrap();
    let block = fit_block("Metal industry", &gp, &[Method::DynamicPanel], DpdOptions::default());
    let cells = fit_row_cells(&block.rows[0]);
    assert_eq!(cells[7], NOT_APPLICABLE);
    assert_eq!(cells[8], "14");
    assert_eq!(cells[9], "5");
}
