use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use verdoorn::numerics::quantile_normal;
use verdoorn::unit_root::bandwidth_cap;
use verdoorn::*;

fn stat(p: f64) -> EntityUnitRootStat {
    EntityUnitRootStat { entity: String::new(), t_statistic: 0.0, lags_used: 1, p_value: p, clamped: false }
}

fn stats(ps: &[f64]) -> Vec<EntityUnitRootStat> {
    ps.iter().map(|&p| stat(p)).collect()
}

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fisher_statistics_are_monotone(
        ps in prop::collection::vec(0.01..0.98f64, 2..12),
        which in any::<prop::sample::Index>(),
        bump in 0.001..0.01f64,
    ) {
        let i = which.index(ps.len());
        let mut up = ps.clone();
        up[i] += bump;
        let a = fisher_combine(&stats(&ps)).unwrap();
        let b = fisher_combine(&stats(&up)).unwrap();
        prop_assert!(b.inverse_chi_squared.statistic < a.inverse_chi_squared.statistic);
        prop_assert!(b.inverse_normal.statistic > a.inverse_normal.statistic);
        prop_assert!(b.inverse_logit.statistic > a.inverse_logit.statistic);
    }

    #[test]
    fn fisher_ignores_entity_order(ps in prop::collection::vec(0.001..0.999f64, 2..12), rot in 0usize..12) {
        let mut shuffled = ps.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let a = fisher_combine(&stats(&ps)).unwrap();
        let b = fisher_combine(&stats(&shuffled)).unwrap();
        for (x, y) in [
            (&a.inverse_chi_squared, &b.inverse_chi_squared),
            (&a.inverse_normal, &b.inverse_normal),
            (&a.inverse_logit, &b.inverse_logit),
        ] {
            prop_assert!((x.statistic - y.statistic).abs() <= 1e-12 * x.statistic.abs().max(1.0));
        }
    }

    #[test]
    fn common_p_value_gives_closed_form_z(p0 in 0.001..0.999f64, n in 2usize..20) {
        let c = fisher_combine(&stats(&vec![p0; n])).unwrap();
        let want = (n as f64).sqrt() * quantile_normal(p0).unwrap();
        prop_assert!((c.inverse_normal.statistic - want).abs() <= 1e-10);
    }

    #[test]
    fn pp_tau_ignores_level_shifts(seed in any::<u64>(), shift in -1e3..1e3f64, lags in 1usize..5) {
        let mut level = 0.0;
        let y: Vec<f64> = noise(seed, 60).iter().map(|e| { level = 0.5 * level + e; level }).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let a = pp_test_entity("a", &y, lags).unwrap();
        let b = pp_test_entity("a", &shifted, lags).unwrap();
        prop_assert!((a.t_statistic - b.t_statistic).abs() <= 1e-8);
    }

    #[test]
    fn escalation_never_returns_zero(seed in any::<u64>(), len in 0usize..80) {
        prop_assert!(select_lags(&noise(seed, len), LagPolicy::Escalate) >= 1);
        prop_assert_eq!(select_lags(&noise(seed, len), LagPolicy::Fixed(1)), 1);
    }
}

#[test]
fn bandwidth_cap_at_one_hundred_is_four() {
    assert_eq!(bandwidth_cap(100), 4);
    assert_eq!(bandwidth_cap(200), 4);
    assert_eq!(bandwidth_cap(8), 2);
}

#[test]
fn deterministic_ramp_does_not_panic() {
    let ramp: Vec<f64> = (0..50).map(f64::from).collect();
    match pp_test_entity("ramp", &ramp, 2) {
        Err(_) => {}
        Ok(s) => assert!(s.p_value <= 1e-6 || s.clamped, "{s:?}"),
    }
}

#[test]
fn limits_strengthen_rejection() {
    let mut ps = vec![0.5; 7];
    let base = fisher_combine(&stats(&ps)).unwrap();
    ps[3] = 1e-9;
    let low = fisher_combine(&stats(&ps)).unwrap();
    assert!(low.inverse_chi_squared.statistic > base.inverse_chi_squared.statistic + 20.0);
    assert!(low.inverse_normal.statistic < base.inverse_normal.statistic - 1.5);
    assert!(low.clamped);
}

#[test]
fn white_noise_panel_is_stationary_on_every_statistic() {
    let rows: Vec<GrowthRow> = (0..7)
        .flat_map(|i| {
            let e = noise(100 + i, 40);
            let q = noise(200 + i, 40);
            (0..40).map(move |t| GrowthRow { entity: format!("E{i}"), period: t as i64, p: e[t], q: q[t] })
        })
        .collect();
    let gp = GrowthPanel::from_rows(rows).unwrap();
    for v in [Variable::P, Variable::Q] {
        let r = unit_root_report(&gp, v, LagPolicy::Fixed(1)).unwrap();
        let c = r.combination.as_ref().unwrap();
        assert!(c.inverse_chi_squared.significant_5pct);
        assert!(c.inverse_normal.significant_5pct);
        assert!(c.inverse_logit.significant_5pct);
        assert_eq!(r.lag_marker(), 'a');
    }
}
