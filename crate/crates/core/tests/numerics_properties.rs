mod common;

use proptest::prelude::*;
use verdoorn::numerics::{
    cdf_chi_squared, cdf_f, cdf_normal, cdf_student_t, quantile_normal, solve_least_squares, Matrix,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn residuals_are_orthogonal_to_columns(
        data in prop::collection::vec(-10.0..10.0f64, 150),
        y in prop::collection::vec(-100.0..100.0f64, 50),
    ) {
        let x = Matrix::new(50, 3, data.clone()).unwrap();
        let fit = solve_least_squares(&x, &y).unwrap();
        let norm_y = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..3 {
            let dot: f64 = (0..50).map(|i| x[(i, j)] * fit.residuals[i]).sum();
            prop_assert!(dot.abs() <= 1e-8 * norm_y, "column {j}: {dot}");
        }
        let rows: Vec<Vec<f64>> = data.chunks(3).map(<[f64]>::to_vec).collect();
        let oracle = common::normal_equations(&rows, &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn cdfs_are_monotone(df in 0.5..200.0f64, df2 in 0.5..200.0f64, start in -20.0..0.0f64) {
        let grid: Vec<f64> = (0..1000).map(|i| start + f64::from(i) * 0.04).collect();
        let mut prev = [0.0f64; 4];
        for &x in &grid {
            let cur = [
                cdf_normal(x),
                cdf_student_t(x, df).unwrap(),
                cdf_chi_squared(x.max(0.0), df).unwrap(),
                cdf_f(x.max(0.0), df, df2).unwrap(),
            ];
            for k in 0..4 {
                prop_assert!(cur[k] >= prev[k], "cdf {k} decreased at {x}");
                prop_assert!((0.0..=1.0).contains(&cur[k]));
            }
            prev = cur;
        }
    }

    #[test]
    fn quantile_round_trip(p in 1e-12..0.999_999f64) {
        let x = quantile_normal(p).unwrap();
        prop_assert!(((cdf_normal(x) - p) / p.min(1.0 - p)).abs() <= 1e-9);
    }
}

#[test]
fn named_anchors() {
    assert_eq!(cdf_normal(0.0), 0.5);
    assert!((quantile_normal(0.975).unwrap() - 1.959964).abs() < 1e-5);
    assert!((cdf_normal(quantile_normal(0.3).unwrap()) - 0.3).abs() < 1e-9);
    assert_eq!(cdf_chi_squared(0.0, 3.0).unwrap(), 0.0);
    assert!((cdf_student_t(0.0, 7.0).unwrap() - 0.5).abs() < 1e-15);
    assert!((cdf_f(1.0, 10.0, 10.0).unwrap() - 0.5).abs() < 1e-12);
}
