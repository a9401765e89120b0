#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use verdoorn::{DgpSpec, GrowthPanel, GrowthRow};

/// Dense Gaussian elimination with partial pivoting. Kept deliberately
/// separate from the library's QR path so it can serve as an oracle.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col].abs() > 1e-300, "singular system");
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            #[allow(clippy::needless_range_loop)]
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least squares through the normal equations.
pub fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = rows[0].len();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            xty[i] += r[i] * yi;
            for j in 0..k {
                xtx[i][j] += r[i] * r[j];
            }
        }
    }
    gauss_solve(xtx, xty)
}

/// Slope of the least-squares-dummy-variable regression of p on q and one
/// dummy per entity.
pub fn lsdv_slope(gp: &GrowthPanel) -> f64 {
    let n_ent = gp.entity_count();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (i, g) in gp.groups().iter().enumerate() {
        for r in &gp.rows()[g.clone()] {
            let mut x = vec![0.0; n_ent + 1];
            x[0] = r.q;
            x[i + 1] = 1.0;
            rows.push(x);
            y.push(r.p);
        }
    }
    normal_equations(&rows, &y)[0]
}

/// Random unbalanced panel: 2..=max_n entities, 2..=max_t consecutive
/// periods each, with a random start.
pub fn random_unbalanced_panel(seed: u64, max_n: usize, max_t: usize) -> GrowthPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let qd = Normal::new(0.02, 0.05).unwrap();
    let n = rng.random_range(2..=max_n);
    let mut rows = Vec::new();
    for i in 0..n {
        let t_len = rng.random_range(2..=max_t);
        let start: i64 = rng.random_range(1..=5);
        let effect = rng.random_range(-0.1..0.1);
        for t in 0..t_len {
            let q = qd.sample(&mut rng);
            rows.push(GrowthRow {
                entity: format!("R{i}"),
                period: start + t as i64,
                q,
                p: 0.01 + 0.7 * q + effect + noise.sample(&mut rng),
            });
        }
    }
    GrowthPanel::from_rows(rows).unwrap()
}

/// Writes a level CSV (region, year, industry, output, employment) whose
/// growth rates follow the given DGPs, one industry per spec.
pub fn write_levels_csv(path: &Path, industries: &[(&str, DgpSpec)]) {
    let mut f = std::fs::File::create(path).unwrap();
    writeln!(f, "region,year,industry,output,employment").unwrap();
    for (name, spec) in industries {
        let gp = verdoorn::generate_panel(spec).unwrap();
        for g in gp.groups() {
            let rows = &gp.rows()[g.clone()];
            let (mut y, mut prod) = (100.0_f64, 2.0_f64);
            writeln!(f, "{},{},{},{},{}", rows[0].entity, 1985, name, y, y / prod).unwrap();
            for r in rows {
                y *= r.q.exp();
                prod *= r.p.exp();
                writeln!(f, "{},{},{},{},{}", r.entity, 1985 + r.period, name, y, y / prod).unwrap();
            }
        }
    }
}
