use std::ops::{Index, IndexMut};

use super::NumericsError;

/// Relative magnitude below which an R diagonal (or eigenvalue) counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Row-major dense matrix holding only finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite(pos));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NumericsError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[f64]) -> Result<Self, NumericsError> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Self, NumericsError> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, NumericsError> {
        if v.len() != self.cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    /// Element-wise sum.
    pub fn add(&self, other: &Matrix) -> Result<Self, NumericsError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumericsError::DimensionMismatch("matrix sum".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Replaces the matrix by (A + Aᵀ)/2.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in 0..i {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }

    /// Gauss-Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Self, NumericsError> {
        if self.rows != self.cols {
            return Err(NumericsError::DimensionMismatch("inverse of non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(NumericsError::Singular);
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
                .unwrap_or(col);
            if a[(pivot, col)].abs() <= RANK_TOLERANCE * scale {
                return Err(NumericsError::Singular);
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= d;
                inv[(col, j)] /= d;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[(i, col)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[(i, j)] -= f * a[(col, j)];
                    inv[(i, j)] -= f * inv[(col, j)];
                }
            }
        }
        Ok(inv)
    }

    /// Moore-Penrose inverse of a symmetric matrix via a Jacobi
    /// eigendecomposition. Eigenvalues below `RANK_TOLERANCE` times the
    /// largest one are dropped. Returns the inverse and the retained rank.
    pub fn pseudo_inverse_symmetric(&self) -> Result<(Self, usize), NumericsError> {
        if !self.is_symmetric(1e-8 * (1.0 + self.max_abs())) {
            return Err(NumericsError::DimensionMismatch(
                "pseudo-inverse requires a symmetric matrix".into(),
            ));
        }
        let n = self.rows;
        let (values, vectors) = jacobi_eigen(self);
        let top = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut out = Self::zeros(n, n);
        let mut rank = 0;
        for (k, &lambda) in values.iter().enumerate() {
            if top == 0.0 || lambda.abs() <= RANK_TOLERANCE * top {
                continue;
            }
            rank += 1;
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += vectors[(i, k)] * vectors[(j, k)] / lambda;
                }
            }
        }
        out.symmetrize();
        Ok((out, rank))
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cyclic Jacobi rotations; returns eigenvalues and eigenvectors (as columns).
fn jacobi_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.rows;
    let mut a = m.clone();
    a.symmetrize();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Output of an ordinary least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub residual_sum_squares: f64,
    /// (XᵀX)⁻¹, assembled from the triangular factor as R⁻¹R⁻ᵀ.
    pub xtx_inverse: Matrix,
    pub rank: usize,
}

/// Minimizes ‖y − Xβ‖² through a Householder QR factorization of X.
pub fn solve_least_squares(x: &Matrix, y: &[f64]) -> Result<LeastSquaresFit, NumericsError> {
    let (n, k) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "response has {} entries, design has {n} rows",
            y.len()
        )));
    }
    if n < k || k == 0 {
        return Err(NumericsError::DimensionMismatch(format!(
            "design is {n}x{k}; need at least as many rows as columns"
        )));
    }
    if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite(pos));
    }

    // Column-major working copy; Householder vectors overwrite the lower part.
    let mut a: Vec<Vec<f64>> = (0..k).map(|c| x.column(c)).collect();
    let mut qty = y.to_vec();
    let mut r_diag = vec![0.0; k];

    for j in 0..k {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            r_diag[j] = 0.0;
            continue;
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        r_diag[j] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(j) {
            let s = 2.0 * dot(&v, &col[j..]) / vnorm2;
            for (ci, vi) in col[j..].iter_mut().zip(&v) {
                *ci -= s * vi;
            }
        }
        let s = 2.0 * dot(&v, &qty[j..]) / vnorm2;
        for (qi, vi) in qty[j..].iter_mut().zip(&v) {
            *qi -= s * vi;
        }
    }

    let largest = r_diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rank = r_diag
        .iter()
        .filter(|d| largest > 0.0 && d.abs() > RANK_TOLERANCE * largest)
        .count();
    if rank < k {
        return Err(NumericsError::RankDeficient { rank, columns: k });
    }

    // R stored column-wise: R[i][j] = a[j][i] for i <= j.
    let r = |i: usize, j: usize| a[j][i];

    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r(i, j) * beta[j]).sum();
        beta[i] = (qty[i] - s) / r(i, i);
    }

    // R⁻¹ by back substitution, then (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ.
    let mut rinv = Matrix::zeros(k, k);
    for col in 0..k {
        for i in (0..=col).rev() {
            let rhs = if i == col { 1.0 } else { 0.0 };
            let s: f64 = (i + 1..=col).map(|j| r(i, j) * rinv[(j, col)]).sum();
            rinv[(i, col)] = (rhs - s) / r(i, i);
        }
    }
    let mut xtx_inverse = rinv.matmul(&rinv.transpose())?;
    xtx_inverse.symmetrize();

    let fitted = x.matvec(&beta)?;
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let residual_sum_squares = dot(&residuals, &residuals);

    Ok(LeastSquaresFit { coefficients: beta, residuals, residual_sum_squares, xtx_inverse, rank })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn exact_line() {
        let x = design(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]);
        let fit = solve_least_squares(&x, &[0.0, 1.0, 2.0]).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-14);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-14);
        assert!(fit.residual_sum_squares < 1e-28);
        assert_eq!(fit.rank, 2);
    }

    #[test]
    fn constant_response() {
        let x = design(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]);
        let fit = solve_least_squares(&x, &[1.0, 1.0, 1.0]).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-14);
        assert!(fit.coefficients[1].abs() < 1e-14);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let x = design(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]);
        let err = solve_least_squares(&x, &[1.0, 2.0, 3.0]).unwrap_err();
        assert_eq!(err, NumericsError::RankDeficient { rank: 1, columns: 2 });
    }

    #[test]
    fn rejects_wide_design_and_bad_lengths() {
        let x = Matrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(solve_least_squares(&x, &[1.0]).is_err());
        let x = design(&[[1.0, 0.0], [1.0, 1.0]]);
        assert!(solve_least_squares(&x, &[1.0]).is_err());
    }

    #[test]
    fn matrix_rejects_non_finite() {
        assert_eq!(Matrix::new(1, 2, vec![1.0, f64::NAN]), Err(NumericsError::NonFinite(1)));
        assert!(Matrix::new(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let m = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]])
            .unwrap();
        let prod = m.matmul(&m.inverse().unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - e).abs() < 1e-12);
            }
        }
        assert_eq!(Matrix::zeros(2, 2).inverse(), Err(NumericsError::Singular));
    }

    #[test]
    fn pseudo_inverse_of_singular_projection() {
        // Rank-one matrix vvᵀ with v = (1, 2): pinv = vvᵀ / ‖v‖⁴.
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let (p, rank) = m.pseudo_inverse_symmetric().unwrap();
        assert_eq!(rank, 1);
        for (i, j, e) in [(0, 0, 1.0), (0, 1, 2.0), (1, 1, 4.0)] {
            assert!((p[(i, j)] - e / 25.0).abs() < 1e-12);
        }
        // On a full-rank matrix it agrees with the ordinary inverse.
        let m = Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let (p, rank) = m.pseudo_inverse_symmetric().unwrap();
        let inv = m.inverse().unwrap();
        assert_eq!(rank, 2);
        for k in 0..4 {
            assert!((p.as_slice()[k] - inv.as_slice()[k]).abs() < 1e-12);
        }
    }
}
