//! Dense linear algebra and probability kernels.
//!
//! Everything here is a pure function over immutable inputs. Least squares
//! goes through a Householder QR factorization, never through the normal
//! equations, and the distribution functions are evaluated from regularized
//! incomplete gamma and beta functions.

mod dist;
mod linalg;

pub use dist::{
    cdf_chi_squared, cdf_f, cdf_normal, cdf_student_t, ln_gamma, quantile_normal,
    regularized_beta, regularized_gamma_p, regularized_gamma_q, sf_chi_squared, sf_f,
    sf_normal, sf_student_t,
};
pub use linalg::{solve_least_squares, LeastSquaresFit, Matrix, RANK_TOLERANCE};

use thiserror::Error;

/// Failures raised by the numeric kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("rank-deficient design: rank {rank} of {columns} columns")]
    RankDeficient { rank: usize, columns: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("domain error: {0}")]
    Domain(String),
}
