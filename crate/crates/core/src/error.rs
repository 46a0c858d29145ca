//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix not symmetric: max asymmetry {asymmetry:.3e} exceeds tolerance {tol:.1e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("linear system is singular or ill-conditioned: condition estimate {cond:.3e} exceeds 1e12")]
    IllConditioned { cond: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model file error: {0}")]
    Parse(String),

    #[error("Gaussian moment order {order} exceeds supported maximum {max}")]
    MomentOrder { order: u32, max: u32 },

    #[error("covariance dynamics not asymptotically stable; rho = {rho}")]
    Unstable { rho: f64 },

    #[error("synthesis infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
