//! Exact error-covariance analysis for discrete-time linear systems subject
//! to i.i.d. stochastic parametric and additive uncertainties.
//!
//! The state matrix is `A(p_k) = A0 + Abar(p_k)` with `Abar` a zero-mean
//! random matrix whose entries are polynomials in a Gaussian parameter
//! vector. Under the tube decomposition `x_k = z_k + e_k` with
//! `u_k = K e_k + v_k`, the error covariance obeys an exact linear
//! recursion driven by the transition matrix
//! `M(K) = (A0 + BK) (x) (A0 + BK) + C_p`, where
//! `C_p = E[Abar (x) Abar]` collects the second moments of the random
//! entries. The crate propagates that recursion in matrix and vectorized
//! form, computes the closed-form steady state, synthesizes a gain that
//! certifies `rho(M(K)) < alpha` through a 2n x 2n positive-definiteness
//! condition, and validates everything against trajectory-level Monte Carlo
//! simulation.

pub mod benchmark;
pub mod covariance;
pub mod error;
pub mod matops;
pub mod model;
pub mod moments;
pub mod montecarlo;
pub mod rng;
pub mod synthesis;
pub mod testutil;

pub use covariance::{CovarianceTrajectory, GainK, NominalPolicy, StabilityReport};
pub use error::{Error, Result};
pub use matops::{Matrix, Vector};
pub use model::{ParamLaw, PolyTerm, RandomMatrixSpec, SystemModel};
pub use moments::{CpMatrix, Provenance};
pub use montecarlo::{CompareReport, EmpiricalCovTrajectory, SimConfig};
pub use synthesis::SynthesisResult;
