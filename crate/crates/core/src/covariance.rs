//! Exact error-covariance recursion in both equivalent forms, the stability
//! test on the transition matrix M(K), and the closed-form steady state.

use crate::error::{Error, Result};
use crate::matops::{self, kron, unvec, vec_mat, Matrix, Vector};
use crate::model::SystemModel;
use crate::moments::CpMatrix;

/// Pre-stabilizing feedback gain (u_k = K e_k + v_k).
#[derive(Debug, Clone)]
pub struct GainK {
    pub k: Matrix,
}

impl GainK {
    pub fn new(k: Matrix) -> Result<Self> {
        matops::check_finite(&k, "gain K")?;
        Ok(Self { k })
    }
}

/// Nominal input policy for the deterministic component
/// z_{k+1} = A0 z_k + B v_k.
#[derive(Debug, Clone)]
pub enum NominalPolicy {
    /// v_k = K z_k (the default).
    Feedback,
    /// User-supplied v_0 .. v_{T-1}.
    Sequence(Vec<Vector>),
}

/// Time-indexed covariance trajectory plus the deterministic component.
#[derive(Debug, Clone)]
pub struct CovarianceTrajectory {
    pub horizon: usize,
    /// cov(e_k) for k = 0..=horizon.
    pub cov_seq: Vec<Matrix>,
    /// z_k for k = 0..=horizon.
    pub z_seq: Vec<Vector>,
    /// Vectorized form, when requested.
    pub eps_seq: Option<Vec<Vector>>,
}

fn closed_loop(model: &SystemModel, gain: &GainK) -> Result<Matrix> {
    if gain.k.nrows() != model.m() || gain.k.ncols() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("gain of shape {}x{}", model.m(), model.n()),
            got: format!("{}x{}", gain.k.nrows(), gain.k.ncols()),
        });
    }
    Ok(&model.a0 + &model.b * &gain.k)
}

fn check_cp(model: &SystemModel, cp: &CpMatrix) -> Result<()> {
    let nn = model.n() * model.n();
    if cp.value.nrows() != nn || cp.value.ncols() != nn {
        return Err(Error::DimensionMismatch {
            expected: format!("C_p of shape {nn}x{nn}"),
            got: format!("{}x{}", cp.value.nrows(), cp.value.ncols()),
        });
    }
    Ok(())
}

/// The covariance-dynamics transition matrix
/// M(K) = (A0 + BK) (x) (A0 + BK) + C_p.
pub fn build_m(model: &SystemModel, gain: &GainK, cp: &CpMatrix) -> Result<Matrix> {
    check_cp(model, cp)?;
    let ak = closed_loop(model, gain)?;
    Ok(kron(&ak, &ak) + &cp.value)
}

/// One covariance step in matrix form:
/// cov(e_{k+1}) = A_K cov(e_k) A_K^T + W + unvec(C_p vec(cov(e_k) + z z^T)).
///
/// The result is symmetrized as (S + S^T)/2; pre-symmetrization asymmetry
/// beyond 1e-9 is rejected.
pub fn step_matrix_form(
    model: &SystemModel,
    gain: &GainK,
    cp: &CpMatrix,
    cov_e: &Matrix,
    z: &Vector,
) -> Result<Matrix> {
    check_cp(model, cp)?;
    let n = model.n();
    if cov_e.nrows() != n || cov_e.ncols() != n || z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{n} covariance and length-{n} z"),
            got: format!("{}x{} and length {}", cov_e.nrows(), cov_e.ncols(), z.len()),
        });
    }
    let ak = closed_loop(model, gain)?;
    let second_moment = cov_e + z * z.transpose();
    let parametric = unvec(&(&cp.value * vec_mat(&second_moment)), n, n)?;
    let next = &ak * cov_e * ak.transpose() + &model.w + parametric;
    let asym = (&next - next.transpose()).amax();
    if asym > 1e-9 {
        return Err(Error::Numerical(format!(
            "propagated covariance lost symmetry (asymmetry {asym:.3e})"
        )));
    }
    Ok((&next + next.transpose()) * 0.5)
}

/// One covariance step in vectorized form:
/// eps_{k+1} = M(K) eps_k + C_p zeta_k + vec(W).
pub fn step_vec_form(
    model: &SystemModel,
    gain: &GainK,
    cp: &CpMatrix,
    eps: &Vector,
    zeta: &Vector,
) -> Result<Vector> {
    check_cp(model, cp)?;
    let nn = model.n() * model.n();
    if eps.len() != nn || zeta.len() != nn {
        return Err(Error::DimensionMismatch {
            expected: format!("vectors of length {nn}"),
            got: format!("{} and {}", eps.len(), zeta.len()),
        });
    }
    let m = build_m(model, gain, cp)?;
    Ok(m * eps + &cp.value * zeta + vec_mat(&model.w))
}

/// Propagate the covariance recursion from cov(e_0) = 0 over the horizon.
/// When `with_eps` is set, the vectorized form is propagated alongside and
/// cross-asserted against the matrix form at 1e-9.
pub fn propagate(
    model: &SystemModel,
    gain: &GainK,
    cp: &CpMatrix,
    z0: &Vector,
    horizon: usize,
    policy: &NominalPolicy,
    with_eps: bool,
) -> Result<CovarianceTrajectory> {
    check_cp(model, cp)?;
    let n = model.n();
    if z0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("z0 of length {n}"),
            got: format!("length {}", z0.len()),
        });
    }
    if let NominalPolicy::Sequence(vs) = policy {
        if vs.len() < horizon {
            return Err(Error::InvalidModel(format!(
                "nominal input sequence has {} entries, horizon requires {horizon}",
                vs.len()
            )));
        }
    }
    let mut cov_seq = Vec::with_capacity(horizon + 1);
    let mut z_seq = Vec::with_capacity(horizon + 1);
    let mut eps_seq = if with_eps {
        Some(Vec::with_capacity(horizon + 1))
    } else {
        None
    };
    let mut cov = Matrix::zeros(n, n);
    let mut z = z0.clone();
    let mut eps = Vector::zeros(n * n);
    cov_seq.push(cov.clone());
    z_seq.push(z.clone());
    if let Some(seq) = eps_seq.as_mut() {
        seq.push(eps.clone());
    }
    for k in 0..horizon {
        let v = match policy {
            NominalPolicy::Feedback => &gain.k * &z,
            NominalPolicy::Sequence(vs) => vs[k].clone(),
        };
        let next_cov = step_matrix_form(model, gain, cp, &cov, &z)?;
        if with_eps {
            let zeta = vec_mat(&(&z * z.transpose()));
            eps = step_vec_form(model, gain, cp, &eps, &zeta)?;
            let dev = (&eps - vec_mat(&next_cov)).amax();
            if dev > 1e-9 {
                return Err(Error::Numerical(format!(
                    "matrix and vectorized covariance forms diverged at step {k} (dev {dev:.3e})"
                )));
            }
        }
        z = &model.a0 * &z + &model.b * v;
        cov = next_cov;
        cov_seq.push(cov.clone());
        z_seq.push(z.clone());
        if let Some(seq) = eps_seq.as_mut() {
            seq.push(eps.clone());
        }
    }
    Ok(CovarianceTrajectory {
        horizon,
        cov_seq,
        z_seq,
        eps_seq,
    })
}

/// Closed-form limit unvec((I - M(K))^{-1} vec(W)). Requires rho(M(K)) < 1.
pub fn steady_state(model: &SystemModel, gain: &GainK, cp: &CpMatrix) -> Result<Matrix> {
    let m = build_m(model, gain, cp)?;
    let rho = matops::spectral_radius(&m)?;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let n = model.n();
    let nn = n * n;
    let lhs = Matrix::identity(nn, nn) - m;
    let x = matops::solve_linear(&lhs, &vec_mat(&model.w))?;
    let ss = unvec(&x, n, n)?;
    Ok((&ss + ss.transpose()) * 0.5)
}

/// Stability diagnostics for M(K) and the bound chain
/// rho(M(K)) <= sigma_max(A_K (x) A_K) + sigma_max(C_p).
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub rho: f64,
    pub sigma_kron: f64,
    pub sigma_cp: f64,
    pub bound: f64,
}

pub fn stability_report(
    model: &SystemModel,
    gain: &GainK,
    cp: &CpMatrix,
) -> Result<StabilityReport> {
    let ak = closed_loop(model, gain)?;
    let akk = kron(&ak, &ak);
    let m = &akk + &cp.value;
    let rho = matops::spectral_radius(&m)?;
    let sigma_kron = matops::sigma_max(&akk);
    let sigma_cp = matops::sigma_max(&cp.value);
    Ok(StabilityReport {
        rho,
        sigma_kron,
        sigma_cp,
        bound: sigma_kron + sigma_cp,
    })
}
