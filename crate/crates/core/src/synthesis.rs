//! Gain synthesis: certify the 2n x 2n block condition and minimize the
//! covariance decay rate.
//!
//! The block condition [[beta(alpha) I, A_K^T], [A_K, I]] > 0 with
//! beta(alpha) = alpha - sigma_max(C_p) is, by the Schur complement,
//! equivalent to sigma_max(A0 + BK)^2 < beta(alpha). Minimizing alpha
//! therefore reduces to minimizing t = sigma_max(A0 + BK) over K, a problem
//! with an exact solution: BK can reach exactly the rows of A0 lying in
//! range(B), so the minimum is sigma_max((I - B B^+) A0), attained at
//! K = -B^+ A0.

use serde::{Deserialize, Serialize};

use crate::covariance::{build_m, GainK};
use crate::error::{Error, Result};
use crate::matops::{self, Matrix};
use crate::model::SystemModel;
use crate::moments::CpMatrix;

/// Default optimality/slack tolerance on t = sigma_max(A0 + BK).
pub const DEFAULT_TOL: f64 = 1e-4;

/// Synthesized gain with its certificate.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub gain: GainK,
    /// Certified decay rate, alpha in (0, 1).
    pub alpha: f64,
    /// beta(alpha) = alpha - sigma_max(C_p).
    pub beta: f64,
    /// Min eigenvalue of the 2n x 2n block matrix; positive iff strictly feasible.
    pub lmi_margin: f64,
    /// rho(M(K)), computed a posteriori.
    pub rho: f64,
}

/// Min eigenvalue of the assembled block matrix
/// [[ (alpha - sigma_max(C_p)) I, A_K^T ], [ A_K, I ]].
pub fn verify_lmi(
    model: &SystemModel,
    gain: &GainK,
    alpha: f64,
    cp: &CpMatrix,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidModel(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let n = model.n();
    let ak = &model.a0 + &model.b * &gain.k;
    let beta = alpha - matops::sigma_max(&cp.value);
    let mut block = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        block[(i, i)] = beta;
        block[(n + i, n + i)] = 1.0;
    }
    for i in 0..n {
        for j in 0..n {
            block[(n + i, j)] = ak[(i, j)];
            block[(j, n + i)] = ak[(i, j)];
        }
    }
    matops::min_eig_sym(&block)
}

/// Minimize sigma_max(A0 + BK) over K. Returns the minimizer and the
/// optimal value t*, which is exact (the matching lower bound
/// sigma_max((I - B B^+) A0) is analytic). `tol` only gates input checking;
/// the closed form needs no iteration.
pub fn min_spectral_norm_gain(a0: &Matrix, b: &Matrix, tol: f64) -> Result<(GainK, f64)> {
    if tol <= 0.0 {
        return Err(Error::InvalidModel(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !a0.is_square() {
        return Err(Error::NotSquare {
            rows: a0.nrows(),
            cols: a0.ncols(),
        });
    }
    let n = a0.nrows();
    if b.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("B with {n} rows"),
            got: format!("{} rows", b.nrows()),
        });
    }
    let m = b.ncols();
    matops::check_finite(a0, "A0")?;
    matops::check_finite(b, "B")?;

    let svd = b.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let vt = svd.v_t.as_ref().expect("svd computed with v_t");
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let rank_cut = s_max * (n.max(m) as f64) * f64::EPSILON;

    // K = -B^+ A0 via the rank-r part of the SVD.
    let mut k = Matrix::zeros(m, n);
    // Projector onto range(B): U_r U_r^T.
    let mut proj = Matrix::zeros(n, n);
    for r in 0..svd.singular_values.len() {
        let s = svd.singular_values[r];
        if s <= rank_cut || s == 0.0 {
            continue;
        }
        let ur = u.column(r);
        let vr = vt.row(r).transpose();
        k -= (&vr / s) * (ur.transpose() * a0);
        proj += &ur * ur.transpose();
    }
    let residual = (Matrix::identity(n, n) - proj) * a0;
    let t_star = matops::sigma_max(&residual);

    // Internal consistency: the attained value must match the lower bound.
    let attained = matops::sigma_max(&(a0 + b * &k));
    if (attained - t_star).abs() > 1e-8 * t_star.max(1.0) {
        return Err(Error::Numerical(format!(
            "spectral-norm minimization inconsistent: attained {attained}, bound {t_star}"
        )));
    }
    Ok((GainK::new(k)?, t_star))
}

/// Synthesize the pre-stabilizing gain and the minimized decay rate.
pub fn synthesize_gain(
    model: &SystemModel,
    cp: &CpMatrix,
    tol: f64,
) -> Result<SynthesisResult> {
    let sigma_cp = matops::sigma_max(&cp.value);
    if sigma_cp >= 1.0 {
        return Err(Error::Infeasible(format!(
            "sigma_max(C_p) = {sigma_cp:.4} >= 1: no alpha in (0, 1) can make the \
             block condition hold (its upper-left block requires alpha > sigma_max(C_p)); \
             the sufficient condition cannot certify this model"
        )));
    }
    let (gain, t_star) = min_spectral_norm_gain(&model.a0, &model.b, tol)?;
    // Slack keeps the returned pair strictly feasible.
    let alpha = sigma_cp + t_star * t_star + 10.0 * tol;
    if alpha >= 1.0 {
        return Err(Error::Infeasible(format!(
            "best certifiable decay rate alpha = {alpha:.4} >= 1 \
             (sigma_max(C_p) = {sigma_cp:.4}, min sigma_max(A0+BK) = {t_star:.4}); \
             the sufficient condition cannot certify stability for this model \
             (this does not imply the covariance dynamics are unstable)"
        )));
    }
    let beta = alpha - sigma_cp;
    let lmi_margin = verify_lmi(model, &gain, alpha, cp)?;
    if lmi_margin <= 0.0 {
        return Err(Error::Numerical(format!(
            "internal inconsistency: t* = {t_star}, alpha = {alpha}, but block-matrix \
             margin = {lmi_margin}"
        )));
    }
    let m = build_m(model, &gain, cp)?;
    let rho = matops::spectral_radius(&m)?;
    if rho >= alpha {
        return Err(Error::Numerical(format!(
            "internal inconsistency: certified alpha = {alpha} but rho(M(K)) = {rho}"
        )));
    }
    Ok(SynthesisResult {
        gain,
        alpha,
        beta,
        lmi_margin,
        rho,
    })
}

/// Feasibility check at a fixed alpha, without decay-rate minimization:
/// does some K give sigma_max(A0 + BK)^2 < alpha - sigma_max(C_p)?
pub fn check_feasibility(model: &SystemModel, cp: &CpMatrix, alpha: f64) -> Result<bool> {
    let sigma_cp = matops::sigma_max(&cp.value);
    let (_, t_star) = min_spectral_norm_gain(&model.a0, &model.b, DEFAULT_TOL)?;
    Ok(t_star * t_star < alpha - sigma_cp)
}

// ---------------------------------------------------------------------------
// Gain file schema (JSON, row-major arrays, mirroring the model schema)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GainFile {
    #[serde(rename = "K")]
    k: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lmi_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
}

pub fn gain_to_json(result: &SynthesisResult) -> String {
    let k = &result.gain.k;
    let file = GainFile {
        k: (0..k.nrows())
            .map(|i| (0..k.ncols()).map(|j| k[(i, j)]).collect())
            .collect(),
        alpha: Some(result.alpha),
        beta: Some(result.beta),
        lmi_margin: Some(result.lmi_margin),
        rho: Some(result.rho),
    };
    serde_json::to_string_pretty(&file).expect("gain serialization cannot fail")
}

pub fn parse_gain(text: &str) -> Result<GainK> {
    let file: GainFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.k.is_empty() || file.k.iter().any(|r| r.len() != file.k[0].len()) {
        return Err(Error::Parse("K must be a non-empty rectangular array".into()));
    }
    let rows = file.k.len();
    let cols = file.k[0].len();
    let flat: Vec<f64> = file.k.iter().flat_map(|r| r.iter().copied()).collect();
    GainK::new(Matrix::from_row_slice(rows, cols, &flat))
}

pub fn load_gain(path: &std::path::Path) -> Result<GainK> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_gain(&text)
}
