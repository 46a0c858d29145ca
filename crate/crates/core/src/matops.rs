//! Dense linear-algebra kernel: Kronecker products, vectorization, spectral
//! quantities and PSD checks.
//!
//! The vectorization convention is column-stacking: entry `(i, j)` of an
//! `r x c` matrix lands at position `j * r + i` of `vec`. This is the
//! convention under which `vec(ABC) = (C^T (x) A) vec(B)` holds with the
//! standard Kronecker indexing, and the whole crate depends on it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Symmetry rejection tolerance for symmetric factorizations.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Largest dimension for which the dense eigensolver is used; above this,
/// the warmed-up Krylov projection takes over. Kept well below the point
/// where a cycling QR iteration (see [`schur_radius`]) gets expensive.
const DENSE_EIG_LIMIT: usize = 150;

/// Power warm-up steps before the Krylov projection.
const POWER_WARMUP: usize = 200;
/// Krylov subspace dimension for the large-matrix spectral radius.
const KRYLOV_DIM: usize = 80;

pub fn check_finite(a: &Matrix, context: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
        })
    }
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec_mat(a: &Matrix) -> Vector {
    // nalgebra stores column-major, so the raw slice already is vec(a).
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec_mat`].
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: format!("vector of length {}", rows * cols),
            got: format!("length {}", v.len()),
        });
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Spectral radius: max modulus over all (possibly complex) eigenvalues.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    check_finite(a, "spectral_radius input")?;
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    if a.nrows() <= DENSE_EIG_LIMIT {
        Ok(schur_radius(a).unwrap_or_else(|| power_iteration_radius(a)))
    } else {
        Ok(power_iteration_radius(a))
    }
}

/// Deterministic noise matrix with entries uniform in [-1, 1).
fn splitmix_noise(rows: usize, cols: usize, mut state: u64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        2.0 * ((z ^ (z >> 31)) as f64 / u64::MAX as f64 - 0.5)
    })
}

/// Max eigenvalue modulus via the QR/Schur iteration, bounded.
///
/// nalgebra's Francis iteration has no exceptional shift and can cycle
/// forever on exactly structured inputs (e.g. permutation-like sparsity), so
/// it is capped; on a first failure the iteration is retried on the input
/// plus a tiny deterministic perturbation, which breaks the cycle while
/// moving the eigenvalues by a negligible amount.
fn schur_radius(a: &Matrix) -> Option<f64> {
    let cap = 30 * a.nrows().max(10);
    let max_modulus = |s: nalgebra::linalg::Schur<f64, nalgebra::Dyn>| {
        s.complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    };
    if let Some(schur) = a.clone().try_schur(f64::EPSILON, cap) {
        return Some(max_modulus(schur));
    }
    let scale = a.amax();
    if scale == 0.0 {
        return Some(0.0);
    }
    let perturbed = a + splitmix_noise(a.nrows(), a.ncols(), 0x5ca1ab1e) * (1e-12 * scale);
    perturbed.try_schur(f64::EPSILON, cap).map(max_modulus)
}

/// Generalized power iteration for the spectral radius: a power warm-up to
/// bias the start toward the dominant invariant subspace, then an Arnoldi
/// projection whose small Hessenberg factor yields the dominant modulus.
/// Plain power iteration stalls when the dominant eigenvalues are clustered
/// or form a complex pair; the Krylov projection resolves both.
fn power_iteration_radius(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut state = 0x9e3779b97f4a7c15_u64;
    let mut v = DVector::from_fn(n, |_, _| {
        // splitmix64 step, deterministic starting vector
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        (z ^ (z >> 31)) as f64 / u64::MAX as f64 - 0.5
    });
    let mut norm = v.norm();
    if norm == 0.0 {
        v[0] = 1.0;
        norm = 1.0;
    }
    v /= norm;
    for _ in 0..POWER_WARMUP {
        let w = a * &v;
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
    }

    // Arnoldi: basis q, (m+1) x m Hessenberg h with a^T q_k expanded on it.
    let m = KRYLOV_DIM.min(n);
    let mut q: Vec<Vector> = vec![v];
    let mut h = Matrix::zeros(m + 1, m);
    let mut k_eff = m;
    for k in 0..m {
        let mut w = a * &q[k];
        // Modified Gram-Schmidt with one re-orthogonalization pass.
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dot(&w);
                h[(i, k)] += c;
                w -= qi * c;
            }
        }
        let wn = w.norm();
        h[(k + 1, k)] = wn;
        if wn <= 1e-13 * h[(k, k)].abs().max(1.0) {
            // Invariant subspace found; the projection is exact.
            k_eff = k + 1;
            break;
        }
        q.push(w / wn);
    }
    let hm = h.view((0, 0), (k_eff, k_eff)).into_owned();
    // On the rare double failure the norm is kept as a loose upper bound
    // rather than panicking.
    schur_radius(&hm).unwrap_or_else(|| sigma_max(&hm))
}

/// Largest singular value.
pub fn sigma_max(a: &Matrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

fn asymmetry(a: &Matrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of a (nearly) symmetric matrix. Inputs further than
/// [`SYMMETRY_TOL`] from symmetric (relative to the matrix scale) are
/// rejected rather than silently symmetrized.
pub fn min_eig_sym(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    check_finite(a, "min_eig_sym input")?;
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
    let asym = asymmetry(a);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tol: SYMMETRY_TOL * scale,
        });
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    Ok(eig.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Solve `a x = b` for square, numerically nonsingular `a`.
pub fn solve_linear(a: &Matrix, b: &Vector) -> Result<Vector> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("rhs of length {}", a.nrows()),
            got: format!("length {}", b.len()),
        });
    }
    check_finite(a, "solve_linear matrix")?;
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let s_min = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::IllConditioned { cond });
    }
    svd.solve(b, 0.0)
        .map_err(|e| Error::Numerical(e.to_string()))
}

/// Symmetric PSD square-root factor `L` with `L L^T = a` (eigenvalue based;
/// small negative eigenvalues are clamped to zero).
pub fn psd_sqrt(a: &Matrix) -> Result<Matrix> {
    let min_eig = min_eig_sym(a)?;
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
    if min_eig < -1e-10 * scale {
        return Err(Error::InvalidModel(format!(
            "matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})"
        )));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut l = eig.eigenvectors.clone();
    for j in 0..l.ncols() {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        for i in 0..l.nrows() {
            l[(i, j)] *= s;
        }
    }
    Ok(l)
}
