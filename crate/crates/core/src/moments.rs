//! The second-moment matrix C_p = E[Abar(p) (x) Abar(p)]: analytic assembly
//! via Isserlis' theorem for the zero-mean Gaussian law, and an empirical
//! sampling estimator used as a cross-check.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matops::{self, kron, Matrix, Vector};
use crate::model::{evaluate_abar, SystemModel};

/// Largest supported total moment order (twice the entry degree cap).
pub const MAX_MOMENT_ORDER: u32 = 8;

const SAMPLE_CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Empirical { samples: u64, seed: u64 },
}

/// The n^2 x n^2 matrix of entry second moments, laid out so that position
/// `((i1-1)n + i2, (j1-1)n + j2)` holds `E[Abar_{i1 j1} Abar_{i2 j2}]`,
/// consistent with [`matops::kron`].
#[derive(Debug, Clone)]
pub struct CpMatrix {
    pub value: Matrix,
    pub provenance: Provenance,
}

/// Gaussian moment engine with memoization on the sorted index multiset.
/// An order-2d moment enumerates (2d-1)!! pairings, at most 105 for d = 4.
pub struct MomentCache {
    sigma: Matrix,
    memo: HashMap<Vec<u32>, f64>,
}

impl MomentCache {
    pub fn new(sigma: Matrix) -> Self {
        Self {
            sigma,
            memo: HashMap::new(),
        }
    }

    /// E[prod_r p_r^{exponents[r]}] for p ~ N(0, Sigma).
    pub fn moment_of_exponents(&mut self, exponents: &[u32]) -> Result<f64> {
        let mut indices = Vec::new();
        push_indices(&mut indices, exponents);
        self.moment_of_indices(indices)
    }

    /// Moment of the product of two monomials (exponent vectors are summed).
    pub fn moment_of_exponent_pair(&mut self, e1: &[u32], e2: &[u32]) -> Result<f64> {
        let mut indices = Vec::new();
        push_indices(&mut indices, e1);
        push_indices(&mut indices, e2);
        indices.sort_unstable();
        self.moment_of_indices(indices)
    }

    fn moment_of_indices(&mut self, indices: Vec<u32>) -> Result<f64> {
        let order = indices.len() as u32;
        if order > MAX_MOMENT_ORDER {
            return Err(Error::MomentOrder {
                order,
                max: MAX_MOMENT_ORDER,
            });
        }
        if order % 2 == 1 {
            return Ok(0.0);
        }
        if let Some(&v) = self.memo.get(&indices) {
            return Ok(v);
        }
        let v = isserlis(&indices, &self.sigma);
        self.memo.insert(indices, v);
        Ok(v)
    }
}

fn push_indices(out: &mut Vec<u32>, exponents: &[u32]) {
    for (r, &e) in exponents.iter().enumerate() {
        for _ in 0..e {
            out.push(r as u32);
        }
    }
}

/// Sum over perfect pairings of products of Sigma entries.
fn isserlis(indices: &[u32], sigma: &Matrix) -> f64 {
    if indices.is_empty() {
        return 1.0;
    }
    let a = indices[0] as usize;
    let mut total = 0.0;
    for k in 1..indices.len() {
        let b = indices[k] as usize;
        let mut rest: Vec<u32> = Vec::with_capacity(indices.len() - 2);
        rest.extend_from_slice(&indices[1..k]);
        rest.extend_from_slice(&indices[k + 1..]);
        total += sigma[(a, b)] * isserlis(&rest, sigma);
    }
    total
}

/// One-shot Gaussian moment.
pub fn gaussian_moment(exponents: &[u32], sigma: &Matrix) -> Result<f64> {
    MomentCache::new(sigma.clone()).moment_of_exponents(exponents)
}

/// Assemble C_p analytically: each entry is a sum over term pairs of
/// `coeff1 * coeff2 * E[monomial1 * monomial2]`.
pub fn compute_cp_analytic(model: &SystemModel) -> Result<CpMatrix> {
    let n = model.n();
    let mut cache = MomentCache::new(model.law.sigma().clone());
    let mut value = Matrix::zeros(n * n, n * n);
    let nonzero: Vec<_> = model.abar.nonzero_entries().collect();
    for &(i1, j1, terms1) in &nonzero {
        for &(i2, j2, terms2) in &nonzero {
            let mut entry = 0.0;
            for t1 in terms1 {
                for t2 in terms2 {
                    entry += t1.coeff
                        * t2.coeff
                        * cache.moment_of_exponent_pair(&t1.exponents, &t2.exponents)?;
                }
            }
            value[(i1 * n + i2, j1 * n + j2)] = entry;
        }
    }
    Ok(CpMatrix {
        value,
        provenance: Provenance::Analytic,
    })
}

/// Draws from N(0, Sigma) through a PSD square-root factor.
pub struct GaussianSampler {
    factor: Matrix,
}

impl GaussianSampler {
    pub fn new(sigma: &Matrix) -> Result<Self> {
        Ok(Self {
            factor: matops::psd_sqrt(sigma)?,
        })
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Vector {
        let z = Vector::from_fn(self.factor.ncols(), |_, _| {
            StandardNormal.sample(rng)
        });
        &self.factor * z
    }
}

/// Accumulate per-sample statistics over a deterministic chunk schedule.
/// `f(sample_rng)` produces one observation matrix; returns entrywise
/// (mean, standard error of the mean).
fn sampled_mean_stderr<F>(samples: u64, seed: u64, shape: (usize, usize), f: F) -> (Matrix, Matrix)
where
    F: Fn(&mut ChaCha8Rng) -> Matrix + Sync,
{
    let (rows, cols) = shape;
    let n_chunks = samples.div_ceil(SAMPLE_CHUNK);
    let partials: Vec<(Matrix, Matrix)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SAMPLE_CHUNK;
            let hi = ((c + 1) * SAMPLE_CHUNK).min(samples);
            let mut sum = Matrix::zeros(rows, cols);
            let mut sumsq = Matrix::zeros(rows, cols);
            for s in lo..hi {
                let mut rng = crate::rng::stream(seed, s);
                let obs = f(&mut rng);
                sum += &obs;
                sumsq += obs.map(|x| x * x);
            }
            (sum, sumsq)
        })
        .collect();
    let mut sum = Matrix::zeros(rows, cols);
    let mut sumsq = Matrix::zeros(rows, cols);
    // Sequential fold in chunk order keeps the result independent of the
    // worker count.
    for (s, sq) in partials {
        sum += s;
        sumsq += sq;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = (sumsq / nf - mean.map(|x| x * x)).map(|v| v.max(0.0));
    let stderr = var.map(|v| (v / nf).sqrt());
    (mean, stderr)
}

/// Empirical C_p: average of `kron(Abar(p), Abar(p))` over i.i.d. draws,
/// using one shared parameter draw per sample for both Kronecker factors.
pub fn estimate_cp_empirical(model: &SystemModel, samples: u64, seed: u64) -> Result<CpMatrix> {
    Ok(estimate_cp_empirical_stats(model, samples, seed)?.0)
}

/// Empirical C_p plus entrywise standard errors of the estimate.
pub fn estimate_cp_empirical_stats(
    model: &SystemModel,
    samples: u64,
    seed: u64,
) -> Result<(CpMatrix, Matrix)> {
    if samples == 0 {
        return Err(Error::InvalidModel("sample count must be >= 1".into()));
    }
    let n = model.n();
    let sampler = GaussianSampler::new(model.law.sigma())?;
    let abar = &model.abar;
    let (mean, stderr) = sampled_mean_stderr(samples, seed, (n * n, n * n), |rng| {
        let p = sampler.draw(rng);
        let a = evaluate_abar(abar, &p).expect("validated spec");
        kron(&a, &a)
    });
    Ok((
        CpMatrix {
            value: mean,
            provenance: Provenance::Empirical { samples, seed },
        },
        stderr,
    ))
}

/// Monte Carlo estimate of entrywise E[Abar(p)] with standard errors; used
/// to cross-check the analytic zero-mean validation.
pub fn sample_abar_entry_stats(
    model: &SystemModel,
    samples: u64,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    let n = model.n();
    let sampler = GaussianSampler::new(model.law.sigma())?;
    let abar = &model.abar;
    Ok(sampled_mean_stderr(samples, seed, (n, n), |rng| {
        let p = sampler.draw(rng);
        evaluate_abar(abar, &p).expect("validated spec")
    }))
}
