//! Trajectory-level Monte Carlo simulation of the stochastic closed loop,
//! empirical error covariances, and comparison against the theoretical
//! recursion.
//!
//! Trials are grouped into fixed 64-trial chunks; each chunk accumulates
//! sequentially in trial order and chunk sums are reduced in index order, so
//! the result is bit-identical for any worker count.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::covariance::{CovarianceTrajectory, GainK, NominalPolicy};
use crate::error::{Error, Result};
use crate::matops::{Matrix, Vector};
use crate::model::{evaluate_abar, SystemModel};
use crate::moments::GaussianSampler;

const TRIAL_CHUNK: u64 = 64;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub trials: u64,
    pub horizon: usize,
    pub seed: u64,
    /// Initial state x_0 = z_0 (deterministic, so e_0 = 0).
    pub x0: Vector,
}

impl SimConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::InvalidModel(
                "sample covariance needs at least 2 trials".into(),
            ));
        }
        if self.horizon < 1 {
            return Err(Error::InvalidModel("horizon must be >= 1".into()));
        }
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("x0 of length {n}"),
                got: format!("length {}", self.x0.len()),
            });
        }
        Ok(())
    }
}

/// Per-step sample statistics of the error e_k = x_k - z_k across trials.
#[derive(Debug, Clone)]
pub struct EmpiricalCovTrajectory {
    pub horizon: usize,
    /// Raw second moment sum e_k e_k^T / N (not mean-centered; the error has
    /// zero mean by construction from e_0 = 0).
    pub cov_seq: Vec<Matrix>,
    /// Sample mean of e_k.
    pub mean_seq: Vec<Vector>,
    /// Entrywise standard error of the raw second moment.
    pub stderr_seq: Vec<Matrix>,
    /// Entrywise standard error of the sample mean.
    pub mean_stderr_seq: Vec<Vector>,
}

impl EmpiricalCovTrajectory {
    /// Mean-centered sample covariance at step k (diagnostic; differs from
    /// the raw second moment by mean * mean^T).
    pub fn centered_cov(&self, k: usize) -> Matrix {
        let m = &self.mean_seq[k];
        &self.cov_seq[k] - m * m.transpose()
    }
}

/// Draw from N(0, W) through a symmetric PSD square-root factor.
pub fn sample_noise(w: &Matrix, rng: &mut ChaCha8Rng) -> Result<Vector> {
    Ok(GaussianSampler::new(w)?.draw(rng))
}

struct StepAccum {
    sum_e: Vec<Vector>,
    sum_q: Vec<Matrix>,
    sum_q2: Vec<Matrix>,
}

impl StepAccum {
    fn zeros(n: usize, steps: usize) -> Self {
        Self {
            sum_e: vec![Vector::zeros(n); steps],
            sum_q: vec![Matrix::zeros(n, n); steps],
            sum_q2: vec![Matrix::zeros(n, n); steps],
        }
    }

    fn absorb(&mut self, other: StepAccum) {
        for k in 0..self.sum_e.len() {
            self.sum_e[k] += &other.sum_e[k];
            self.sum_q[k] += &other.sum_q[k];
            self.sum_q2[k] += &other.sum_q2[k];
        }
    }
}

/// Simulate the closed loop x_{k+1} = (A0 + Abar(p_k)) x_k + B u_k + w_k
/// with u_k = K (x_k - z_k) + v_k, and return per-step statistics of
/// e_k = x_k - z_k. Deterministic given the seed, for any worker count.
pub fn simulate(
    model: &SystemModel,
    gain: &GainK,
    config: &SimConfig,
    policy: &NominalPolicy,
) -> Result<EmpiricalCovTrajectory> {
    let n = model.n();
    config.validate(n)?;
    if gain.k.nrows() != model.m() || gain.k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("gain of shape {}x{}", model.m(), n),
            got: format!("{}x{}", gain.k.nrows(), gain.k.ncols()),
        });
    }
    let horizon = config.horizon;
    if let NominalPolicy::Sequence(vs) = policy {
        if vs.len() < horizon {
            return Err(Error::InvalidModel(format!(
                "nominal input sequence has {} entries, horizon requires {horizon}",
                vs.len()
            )));
        }
    }

    // Deterministic component, shared by all trials.
    let mut z_seq = Vec::with_capacity(horizon + 1);
    let mut v_seq = Vec::with_capacity(horizon);
    let mut z = config.x0.clone();
    z_seq.push(z.clone());
    for k in 0..horizon {
        let v = match policy {
            NominalPolicy::Feedback => &gain.k * &z,
            NominalPolicy::Sequence(vs) => vs[k].clone(),
        };
        z = &model.a0 * &z + &model.b * &v;
        v_seq.push(v);
        z_seq.push(z.clone());
    }

    let param_sampler = GaussianSampler::new(model.law.sigma())?;
    let noise_sampler = GaussianSampler::new(&model.w)?;
    let steps = horizon + 1;
    let n_chunks = config.trials.div_ceil(TRIAL_CHUNK);

    let partials: Vec<StepAccum> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * TRIAL_CHUNK;
            let hi = ((c + 1) * TRIAL_CHUNK).min(config.trials);
            let mut acc = StepAccum::zeros(n, steps);
            for trial in lo..hi {
                let mut rng = crate::rng::stream(config.seed, trial);
                let mut x = config.x0.clone();
                for k in 0..=horizon {
                    let e = &x - &z_seq[k];
                    acc.sum_e[k] += &e;
                    let q = &e * e.transpose();
                    acc.sum_q2[k] += q.map(|v| v * v);
                    acc.sum_q[k] += q;
                    if k == horizon {
                        break;
                    }
                    let p = param_sampler.draw(&mut rng);
                    let w = noise_sampler.draw(&mut rng);
                    let abar = evaluate_abar(&model.abar, &p).expect("validated spec");
                    let u = &gain.k * &e + &v_seq[k];
                    x = (&model.a0 + abar) * x + &model.b * u + w;
                }
            }
            acc
        })
        .collect();

    let mut total = StepAccum::zeros(n, steps);
    for part in partials {
        total.absorb(part);
    }

    let nf = config.trials as f64;
    let mut cov_seq = Vec::with_capacity(steps);
    let mut mean_seq = Vec::with_capacity(steps);
    let mut stderr_seq = Vec::with_capacity(steps);
    let mut mean_stderr_seq = Vec::with_capacity(steps);
    for k in 0..steps {
        let mean_q = &total.sum_q[k] / nf;
        let var_q = (&total.sum_q2[k] / nf - mean_q.map(|x| x * x)).map(|v| v.max(0.0));
        let mean_e = &total.sum_e[k] / nf;
        // Var of e entries from the diagonal of the raw second moment.
        let var_e = Vector::from_fn(n, |i, _| {
            (mean_q[(i, i)] - mean_e[i] * mean_e[i]).max(0.0)
        });
        cov_seq.push((&mean_q + mean_q.transpose()) * 0.5);
        mean_seq.push(mean_e);
        stderr_seq.push(var_q.map(|v| (v / nf).sqrt()));
        mean_stderr_seq.push(var_e.map(|v| (v / nf).sqrt()));
    }
    Ok(EmpiricalCovTrajectory {
        horizon,
        cov_seq,
        mean_seq,
        stderr_seq,
        mean_stderr_seq,
    })
}

/// Per-entry comparison outcome between theory and simulation.
#[derive(Debug, Clone)]
pub struct EntryDeviation {
    /// 1-based state indices of the covariance entry.
    pub i: usize,
    pub j: usize,
    pub max_abs: f64,
    /// Max relative deviation over steps where |theoretical| > 0.05.
    pub max_rel: f64,
    /// Max deviation in units of the empirical standard error.
    pub max_z: f64,
    /// Step attaining max_z.
    pub worst_step: usize,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub entries: Vec<EntryDeviation>,
    pub max_abs: f64,
    pub max_rel: f64,
    pub max_z: f64,
    pub z_threshold: f64,
    pub pass: bool,
}

/// Compare a theoretical covariance trajectory against simulation, entry by
/// entry and step by step, with a z-score pass/fail verdict.
pub fn compare(
    theoretical: &CovarianceTrajectory,
    empirical: &EmpiricalCovTrajectory,
    z_threshold: f64,
) -> Result<CompareReport> {
    if theoretical.horizon != empirical.horizon {
        return Err(Error::DimensionMismatch {
            expected: format!("horizon {}", theoretical.horizon),
            got: format!("horizon {}", empirical.horizon),
        });
    }
    let n = theoretical.cov_seq[0].nrows();
    if empirical.cov_seq[0].nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{n} covariances"),
            got: format!("{0}x{0}", empirical.cov_seq[0].nrows()),
        });
    }
    let mut entries = Vec::new();
    let mut max_abs = 0.0_f64;
    let mut max_rel = 0.0_f64;
    let mut max_z = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let mut entry = EntryDeviation {
                i: i + 1,
                j: j + 1,
                max_abs: 0.0,
                max_rel: 0.0,
                max_z: 0.0,
                worst_step: 0,
            };
            for k in 0..=theoretical.horizon {
                let th = theoretical.cov_seq[k][(i, j)];
                let em = empirical.cov_seq[k][(i, j)];
                let se = empirical.stderr_seq[k][(i, j)];
                let dev = (em - th).abs();
                entry.max_abs = entry.max_abs.max(dev);
                if th.abs() > 0.05 {
                    entry.max_rel = entry.max_rel.max(dev / th.abs());
                }
                // Guard against zero SE at steps where e_k is exactly zero.
                let z = dev / (se + 1e-12);
                if z > entry.max_z {
                    entry.max_z = z;
                    entry.worst_step = k;
                }
            }
            max_abs = max_abs.max(entry.max_abs);
            max_rel = max_rel.max(entry.max_rel);
            max_z = max_z.max(entry.max_z);
            entries.push(entry);
        }
    }
    Ok(CompareReport {
        entries,
        max_abs,
        max_rel,
        max_z,
        z_threshold,
        pass: max_z <= z_threshold,
    })
}
