//! Synthesis-timing benchmark over a sweep of state dimensions, with random
//! model generation matching the timing experiment's setting (B = I, one
//! independent Gaussian parameter per off-diagonal Abar entry).

use std::time::Instant;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matops::{self, Matrix};
use crate::model::{ParamLaw, PolyTerm, RandomMatrixSpec, SystemModel};
use crate::moments::compute_cp_analytic;
use crate::synthesis::{self, synthesize_gain};

/// Base variance of each Abar entry's parameter.
pub const ENTRY_VARIANCE: f64 = 0.07;

const MAX_GENERATION_ATTEMPTS: usize = 100;

/// Timing statistics for one state dimension.
#[derive(Debug, Clone)]
pub struct BenchCase {
    pub n: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub alpha_median: f64,
}

/// Generate a random model with B = I_n and a diagonal-free Abar in which
/// each off-diagonal entry is a degree-1 term in its own independent
/// parameter of variance 0.07. With that structure sigma_max(C_p) is
/// 0.07 (n - 1), so for larger n the entry coefficients are scaled down to
/// keep sigma_max(C_p) <= 0.9 and the synthesis precondition satisfiable.
pub fn generate_random_model(n: usize, seed: u64) -> Result<SystemModel> {
    if n == 0 {
        return Err(Error::InvalidModel("dimension must be >= 1".into()));
    }
    let l = (n * n).saturating_sub(n).max(1);
    let structural_norm = ENTRY_VARIANCE * (n.saturating_sub(1)) as f64;
    let coeff = if structural_norm > 0.9 {
        (0.9 / structural_norm).sqrt()
    } else {
        1.0
    };
    let sigma = Matrix::identity(l, l) * ENTRY_VARIANCE;
    let law = ParamLaw::gaussian(sigma)?;

    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = crate::rng::stream(seed, attempt as u64);
        let a0 = Matrix::from_fn(n, n, |_, _| {
            rng.gen_range(-1.0..1.0) / (n as f64).sqrt()
        });
        let mut entries = vec![Vec::new(); n * n];
        let mut param = 0usize;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut exponents = vec![0u32; l];
                exponents[param] = 1;
                param += 1;
                entries[i * n + j].push(PolyTerm { coeff, exponents });
            }
        }
        let abar = RandomMatrixSpec::new(n, l, entries)?;
        let model = SystemModel::new(
            a0,
            Matrix::identity(n, n),
            Matrix::identity(n, n),
            abar,
            law.clone(),
            Some(seed),
        )?;
        let cp = compute_cp_analytic(&model)?;
        if matops::sigma_max(&cp.value) < 1.0
            && synthesize_gain(&model, &cp, synthesis::DEFAULT_TOL).is_ok()
        {
            return Ok(model);
        }
    }
    Err(Error::Infeasible(format!(
        "no feasible random model of dimension {n} found in {MAX_GENERATION_ATTEMPTS} \
         attempts; try a smaller entry variance"
    )))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}

/// Run the timing sweep. Only the synthesis solve is timed; model generation
/// and C_p assembly are excluded. With `feasibility_only` the timed step is
/// the fixed-rate feasibility check (alpha = 1) instead of decay-rate
/// minimization. Runs are strictly sequential.
pub fn run_benchmark(
    n_list: &[usize],
    repetitions: usize,
    seed: u64,
    feasibility_only: bool,
) -> Result<Vec<BenchCase>> {
    if repetitions < 10 {
        return Err(Error::InvalidModel(
            "benchmark needs at least 10 repetitions".into(),
        ));
    }
    let mut cases = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut times_ms = Vec::with_capacity(repetitions);
        let mut alphas = Vec::with_capacity(repetitions);
        for rep in 0..repetitions {
            let model_seed = seed
                .wrapping_mul(0x100000001b3)
                .wrapping_add((n as u64) << 32)
                .wrapping_add(rep as u64);
            let model = generate_random_model(n, model_seed)?;
            let cp = compute_cp_analytic(&model)?;
            let start = Instant::now();
            if feasibility_only {
                let feasible = synthesis::check_feasibility(&model, &cp, 1.0)?;
                times_ms.push(start.elapsed().as_secs_f64() * 1e3);
                if !feasible {
                    return Err(Error::Numerical(format!(
                        "generated model of dimension {n} unexpectedly infeasible at alpha = 1"
                    )));
                }
            } else {
                let result = synthesize_gain(&model, &cp, synthesis::DEFAULT_TOL)?;
                times_ms.push(start.elapsed().as_secs_f64() * 1e3);
                alphas.push(result.alpha);
            }
        }
        times_ms.sort_by(f64::total_cmp);
        alphas.sort_by(f64::total_cmp);
        cases.push(BenchCase {
            n,
            repetitions,
            seed,
            median_ms: percentile(&times_ms, 0.5),
            mean_ms: times_ms.iter().sum::<f64>() / times_ms.len() as f64,
            p95_ms: percentile(&times_ms, 0.95),
            alpha_median: if alphas.is_empty() {
                f64::NAN
            } else {
                percentile(&alphas, 0.5)
            },
        });
    }
    Ok(cases)
}

/// CSV rendering with the stable header
/// `n,repetitions,median_ms,mean_ms,p95_ms,alpha_median`.
pub fn to_csv(cases: &[BenchCase]) -> String {
    let mut out = String::from("n,repetitions,median_ms,mean_ms,p95_ms,alpha_median\n");
    for c in cases {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.16e}\n",
            c.n, c.repetitions, c.median_ms, c.mean_ms, c.p95_ms, c.alpha_median
        ));
    }
    out
}
