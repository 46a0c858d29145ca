//! `covctl`: model validation, C_p computation, covariance propagation,
//! steady-state analysis, gain synthesis, Monte Carlo comparison and
//! synthesis benchmarking, with JSON/CSV file I/O.

mod manifest;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use covctl_core::covariance::{propagate, stability_report, steady_state, NominalPolicy};
use covctl_core::matops::Vector;
use covctl_core::model::load_model;
use covctl_core::moments::{compute_cp_analytic, estimate_cp_empirical_stats};
use covctl_core::montecarlo::{compare, simulate, SimConfig};
use covctl_core::synthesis::{gain_to_json, load_gain, synthesize_gain, DEFAULT_TOL};
use covctl_core::{Error, GainK, SystemModel};

use manifest::RunManifest;

/// Exit code contract: 0 success, 2 validation error, 3 infeasibility,
/// 4 numerical failure.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Infeasible(_) => 3,
        Error::Unstable { .. }
        | Error::IllConditioned { .. }
        | Error::Numerical(_)
        | Error::NonFinite { .. } => 4,
        _ => 2,
    }
}

#[derive(Parser)]
#[command(name = "covctl", version, about)]
struct Cli {
    /// Worker threads for simulation and sampling (overridden by
    /// COVCTL_THREADS; default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GainSource {
    /// Path to a gain JSON file (object with a row-major "K" array).
    #[arg(long, conflicts_with = "synthesize")]
    gain: Option<PathBuf>,
    /// Synthesize the gain instead of loading one.
    #[arg(long)]
    synthesize: bool,
}

impl GainSource {
    fn resolve(&self, model: &SystemModel, cp: &covctl_core::CpMatrix) -> Result<GainK, Error> {
        match (&self.gain, self.synthesize) {
            (Some(path), _) => load_gain(path),
            (None, true) => Ok(synthesize_gain(model, cp, DEFAULT_TOL)?.gain),
            (None, false) => Err(Error::InvalidModel(
                "either --gain <path> or --synthesize is required".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model file.
    Validate { model: PathBuf },
    /// Compute C_p analytically (and optionally empirically) and write it as CSV.
    Cp {
        model: PathBuf,
        /// Also estimate C_p from this many samples and report the deviation.
        #[arg(long)]
        empirical: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate the covariance recursion and write the trajectory as CSV.
    Propagate {
        model: PathBuf,
        #[command(flatten)]
        gain: GainSource,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        /// Initial nominal state, comma-separated (default: zero).
        #[arg(long)]
        z0: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the steady-state covariance.
    Steady {
        model: PathBuf,
        #[command(flatten)]
        gain: GainSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize the pre-stabilizing gain and minimized decay rate.
    Synth {
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Gain JSON output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo simulation and comparison against the theoretical recursion.
    Simulate {
        model: PathBuf,
        #[command(flatten)]
        gain: GainSource,
        #[arg(long, default_value_t = 5000)]
        trials: u64,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for theoretical/empirical/comparison CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the synthesis solve across state dimensions.
    Benchmark {
        /// Comma-separated state dimensions.
        #[arg(long, value_delimiter = ',', default_value = "3,5,10,15,20")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Time the fixed-rate feasibility check instead of decay-rate minimization.
        #[arg(long)]
        feasibility_only: bool,
    },
}

fn parse_z0(text: Option<&str>, n: usize) -> Result<Vector, Error> {
    match text {
        None => Ok(Vector::zeros(n)),
        Some(s) => {
            let values: Result<Vec<f64>, _> =
                s.split(',').map(|x| x.trim().parse::<f64>()).collect();
            let values = values.map_err(|e| Error::Parse(format!("--z0: {e}")))?;
            if values.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("z0 with {n} components"),
                    got: format!("{}", values.len()),
                });
            }
            Ok(Vector::from_column_slice(&values))
        }
    }
}

fn load_validated(path: &Path) -> Result<SystemModel, Error> {
    let (model, warnings) = load_model(path)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(model)
}

fn effective_seed(flag: Option<u64>, model: &SystemModel) -> u64 {
    flag.or(model.seed).unwrap_or(0)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Validate { model } => {
            let mut manifest = RunManifest::new("validate", &[model.clone()], None);
            let m = load_validated(model)?;
            println!(
                "model ok: n = {}, m = {}, l = {}, Abar max degree {}",
                m.n(),
                m.m(),
                m.l(),
                m.abar.max_degree()
            );
            manifest.finish(None, &[])?;
            Ok(())
        }
        Command::Cp {
            model,
            empirical,
            seed,
            out,
        } => {
            let mut manifest = RunManifest::new("cp", &[model.clone()], *seed);
            let m = load_validated(model)?;
            let cp = compute_cp_analytic(&m)?;
            let out_path = out.clone().unwrap_or_else(|| PathBuf::from("cp.csv"));
            output::write_matrix_csv(&out_path, &cp.value)?;
            println!("analytic C_p ({0}x{0}) written to {1}", m.n() * m.n(), out_path.display());
            if let Some(samples) = empirical {
                let seed = effective_seed(*seed, &m);
                let (emp, _) = estimate_cp_empirical_stats(&m, *samples, seed)?;
                let dev = (&emp.value - &cp.value).amax();
                let emp_path = output::sibling(&out_path, "empirical");
                output::write_matrix_csv(&emp_path, &emp.value)?;
                println!(
                    "empirical C_p at {samples} samples (seed {seed}) written to {}; \
                     max-abs deviation from analytic: {dev:.6e}",
                    emp_path.display()
                );
            }
            manifest.finish(*seed, &[out_path])?;
            Ok(())
        }
        Command::Propagate {
            model,
            gain,
            horizon,
            z0,
            out,
        } => {
            let mut manifest = RunManifest::new("propagate", &[model.clone()], None);
            let m = load_validated(model)?;
            let cp = compute_cp_analytic(&m)?;
            let k = gain.resolve(&m, &cp)?;
            let z0 = parse_z0(z0.as_deref(), m.n())?;
            let report = stability_report(&m, &k, &cp)?;
            if report.rho >= 1.0 {
                eprintln!(
                    "warning: rho(M(K)) = {:.4} >= 1, the covariance recursion diverges",
                    report.rho
                );
            }
            let traj = propagate(&m, &k, &cp, &z0, *horizon, &NominalPolicy::Feedback, false)?;
            let out_path = out.clone().unwrap_or_else(|| PathBuf::from("trajectory.csv"));
            output::write_trajectory_csv(&out_path, &traj)?;
            println!(
                "trajectory over horizon {horizon} written to {} (rho(M(K)) = {:.4})",
                out_path.display(),
                report.rho
            );
            manifest.finish(None, &[out_path])?;
            Ok(())
        }
        Command::Steady { model, gain, out } => {
            let mut manifest = RunManifest::new("steady", &[model.clone()], None);
            let m = load_validated(model)?;
            let cp = compute_cp_analytic(&m)?;
            let k = gain.resolve(&m, &cp)?;
            let ss = steady_state(&m, &k, &cp)?;
            println!("steady-state covariance:");
            output::print_matrix(&ss);
            let mut outputs = Vec::new();
            if let Some(path) = out {
                output::write_matrix_csv(path, &ss)?;
                println!("written to {}", path.display());
                outputs.push(path.clone());
            }
            manifest.finish(None, &outputs)?;
            Ok(())
        }
        Command::Synth { model, tol, out } => {
            let mut manifest = RunManifest::new("synth", &[model.clone()], None);
            let m = load_validated(model)?;
            let cp = compute_cp_analytic(&m)?;
            let result = synthesize_gain(&m, &cp, *tol)?;
            println!(
                "alpha = {:.4}, beta = {:.4}, lmi margin = {:.4e}, rho(M(K)) = {:.4}",
                result.alpha, result.beta, result.lmi_margin, result.rho
            );
            println!("K =");
            output::print_matrix(&result.gain.k);
            let out_path = out.clone().unwrap_or_else(|| PathBuf::from("gain.json"));
            std::fs::write(&out_path, gain_to_json(&result))?;
            println!("gain written to {}", out_path.display());
            manifest.finish(None, &[out_path])?;
            Ok(())
        }
        Command::Simulate {
            model,
            gain,
            trials,
            horizon,
            seed,
            out,
        } => {
            let mut manifest = RunManifest::new("simulate", &[model.clone()], *seed);
            let m = load_validated(model)?;
            let cp = compute_cp_analytic(&m)?;
            let k = gain.resolve(&m, &cp)?;
            let seed = effective_seed(*seed, &m);
            let config = SimConfig {
                trials: *trials,
                horizon: *horizon,
                seed,
                x0: Vector::zeros(m.n()),
            };
            let theory = propagate(
                &m,
                &k,
                &cp,
                &config.x0,
                *horizon,
                &NominalPolicy::Feedback,
                false,
            )?;
            let emp = simulate(&m, &k, &config, &NominalPolicy::Feedback)?;
            let report = compare(&theory, &emp, 5.0)?;
            let dir = out.clone().unwrap_or_else(|| PathBuf::from("simulation"));
            std::fs::create_dir_all(&dir)?;
            let th_path = dir.join("theoretical.csv");
            let em_path = dir.join("empirical.csv");
            let cmp_path = dir.join("comparison.csv");
            output::write_trajectory_csv(&th_path, &theory)?;
            output::write_empirical_csv(&em_path, &emp)?;
            output::write_compare_csv(&cmp_path, &report)?;
            println!(
                "simulation: {trials} trials, horizon {horizon}, seed {seed}; \
                 max |dev| = {:.4e}, max z = {:.2}",
                report.max_abs, report.max_z
            );
            println!(
                "comparison verdict: {} (threshold {} standard errors)",
                if report.pass { "PASS" } else { "FAIL" },
                report.z_threshold
            );
            manifest.finish(Some(seed), &[th_path, em_path, cmp_path])?;
            Ok(())
        }
        Command::Benchmark {
            n_list,
            reps,
            seed,
            out,
            feasibility_only,
        } => {
            let mut manifest = RunManifest::new("benchmark", &[], Some(*seed));
            let cases =
                covctl_core::benchmark::run_benchmark(n_list, *reps, *seed, *feasibility_only)?;
            let csv = covctl_core::benchmark::to_csv(&cases);
            let out_path = out.clone().unwrap_or_else(|| PathBuf::from("benchmark.csv"));
            std::fs::write(&out_path, &csv)?;
            print!("{csv}");
            println!("written to {}", out_path.display());
            manifest.finish(Some(*seed), &[out_path])?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("COVCTL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cli.threads);
    if let Some(t) = threads {
        // Ignore failure: the global pool can only be configured once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
