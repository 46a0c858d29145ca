//! CSV and console output. All floats are written with 17 significant
//! digits so files round-trip exactly through f64.

use std::io::Write;
use std::path::{Path, PathBuf};

use covctl_core::matops::Matrix;
use covctl_core::montecarlo::{CompareReport, EmpiricalCovTrajectory};
use covctl_core::CovarianceTrajectory;

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// `name.csv` -> `name.suffix.csv` next to the original.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned());
    let name = match ext {
        Some(ext) => format!("{stem}.{suffix}.{ext}"),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> std::io::Result<()> {
    let mut out = std::fs::File::create(path)?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt(m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Covariance entries on and above the diagonal, one step per row.
fn cov_header(n: usize, prefix: &str) -> Vec<String> {
    let mut cols = Vec::new();
    for i in 0..n {
        for j in i..n {
            cols.push(format!("{prefix}_{}{}", i + 1, j + 1));
        }
    }
    cols
}

fn cov_values(m: &Matrix) -> Vec<String> {
    let n = m.nrows();
    let mut vals = Vec::new();
    for i in 0..n {
        for j in i..n {
            vals.push(fmt(m[(i, j)]));
        }
    }
    vals
}

pub fn write_trajectory_csv(path: &Path, traj: &CovarianceTrajectory) -> std::io::Result<()> {
    let n = traj.cov_seq[0].nrows();
    let mut out = std::fs::File::create(path)?;
    let mut header = vec!["k".to_string()];
    header.extend(cov_header(n, "cov"));
    header.extend((0..n).map(|i| format!("z_{}", i + 1)));
    writeln!(out, "{}", header.join(","))?;
    for k in 0..=traj.horizon {
        let mut row = vec![k.to_string()];
        row.extend(cov_values(&traj.cov_seq[k]));
        row.extend(traj.z_seq[k].iter().map(|&x| fmt(x)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_empirical_csv(path: &Path, traj: &EmpiricalCovTrajectory) -> std::io::Result<()> {
    let n = traj.cov_seq[0].nrows();
    let mut out = std::fs::File::create(path)?;
    let mut header = vec!["k".to_string()];
    header.extend(cov_header(n, "cov"));
    header.extend(cov_header(n, "stderr"));
    header.extend((0..n).map(|i| format!("mean_{}", i + 1)));
    writeln!(out, "{}", header.join(","))?;
    for k in 0..=traj.horizon {
        let mut row = vec![k.to_string()];
        row.extend(cov_values(&traj.cov_seq[k]));
        row.extend(cov_values(&traj.stderr_seq[k]));
        row.extend(traj.mean_seq[k].iter().map(|&x| fmt(x)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_compare_csv(path: &Path, report: &CompareReport) -> std::io::Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "i,j,max_abs,max_rel,max_z,worst_step")?;
    for e in &report.entries {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.i,
            e.j,
            fmt(e.max_abs),
            fmt(e.max_rel),
            fmt(e.max_z),
            e.worst_step
        )?;
    }
    Ok(())
}

pub fn print_matrix(m: &Matrix) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>10.6}", m[(i, j)])).collect();
        println!("  [{}]", row.join(", "));
    }
}
