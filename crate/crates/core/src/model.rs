//! Plant description: deterministic matrices, the symbolic random matrix
//! Abar(p) with polynomial entries, the zero-mean Gaussian parameter law,
//! and the on-disk JSON schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{self, Matrix, Vector};

/// Largest admitted total degree of an Abar entry. `E[Abar (x) Abar]` then
/// needs Gaussian moments up to order 8.
pub const MAX_DEGREE: u32 = 4;

/// One monomial `coeff * prod_r p_r^exponents[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTerm {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

impl PolyTerm {
    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

/// Symbolic description of the centered random state matrix Abar(p):
/// polynomial entries over an l-dimensional parameter vector. An empty term
/// list means the entry is structurally zero.
#[derive(Debug, Clone)]
pub struct RandomMatrixSpec {
    n: usize,
    l: usize,
    /// Row-major, length n*n.
    entries: Vec<Vec<PolyTerm>>,
    max_degree: u32,
}

impl RandomMatrixSpec {
    pub fn new(n: usize, l: usize, entries: Vec<Vec<PolyTerm>>) -> Result<Self> {
        if n == 0 || l == 0 {
            return Err(Error::InvalidModel(
                "state and parameter dimensions must be positive".into(),
            ));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entry term lists", n * n),
                got: format!("{}", entries.len()),
            });
        }
        let mut max_degree = 0;
        for (idx, terms) in entries.iter().enumerate() {
            for term in terms {
                if term.exponents.len() != l {
                    return Err(Error::InvalidModel(format!(
                        "Abar entry ({}, {}): exponent vector has length {}, expected l = {}",
                        idx / n + 1,
                        idx % n + 1,
                        term.exponents.len(),
                        l
                    )));
                }
                if !term.coeff.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "Abar entry ({}, {}): non-finite coefficient",
                        idx / n + 1,
                        idx % n + 1
                    )));
                }
                let deg = term.total_degree();
                if deg > MAX_DEGREE {
                    return Err(Error::InvalidModel(format!(
                        "Abar entry ({}, {}): total degree {} exceeds maximum {}",
                        idx / n + 1,
                        idx % n + 1,
                        deg,
                        MAX_DEGREE
                    )));
                }
                max_degree = max_degree.max(deg);
            }
        }
        Ok(Self {
            n,
            l,
            entries,
            max_degree,
        })
    }

    /// Spec with all entries structurally zero.
    pub fn zero(n: usize, l: usize) -> Self {
        Self {
            n,
            l,
            entries: vec![Vec::new(); n * n],
            max_degree: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// Terms of entry (i, j), zero-based.
    pub fn terms(&self, i: usize, j: usize) -> &[PolyTerm] {
        &self.entries[i * self.n + j]
    }

    /// Entries with at least one term, as (i, j, terms), zero-based.
    pub fn nonzero_entries(&self) -> impl Iterator<Item = (usize, usize, &[PolyTerm])> {
        self.entries.iter().enumerate().filter_map(move |(idx, t)| {
            if t.is_empty() {
                None
            } else {
                Some((idx / self.n, idx % self.n, t.as_slice()))
            }
        })
    }
}

/// Evaluate Abar at a concrete parameter vector.
pub fn evaluate_abar(spec: &RandomMatrixSpec, p: &Vector) -> Result<Matrix> {
    if p.len() != spec.l {
        return Err(Error::DimensionMismatch {
            expected: format!("parameter vector of length {}", spec.l),
            got: format!("length {}", p.len()),
        });
    }
    let n = spec.n;
    let mut out = Matrix::zeros(n, n);
    for (i, j, terms) in spec.nonzero_entries() {
        let mut value = 0.0;
        for term in terms {
            let mut prod = term.coeff;
            for (r, &e) in term.exponents.iter().enumerate() {
                for _ in 0..e {
                    prod *= p[r];
                }
            }
            value += prod;
        }
        out[(i, j)] = value;
    }
    Ok(out)
}

/// Zero-mean Gaussian parameter law with covariance `sigma`.
#[derive(Debug, Clone)]
pub struct ParamLaw {
    sigma: Matrix,
}

impl ParamLaw {
    pub fn gaussian(sigma: Matrix) -> Result<Self> {
        let min_eig = matops::min_eig_sym(&sigma).map_err(|e| match e {
            Error::NotSymmetric { asymmetry, .. } => Error::InvalidModel(format!(
                "Sigma must be symmetric (max asymmetry {asymmetry:.3e})"
            )),
            other => other,
        })?;
        if min_eig < -1e-12 {
            return Err(Error::InvalidModel(format!(
                "Sigma must be positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// The full plant: x_{k+1} = (A0 + Abar(p_k)) x_k + B u_k + w_k.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub a0: Matrix,
    pub b: Matrix,
    pub w: Matrix,
    pub abar: RandomMatrixSpec,
    pub law: ParamLaw,
    pub seed: Option<u64>,
}

impl SystemModel {
    pub fn new(
        a0: Matrix,
        b: Matrix,
        w: Matrix,
        abar: RandomMatrixSpec,
        law: ParamLaw,
        seed: Option<u64>,
    ) -> Result<Self> {
        let model = Self {
            a0,
            b,
            w,
            abar,
            law,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.a0.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn l(&self) -> usize {
        self.law.dim()
    }

    fn validate(&self) -> Result<()> {
        let n = self.a0.nrows();
        if !self.a0.is_square() {
            return Err(Error::InvalidModel(format!(
                "A0 must be square, got {}x{}",
                self.a0.nrows(),
                self.a0.ncols()
            )));
        }
        if self.b.nrows() != n {
            return Err(Error::InvalidModel(format!(
                "B must have {} rows, got {}",
                n,
                self.b.nrows()
            )));
        }
        if self.w.nrows() != n || self.w.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "W must be {n}x{n}, got {}x{}",
                self.w.nrows(),
                self.w.ncols()
            )));
        }
        if self.abar.n() != n {
            return Err(Error::InvalidModel(format!(
                "Abar dimension {} does not match state dimension {}",
                self.abar.n(),
                n
            )));
        }
        if self.abar.l() != self.law.dim() {
            return Err(Error::InvalidModel(format!(
                "Abar parameter dimension {} does not match Sigma dimension {}",
                self.abar.l(),
                self.law.dim()
            )));
        }
        matops::check_finite(&self.a0, "A0")?;
        matops::check_finite(&self.b, "B")?;
        matops::check_finite(&self.w, "W")?;
        let w_min = matops::min_eig_sym(&self.w).map_err(|e| match e {
            Error::NotSymmetric { asymmetry, .. } => Error::InvalidModel(format!(
                "W must be symmetric (max asymmetry {asymmetry:.3e})"
            )),
            other => other,
        })?;
        if w_min <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "W must be positive definite (min eigenvalue {w_min:.3e})"
            )));
        }
        // E[Abar] = 0 entrywise, checked analytically under the Gaussian law.
        let mut cache = crate::moments::MomentCache::new(self.law.sigma().clone());
        for (i, j, terms) in self.abar.nonzero_entries() {
            let mut mean = 0.0;
            for term in terms {
                mean += term.coeff * cache.moment_of_exponents(&term.exponents)?;
            }
            if mean.abs() > 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "Abar entry ({}, {}) has non-zero mean {mean:.6} under the declared \
                     Gaussian law; fold the mean into A0 and keep Abar centered",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// On-disk schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermFile {
    coeff: f64,
    exponents: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct AbarEntryFile {
    /// 1-based row index.
    i: usize,
    /// 1-based column index.
    j: usize,
    terms: Vec<TermFile>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    m: usize,
    l: usize,
    #[serde(rename = "A0")]
    a0: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    #[serde(rename = "Sigma")]
    sigma: Vec<Vec<f64>>,
    #[serde(rename = "Abar")]
    abar: Vec<AbarEntryFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

const KNOWN_KEYS: &[&str] = &["n", "m", "l", "A0", "B", "W", "Sigma", "Abar", "seed"];

fn rows_to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<Matrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "{name} must be a {nrows}x{ncols} row-major array of arrays"
        )));
    }
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Ok(Matrix::from_row_slice(nrows, ncols, &flat))
}

/// Parse a model document. Returns the validated model plus warnings for
/// unknown top-level keys.
pub fn parse_model(text: &str) -> Result<(SystemModel, Vec<String>)> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut warnings = Vec::new();
    if let Some(obj) = value.as_object() {
        for key in obj.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                warnings.push(format!("ignoring unknown key `{key}`"));
            }
        }
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let a0 = rows_to_matrix(&file.a0, file.n, file.n, "A0")?;
    let b = rows_to_matrix(&file.b, file.n, file.m, "B")?;
    let w = rows_to_matrix(&file.w, file.n, file.n, "W")?;
    let sigma = rows_to_matrix(&file.sigma, file.l, file.l, "Sigma")?;
    let mut entries = vec![Vec::new(); file.n * file.n];
    for e in &file.abar {
        if e.i == 0 || e.i > file.n || e.j == 0 || e.j > file.n {
            return Err(Error::Parse(format!(
                "Abar entry index ({}, {}) outside 1..={}",
                e.i, e.j, file.n
            )));
        }
        let slot = &mut entries[(e.i - 1) * file.n + (e.j - 1)];
        if !slot.is_empty() {
            return Err(Error::Parse(format!(
                "Abar entry ({}, {}) declared twice",
                e.i, e.j
            )));
        }
        *slot = e
            .terms
            .iter()
            .map(|t| PolyTerm {
                coeff: t.coeff,
                exponents: t.exponents.clone(),
            })
            .collect();
    }
    let abar = RandomMatrixSpec::new(file.n, file.l, entries)?;
    let law = ParamLaw::gaussian(sigma)?;
    let model = SystemModel::new(a0, b, w, abar, law, file.seed)?;
    Ok((model, warnings))
}

/// Load and validate a model file.
pub fn load_model(path: &Path) -> Result<(SystemModel, Vec<String>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Serialize a model back to the schema.
pub fn model_to_json(model: &SystemModel) -> String {
    let file = ModelFile {
        n: model.n(),
        m: model.m(),
        l: model.l(),
        a0: matrix_to_rows(&model.a0),
        b: matrix_to_rows(&model.b),
        w: matrix_to_rows(&model.w),
        sigma: matrix_to_rows(model.law.sigma()),
        abar: model
            .abar
            .nonzero_entries()
            .map(|(i, j, terms)| AbarEntryFile {
                i: i + 1,
                j: j + 1,
                terms: terms
                    .iter()
                    .map(|t| TermFile {
                        coeff: t.coeff,
                        exponents: t.exponents.clone(),
                    })
                    .collect(),
            })
            .collect(),
        seed: model.seed,
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn save_model(model: &SystemModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model))?;
    Ok(())
}
