//! Small random-data helpers shared by unit, property and acceptance tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::matops::{Matrix, Vector};
use crate::model::{ParamLaw, PolyTerm, RandomMatrixSpec, SystemModel};

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let a = random_matrix(rng, n, n);
    &a * a.transpose()
}

/// A random model with polynomial Abar entries of total degree <= 2 over a
/// two-parameter Gaussian law. Entries pick degree 1 or 2 at random; some
/// entries stay structurally zero.
pub fn random_degree2_model(rng: &mut ChaCha8Rng, n: usize) -> SystemModel {
    let l = 2;
    let a0 = random_matrix(rng, n, n) * 0.3;
    let b = Matrix::identity(n, n);
    let w = Matrix::identity(n, n);
    let s11: f64 = rng.gen_range(0.05..0.3);
    let s22: f64 = rng.gen_range(0.05..0.3);
    let s12 = rng.gen_range(-0.5..0.5) * (s11 * s22).sqrt() * 0.5;
    let sigma = Matrix::from_row_slice(2, 2, &[s11, s12, s12, s22]);
    let mut entries = vec![Vec::new(); n * n];
    for entry in entries.iter_mut() {
        match rng.gen_range(0..4) {
            0 => {} // structurally zero
            1 => entry.push(PolyTerm {
                coeff: rng.gen_range(-0.5..0.5),
                exponents: vec![1, 0],
            }),
            2 => entry.push(PolyTerm {
                coeff: rng.gen_range(-0.5..0.5),
                exponents: vec![0, 1],
            }),
            _ => {
                // centered quadratic: c*(p1*p2 - Sigma_12)
                let c = rng.gen_range(-0.3..0.3);
                entry.push(PolyTerm {
                    coeff: c,
                    exponents: vec![1, 1],
                });
                entry.push(PolyTerm {
                    coeff: -c * s12,
                    exponents: vec![0, 0],
                });
            }
        }
    }
    let abar = RandomMatrixSpec::new(n, l, entries).unwrap();
    SystemModel::new(a0, b, w, abar, ParamLaw::gaussian(sigma).unwrap(), None).unwrap()
}

/// The three-state example model used throughout the test suite.
pub fn example3_model() -> SystemModel {
    crate::model::parse_model(EXAMPLE3_JSON).unwrap().0
}

/// JSON source of the three-state example model.
pub const EXAMPLE3_JSON: &str = r#"{
  "n": 3,
  "m": 1,
  "l": 2,
  "A0": [[0.4, 0.4, 0.5], [0.1, 0.1, 0.2], [0.2, 0.1, 0.5]],
  "B": [[1.0], [0.0], [0.0]],
  "W": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
  "Sigma": [[0.21, 0.03], [0.03, 0.15]],
  "Abar": [
    {"i": 1, "j": 1, "terms": [{"coeff": 1.0, "exponents": [1, 0]}]},
    {"i": 1, "j": 3, "terms": [{"coeff": 1.0, "exponents": [1, 0]}]},
    {"i": 2, "j": 2, "terms": [{"coeff": 1.224744871391589, "exponents": [0, 2]},
                                {"coeff": -0.18371173070873834, "exponents": [0, 0]}]},
    {"i": 3, "j": 3, "terms": [{"coeff": 1.0, "exponents": [0, 1]}]}
  ],
  "seed": 42
}"#;
