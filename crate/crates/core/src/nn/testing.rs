use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Matrix;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Central differences, step 1e-5.
pub fn numeric_grad(at: &Matrix, f: impl Fn(&Matrix) -> f64) -> Matrix {
    let h = 1e-5;
    let mut out = Matrix::zeros(at.dim());
    let mut probe = at.clone();
    for idx in 0..at.len() {
        let (r, c) = (idx / at.ncols(), idx % at.ncols());
        let orig = probe[[r, c]];
        probe[[r, c]] = orig + h;
        let plus = f(&probe);
        probe[[r, c]] = orig - h;
        let minus = f(&probe);
        probe[[r, c]] = orig;
        out[[r, c]] = (plus - minus) / (2.0 * h);
    }
    out
}

pub fn max_rel_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    crate::nn::gradcheck::max_relative_error(analytic, numeric)
}
