//! Dense, ReLU, batch-normalization and dropout layers as explicit
//! forward/backward function pairs.

use ndarray::{Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Matrix, Mode};
use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

fn check_shapes(what: &str, ok: bool, detail: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("{what}: {}", detail())))
    }
}

/// `y = x W + b` with `x: B x in`, `W: in x out`, `b: 1 x out`.
pub fn dense_forward(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_shapes(
        "dense",
        x.ncols() == w.nrows() && b.nrows() == 1 && b.ncols() == w.ncols(),
        || format!("x {:?}, W {:?}, b {:?}", x.dim(), w.dim(), b.dim()),
    )?;
    Ok(x.dot(w) + b)
}

pub struct DenseGrads {
    pub dx: Matrix,
    pub dw: Matrix,
    pub db: Matrix,
}

/// Gradients of a dense layer. With `l2 > 0` the weight gradient also carries
/// the derivative `2 l2 W` of the penalty `l2 * ||W||^2`.
pub fn dense_backward(x: &Matrix, w: &Matrix, dy: &Matrix, l2: f64) -> DenseGrads {
    let mut dw = x.t().dot(dy);
    if l2 > 0.0 {
        dw.scaled_add(2.0 * l2, w);
    }
    DenseGrads {
        dx: dy.dot(&w.t()),
        dw,
        db: dy.sum_axis(Axis(0)).insert_axis(Axis(0)),
    }
}

pub fn relu_forward(x: &Matrix) -> Matrix {
    x.mapv(|v| v.max(0.0))
}

/// `x` is the ReLU input.
pub fn relu_backward(x: &Matrix, dy: &Matrix) -> Matrix {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(x).for_each(|d, &v| {
        if v <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

/// Running statistics of a batch-normalization layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub mean: Matrix,
    pub var: Matrix,
}

impl BnStats {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: Matrix::zeros((1, dim)),
            var: Matrix::ones((1, dim)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BnCache {
    xhat: Matrix,
    inv_std: Matrix,
    /// Statistics after this batch's momentum update (train mode only).
    pub updated: Option<BnStats>,
}

pub fn batchnorm_forward(
    x: &Matrix,
    gamma: &Matrix,
    beta: &Matrix,
    stats: &BnStats,
    mode: Mode,
) -> Result<(Matrix, BnCache)> {
    let d = x.ncols();
    check_shapes(
        "batchnorm",
        gamma.dim() == (1, d) && beta.dim() == (1, d),
        || {
            format!(
                "x {:?}, gamma {:?}, beta {:?}",
                x.dim(),
                gamma.dim(),
                beta.dim()
            )
        },
    )?;
    let (mean, var, updated) = match mode {
        Mode::Train => {
            let n = x.nrows();
            if n < 2 {
                return Err(Error::InvalidArgument(
                    "batch normalization needs a batch of at least 2 in train mode".into(),
                ));
            }
            let mean = x.mean_axis(Axis(0)).unwrap().insert_axis(Axis(0));
            let centered = x - &mean;
            let var = (&centered * &centered)
                .mean_axis(Axis(0))
                .unwrap()
                .insert_axis(Axis(0));
            let updated = BnStats {
                mean: &stats.mean * BN_MOMENTUM + &mean * (1.0 - BN_MOMENTUM),
                var: &stats.var * BN_MOMENTUM + &var * (1.0 - BN_MOMENTUM),
            };
            (mean, var, Some(updated))
        }
        Mode::Infer => (stats.mean.clone(), stats.var.clone(), None),
    };
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
    let xhat = (x - &mean) * &inv_std;
    let y = &xhat * gamma + beta;
    Ok((
        y,
        BnCache {
            xhat,
            inv_std,
            updated,
        },
    ))
}

pub struct BnGrads {
    pub dx: Matrix,
    pub dgamma: Matrix,
    pub dbeta: Matrix,
}

/// Train-mode gradient (batch statistics depend on `x`).
pub fn batchnorm_backward(cache: &BnCache, gamma: &Matrix, dy: &Matrix) -> BnGrads {
    let n = dy.nrows() as f64;
    let dgamma = (dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    let dbeta = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * gamma;
    let sum_dxhat = dxhat.sum_axis(Axis(0)).insert_axis(Axis(0));
    let sum_dxhat_xhat = (&dxhat * &cache.xhat)
        .sum_axis(Axis(0))
        .insert_axis(Axis(0));
    let dx = (&dxhat * n - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat) * &cache.inv_std / n;
    BnGrads { dx, dgamma, dbeta }
}

/// Inverted-dropout mask: kept units scaled by `1 / (1 - p)`. `None` when the
/// layer is the identity (infer mode or `p == 0`).
pub fn dropout_mask(
    rows: usize,
    cols: usize,
    p: f64,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Option<Matrix> {
    if mode == Mode::Infer || p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(Matrix::from_shape_fn((rows, cols), |_| {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    }))
}

/// Applies [`dropout_mask`] to `x` with a mask drawn from `seed`.
pub fn dropout(x: &Matrix, p: f64, mode: Mode, seed: u64) -> Matrix {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match dropout_mask(x.nrows(), x.ncols(), p, mode, &mut rng) {
        Some(m) => x * &m,
        None => x.clone(),
    }
}
