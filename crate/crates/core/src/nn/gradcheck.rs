//! Finite-difference verification of analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{ModelSpec, Network};
use super::{Matrix, Mode};
use crate::error::{Error, Result};

/// Denominator floor for [`max_relative_error`], so entries where both
/// gradients are essentially zero compare on absolute error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-5;

/// `max |a - n| / max(|a|, |n|, floor)` over all entries.
pub fn max_relative_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    assert_eq!(analytic.dim(), numeric.dim());
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_ERROR_FLOOR))
        .fold(0.0, f64::max)
}

/// Central-difference step.
pub const STEP: f64 = 1e-5;

/// Worst relative error between the analytic gradient of the total training
/// objective (weighted cross-entropy plus L2) and central differences, over
/// every parameter of a network initialized from `seed`. Runs in train mode;
/// dropout masks are redrawn from the same seed on every evaluation so the
/// objective is a fixed function of the parameters.
pub fn gradient_check(
    spec: &ModelSpec,
    xs: &[Matrix],
    targets: &[usize],
    class_weights: Option<&[f64]>,
    seed: u64,
) -> Result<f64> {
    if targets.is_empty() || targets.len() > 8 {
        return Err(Error::InvalidArgument(format!(
            "gradient check wants a batch of 1..=8 rows, got {}",
            targets.len()
        )));
    }
    let mut net = Network::new(spec, seed)?;
    let eval = |net: &Network| -> Result<(f64, super::model::Params)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD20F);
        let r = net.loss_and_grads(xs, targets, class_weights, Mode::Train, Some(&mut rng))?;
        Ok((r.loss, r.grads))
    };
    let (_, analytic) = eval(&net)?;
    let analytic: Vec<Matrix> = analytic.tensors().into_iter().cloned().collect();
    let mut worst: f64 = 0.0;
    for (ti, a) in analytic.iter().enumerate() {
        let mut numeric = Matrix::zeros(a.dim());
        for idx in 0..a.len() {
            let (r, c) = (idx / a.ncols(), idx % a.ncols());
            let orig = net.params.tensors()[ti][[r, c]];
            net.params.tensors_mut()[ti][[r, c]] = orig + STEP;
            let plus = eval(&net)?.0;
            net.params.tensors_mut()[ti][[r, c]] = orig - STEP;
            let minus = eval(&net)?.0;
            net.params.tensors_mut()[ti][[r, c]] = orig;
            numeric[[r, c]] = (plus - minus) / (2.0 * STEP);
        }
        worst = worst.max(max_relative_error(a, &numeric));
    }
    Ok(worst)
}
