//! Minibatch training, standardization and inference.

use std::io::Write;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::loss::{balanced_class_weights, cross_entropy, softmax};
use super::model::{ModelSpec, Network};
use super::sequence::SeqData;
use super::{Matrix, Mode};
use crate::error::{Error, Result};
use crate::features::fmt_sig9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeighting {
    Balanced,
    None,
}

impl std::fmt::Display for ClassWeighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Balanced => "balanced",
            Self::None => "none",
        })
    }
}

impl std::str::FromStr for ClassWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidArgument(format!(
                "unknown class weighting {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub class_weighting: ClassWeighting,
    pub standardize_features: bool,
    /// Stop after this many epochs without a new best validation loss.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 60,
            seed: 7,
            class_weighting: ClassWeighting::Balanced,
            standardize_features: true,
            early_stop_patience: Some(10),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(format!(
                "batch_size ({}) and epochs ({}) must be >= 1",
                self.batch_size, self.epochs
            )));
        }
        Ok(())
    }
}

/// Per-dimension z-scoring fitted on training inputs. A zero deviation is
/// stored as 1 so constant features pass through centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Statistics over every row of every step.
    pub fn fit(steps: &[Matrix]) -> Result<Self> {
        let dim = steps.first().map_or(0, |m| m.ncols());
        let n: usize = steps.iter().map(|m| m.nrows()).sum();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "cannot standardize an empty set".into(),
            ));
        }
        let mut mean = vec![0.0; dim];
        for m in steps {
            for row in m.rows() {
                for (a, v) in mean.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
        mean.iter_mut().for_each(|a| *a /= n as f64);
        let mut var = vec![0.0; dim];
        for m in steps {
            for row in m.rows() {
                for ((a, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                    *a += (v - mu) * (v - mu);
                }
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, steps: &[Matrix]) -> Result<Vec<Matrix>> {
        steps
            .iter()
            .map(|m| {
                if m.ncols() != self.mean.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "standardizer has {} dims, input has {}",
                        self.mean.len(),
                        m.ncols()
                    )));
                }
                let mut z = m.clone();
                for mut row in z.rows_mut() {
                    for ((v, mu), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                        *v = (*v - mu) / s;
                    }
                }
                Ok(z)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub optimizer_steps: usize,
    pub stopped_early: bool,
}

impl History {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    /// `epoch,train_loss,train_acc,val_loss,val_acc`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                fmt_sig9(e.train_loss),
                fmt_sig9(e.train_acc),
                fmt_sig9(e.val_loss),
                fmt_sig9(e.val_acc),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A trained network together with its input standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub network: Network,
    pub standardizer: Standardizer,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Rows sum to one.
    pub probabilities: Matrix,
    pub labels: Vec<usize>,
}

pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    m.axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

impl Classifier {
    pub fn spec(&self) -> &ModelSpec {
        &self.network.spec
    }

    /// Inference-mode class probabilities for raw (unstandardized) inputs.
    pub fn predict(&self, steps: &[Matrix]) -> Result<Prediction> {
        let xs = self.standardizer.apply(steps)?;
        let probabilities = softmax(&self.network.logits(&xs)?);
        let labels = argmax_rows(&probabilities);
        Ok(Prediction {
            probabilities,
            labels,
        })
    }

    /// Unweighted cross-entropy and accuracy on `data`.
    pub fn evaluate(&self, data: &SeqData) -> Result<(f64, f64)> {
        let xs = self.standardizer.apply(&data.steps)?;
        evaluate_standardized(&self.network, &xs, &data.labels)
    }
}

fn evaluate_standardized(net: &Network, xs: &[Matrix], labels: &[usize]) -> Result<(f64, f64)> {
    let logits = net.logits(xs)?;
    let (loss, _) = cross_entropy(&logits, labels, None)?;
    Ok((loss, accuracy(&logits, labels)))
}

fn accuracy(logits: &Matrix, labels: &[usize]) -> f64 {
    let hits = argmax_rows(logits)
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    hits as f64 / labels.len() as f64
}

/// Minibatch boundaries for one epoch. With batch normalization a trailing
/// batch of one row is merged into its predecessor.
fn batches(perm: &[usize], batch_size: usize, merge_singleton: bool) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = perm.chunks(batch_size).collect();
    if merge_singleton && out.len() >= 2 && out[out.len() - 1].len() == 1 {
        let start = perm.len() - out[out.len() - 2].len() - 1;
        out.pop();
        out.pop();
        out.push(&perm[start..]);
    }
    out
}

fn check_data(spec: &ModelSpec, data: &SeqData, what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} set is empty")));
    }
    if data.seq_length() != spec.steps() || data.input_dim() != spec.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "{what} set has {} steps of width {}, model wants {} of width {}",
            data.seq_length(),
            data.input_dim(),
            spec.steps(),
            spec.input_dim
        )));
    }
    if let Some(&y) = data.labels.iter().find(|&&y| y >= spec.num_classes) {
        return Err(Error::InvalidArgument(format!(
            "{what} label {y} out of range"
        )));
    }
    Ok(())
}

/// Trains `spec` on `train`, monitoring `val`; returns the parameters of the
/// epoch with the lowest validation loss.
pub fn train(
    spec: &ModelSpec,
    train: &SeqData,
    val: &SeqData,
    cfg: &TrainConfig,
    labels: &[String],
) -> Result<(Classifier, History)> {
    spec.validate()?;
    cfg.validate()?;
    check_data(spec, train, "training")?;
    check_data(spec, val, "validation")?;
    let standardizer = if cfg.standardize_features {
        Standardizer::fit(&train.steps)?
    } else {
        Standardizer::identity(spec.input_dim)
    };
    let xs_train = standardizer.apply(&train.steps)?;
    let xs_val = standardizer.apply(&val.steps)?;
    let weights = match cfg.class_weighting {
        ClassWeighting::Balanced => Some(balanced_class_weights(&train.labels, spec.num_classes)),
        ClassWeighting::None => None,
    };

    let mut net = Network::new(spec, cfg.seed)?;
    let mut opt = Adam::new(
        AdamConfig::with_lr(cfg.learning_rate),
        net.params.tensors().iter().map(|t| t.dim()),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7EA1_0000);
    let mut perm: Vec<usize> = (0..train.len()).collect();
    let uses_bn = !net.bn_stats.is_empty();

    let mut history = History::default();
    let mut best: Option<(f64, Network)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        perm.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut hits = 0.0;
        for idx in batches(&perm, cfg.batch_size, uses_bn) {
            let xb: Vec<Matrix> = xs_train.iter().map(|m| m.select(Axis(0), idx)).collect();
            let yb: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
            let step =
                net.loss_and_grads(&xb, &yb, weights.as_deref(), Mode::Train, Some(&mut rng))?;
            if !step.loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += step.loss * idx.len() as f64;
            hits += accuracy(&step.logits, &yb) * idx.len() as f64;
            let grads = step.grads.tensors();
            opt.step(&mut net.params.tensors_mut(), &grads);
            if uses_bn {
                net.bn_stats = step.bn_updates;
            }
            history.optimizer_steps += 1;
        }
        let (val_loss, val_acc) = evaluate_standardized(&net, &xs_val, &val.labels)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let n = train.len() as f64;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: hits / n,
            val_loss,
            val_acc,
        });
        log::debug!(
            "epoch {epoch}: train {:.4} val {val_loss:.4} acc {val_acc:.4}",
            loss_sum / n
        );
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, net.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.early_stop_patience.is_some_and(|p| since_best >= p) {
                history.stopped_early = true;
                break;
            }
        }
    }
    let (_, network) = best.expect("at least one epoch ran");
    Ok((
        Classifier {
            network,
            standardizer,
            labels: labels.to_vec(),
        },
        history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ClassLabel;
    use crate::nn::testing::random_matrix;

    fn labels() -> Vec<String> {
        ClassLabel::names()
    }

    /// Two classes separated by the sign of the first feature.
    fn separable(n: usize, seed: u64) -> SeqData {
        let mut x = random_matrix(n, 8, seed);
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        for (i, &c) in y.iter().enumerate() {
            x[[i, 0]] = if c == 0 {
                -1.0 - x[[i, 0]].abs()
            } else {
                1.0 + x[[i, 0]].abs()
            };
        }
        SeqData::from_parts(vec![x], y).unwrap()
    }

    fn small_mlp() -> ModelSpec {
        let mut s = ModelSpec::mlp(vec![16, 8]);
        s.dropout_p = 0.0;
        s.use_batchnorm = false;
        s
    }

    #[test]
    fn separable_reaches_full_train_accuracy() {
        let data = separable(64, 1);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 16,
            epochs: 50,
            early_stop_patience: None,
            ..Default::default()
        };
        let (clf, _) = train(&small_mlp(), &data, &data, &cfg, &labels()).unwrap();
        let (_, acc) = clf.evaluate(&data).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn one_epoch_step_count() {
        let data = separable(70, 2);
        let cfg = TrainConfig {
            batch_size: 32,
            epochs: 1,
            ..Default::default()
        };
        let (_, h) = train(&small_mlp(), &data, &data, &cfg, &labels()).unwrap();
        assert_eq!(h.optimizer_steps, 3);
        assert_eq!(h.epochs.len(), 1);
        let bad = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(train(&small_mlp(), &data, &data, &bad, &labels()).is_err());
    }

    #[test]
    fn batchnorm_merges_trailing_singleton() {
        let perm: Vec<usize> = (0..65).collect();
        let b = batches(&perm, 32, true);
        assert_eq!(b.iter().map(|b| b.len()).collect::<Vec<_>>(), vec![32, 33]);
        let b = batches(&perm, 32, false);
        assert_eq!(b.len(), 3);
        let data = separable(65, 3);
        let cfg = TrainConfig {
            batch_size: 32,
            epochs: 2,
            ..Default::default()
        };
        let (_, h) = train(&ModelSpec::mlp(vec![8]), &data, &data, &cfg, &labels()).unwrap();
        assert_eq!(h.optimizer_steps, 4);
    }

    #[test]
    fn same_seed_same_result() {
        let data = separable(50, 4);
        let val = separable(20, 5);
        let spec = ModelSpec::birnn(6, 1, 1);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 8,
            ..Default::default()
        };
        let (a, ha) = train(&spec, &data, &val, &cfg, &labels()).unwrap();
        let (b, hb) = train(&spec, &data, &val, &cfg, &labels()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        let other = TrainConfig { seed: 8, ..cfg };
        let (c, _) = train(&spec, &data, &val, &other, &labels()).unwrap();
        assert_ne!(a.network.params, c.network.params);
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let mut data = separable(40, 6);
        data.steps[0] *= 1e150;
        let cfg = TrainConfig {
            learning_rate: 1e150,
            standardize_features: false,
            epochs: 3,
            ..Default::default()
        };
        match train(&small_mlp(), &data, &data, &cfg, &labels()) {
            Err(Error::Diverged { epoch }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn predictions_are_distributions() {
        let data = separable(30, 7);
        let cfg = TrainConfig {
            epochs: 3,
            ..Default::default()
        };
        let (clf, _) = train(&ModelSpec::mlp(vec![8]), &data, &data, &cfg, &labels()).unwrap();
        let p = clf.predict(&data.steps).unwrap();
        for row in p.probabilities.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        assert!(clf.predict(&[random_matrix(3, 7, 0)]).is_err());
    }

    #[test]
    fn standardizer_matches_direct_zscores() {
        let a = random_matrix(20, 8, 11) * 5.0 + 3.0;
        let mut b = random_matrix(20, 8, 12);
        b.column_mut(3).fill(2.5);
        let s = Standardizer::fit(std::slice::from_ref(&a)).unwrap();
        let z = s.apply(std::slice::from_ref(&a)).unwrap();
        for j in 0..8 {
            let col: Vec<f64> = a.column(j).to_vec();
            let mu = col.iter().sum::<f64>() / 20.0;
            let sd = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / 20.0).sqrt();
            for i in 0..20 {
                assert!((z[0][[i, j]] - (a[[i, j]] - mu) / sd).abs() < 1e-12);
            }
        }
        let s = Standardizer::fit(std::slice::from_ref(&b)).unwrap();
        assert_eq!(s.std[3], 1.0);
        let z = s.apply(std::slice::from_ref(&b)).unwrap();
        assert!(z[0].column(3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn history_csv_header() {
        let h = History {
            epochs: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                train_acc: 0.75,
                val_loss: 0.25,
                val_acc: 1.0,
            }],
            best_epoch: 1,
            optimizer_steps: 1,
            stopped_early: false,
        };
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,train_loss,train_acc,val_loss,val_acc\n1,0.5,0.75,0.25,1\n"
        );
    }
}
