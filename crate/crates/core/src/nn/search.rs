//! Random hyperparameter search for the recurrent classifier.

use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::ModelSpec;
use super::sequence::SeqData;
use super::train::{train, Classifier, History, TrainConfig};
use crate::error::{Error, Result};
use crate::features::fmt_sig9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Inclusive.
    pub rnn_units: (usize, usize),
    /// Inclusive.
    pub rnn_layers: (usize, usize),
    pub dropout_p: (f64, f64),
    /// Sampled log-uniformly.
    pub learning_rate: (f64, f64),
    pub batch_sizes: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            rnn_units: (32, 256),
            rnn_layers: (1, 2),
            dropout_p: (0.0, 0.5),
            learning_rate: (1e-4, 1e-2),
            batch_sizes: vec![32, 64, 128],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rnn_units.0 >= 1
            && self.rnn_units.0 <= self.rnn_units.1
            && self.rnn_layers.0 >= 1
            && self.rnn_layers.0 <= self.rnn_layers.1
            && 0.0 <= self.dropout_p.0
            && self.dropout_p.0 <= self.dropout_p.1
            && self.dropout_p.1 < 1.0
            && 0.0 < self.learning_rate.0
            && self.learning_rate.0 <= self.learning_rate.1
            && !self.batch_sizes.is_empty()
            && !self.batch_sizes.contains(&0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid search space {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub rnn_units: usize,
    pub rnn_layers: usize,
    pub dropout_p: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl TrialParams {
    pub fn apply(&self, spec: &ModelSpec, cfg: &TrainConfig) -> (ModelSpec, TrainConfig) {
        (
            ModelSpec {
                rnn_units: self.rnn_units,
                rnn_layers: self.rnn_layers,
                dropout_p: self.dropout_p,
                ..spec.clone()
            },
            TrainConfig {
                learning_rate: self.learning_rate,
                batch_size: self.batch_size,
                ..cfg.clone()
            },
        )
    }
}

/// `budget` configurations drawn from one stream seeded with `seed`.
pub fn sample_trials(space: &SearchSpace, budget: usize, seed: u64) -> Result<Vec<TrialParams>> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (space.learning_rate.0.ln(), space.learning_rate.1.ln());
    Ok((0..budget)
        .map(|_| TrialParams {
            rnn_units: rng.random_range(space.rnn_units.0..=space.rnn_units.1),
            rnn_layers: rng.random_range(space.rnn_layers.0..=space.rnn_layers.1),
            dropout_p: if space.dropout_p.0 < space.dropout_p.1 {
                rng.random_range(space.dropout_p.0..space.dropout_p.1)
            } else {
                space.dropout_p.0
            },
            learning_rate: if lo < hi {
                rng.random_range(lo..hi).exp()
            } else {
                lo.exp()
            },
            batch_size: *space.batch_sizes.choose(&mut rng).expect("non-empty"),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrialOutcome {
    Completed {
        val_accuracy: f64,
        val_loss: f64,
        best_epoch: usize,
    },
    Diverged {
        epoch: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: TrialParams,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub trials: Vec<Trial>,
    /// Index into `trials` of the winner.
    pub best: usize,
    pub spec: ModelSpec,
    pub config: TrainConfig,
    pub classifier: Classifier,
    pub history: History,
}

impl SearchResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// Trains every sampled configuration (trial `i` uses training seed
/// `cfg.seed + i`) and keeps the one with the highest validation accuracy;
/// ties go to the lower validation loss, then the earlier trial.
#[allow(clippy::too_many_arguments)]
pub fn random_search(
    space: &SearchSpace,
    budget: usize,
    base_spec: &ModelSpec,
    base_cfg: &TrainConfig,
    train_set: &SeqData,
    val_set: &SeqData,
    labels: &[String],
    seed: u64,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(Error::InvalidArgument("search budget must be >= 1".into()));
    }
    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(usize, f64, f64, ModelSpec, TrainConfig, Classifier, History)> = None;
    for (index, params) in sample_trials(space, budget, seed)?.into_iter().enumerate() {
        let (spec, mut cfg) = params.apply(base_spec, base_cfg);
        cfg.seed = base_cfg.seed.wrapping_add(index as u64);
        let outcome = match train(&spec, train_set, val_set, &cfg, labels) {
            Ok((clf, history)) => {
                let (val_loss, val_accuracy) = clf.evaluate(val_set)?;
                let better = best.as_ref().is_none_or(|(_, acc, loss, ..)| {
                    val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss)
                });
                let best_epoch = history.best_epoch;
                if better {
                    best = Some((index, val_accuracy, val_loss, spec, cfg, clf, history));
                }
                TrialOutcome::Completed {
                    val_accuracy,
                    val_loss,
                    best_epoch,
                }
            }
            Err(Error::Diverged { epoch }) => TrialOutcome::Diverged { epoch },
            Err(e) => return Err(e),
        };
        log::info!("trial {index}: {params:?} -> {outcome:?}");
        trials.push(Trial {
            index,
            params,
            outcome,
        });
    }
    match best {
        Some((best, _, _, spec, config, classifier, history)) => Ok(SearchResult {
            trials,
            best,
            spec,
            config,
            classifier,
            history,
        }),
        None => Err(Error::AllTrialsDiverged(
            trials
                .iter()
                .map(|t| format!("trial {}: {:?}", t.index, t.outcome))
                .collect::<Vec<_>>()
                .join("; "),
        )),
    }
}

pub const TRIALS_CSV_HEADER: [&str; 10] = [
    "trial",
    "rnn_units",
    "rnn_layers",
    "dropout_p",
    "learning_rate",
    "batch_size",
    "status",
    "val_accuracy",
    "val_loss",
    "best_epoch",
];

/// One row per trial; diverged trials leave the score columns empty.
pub fn write_trials_csv<W: Write>(trials: &[Trial], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIALS_CSV_HEADER)?;
    for t in trials {
        let p = &t.params;
        let (status, acc, loss, epoch) = match &t.outcome {
            TrialOutcome::Completed {
                val_accuracy,
                val_loss,
                best_epoch,
            } => (
                "ok".to_string(),
                fmt_sig9(*val_accuracy),
                fmt_sig9(*val_loss),
                best_epoch.to_string(),
            ),
            TrialOutcome::Diverged { epoch } => (
                format!("diverged@{epoch}"),
                String::new(),
                String::new(),
                String::new(),
            ),
        };
        w.write_record([
            t.index.to_string(),
            p.rnn_units.to_string(),
            p.rnn_layers.to_string(),
            fmt_sig9(p.dropout_p),
            fmt_sig9(p.learning_rate),
            p.batch_size.to_string(),
            status,
            acc,
            loss,
            epoch,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ClassLabel;
    use crate::nn::testing::random_matrix;

    fn data(n: usize, seed: u64) -> SeqData {
        let mut x = random_matrix(n, 8, seed);
        let y: Vec<usize> = (0..n).map(|i| i % 3).collect();
        for (i, &c) in y.iter().enumerate() {
            x[[i, c]] += 2.0;
        }
        SeqData::from_parts(vec![x], y).unwrap()
    }

    fn small_space() -> SearchSpace {
        SearchSpace {
            rnn_units: (2, 8),
            ..Default::default()
        }
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            ..Default::default()
        }
    }

    #[test]
    fn samples_stay_in_space() {
        let space = SearchSpace::default();
        let trials = sample_trials(&space, 200, 1).unwrap();
        for t in &trials {
            assert!((32..=256).contains(&t.rnn_units));
            assert!((1..=2).contains(&t.rnn_layers));
            assert!((0.0..0.5).contains(&t.dropout_p));
            assert!((1e-4..1e-2).contains(&t.learning_rate));
            assert!([32, 64, 128].contains(&t.batch_size));
        }
        // log-uniform: about half the draws below the geometric midpoint 1e-3
        let below = trials.iter().filter(|t| t.learning_rate < 1e-3).count();
        assert!((70..130).contains(&below), "{below}");
        assert_eq!(trials, sample_trials(&space, 200, 1).unwrap());
    }

    #[test]
    fn budget_one_returns_that_trial() {
        let (tr, va) = (data(60, 1), data(20, 2));
        let r = random_search(
            &small_space(),
            1,
            &ModelSpec::birnn(4, 1, 1),
            &cfg(),
            &tr,
            &va,
            &ClassLabel::names(),
            5,
        )
        .unwrap();
        assert_eq!(r.trials.len(), 1);
        assert_eq!(r.best, 0);
        assert_eq!(r.spec.rnn_units, r.trials[0].params.rnn_units);
        assert!(random_search(
            &small_space(),
            0,
            &ModelSpec::birnn(4, 1, 1),
            &cfg(),
            &tr,
            &va,
            &ClassLabel::names(),
            5
        )
        .is_err());
    }

    #[test]
    fn winner_is_argmax_and_deterministic() {
        let (tr, va) = (data(60, 3), data(30, 4));
        let run = || {
            random_search(
                &small_space(),
                4,
                &ModelSpec::birnn(4, 1, 1),
                &cfg(),
                &tr,
                &va,
                &ClassLabel::names(),
                9,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.best, b.best);
        let best_acc = match a.best_trial().outcome {
            TrialOutcome::Completed { val_accuracy, .. } => val_accuracy,
            _ => unreachable!(),
        };
        for t in &a.trials {
            if let TrialOutcome::Completed { val_accuracy, .. } = t.outcome {
                assert!(best_acc >= val_accuracy);
            }
        }
        let mut buf = Vec::new();
        write_trials_csv(&a.trials, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("trial,rnn_units,"));
    }

    #[test]
    fn all_diverged_is_an_error() {
        let mut tr = data(20, 5);
        tr.steps[0] *= 1e150;
        let space = SearchSpace {
            learning_rate: (1e300, 1e300),
            ..small_space()
        };
        let c = TrainConfig {
            standardize_features: false,
            ..cfg()
        };
        let err = random_search(
            &space,
            2,
            &ModelSpec::birnn(3, 1, 1),
            &c,
            &tr,
            &tr,
            &ClassLabel::names(),
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::AllTrialsDiverged(_)), "{err}");
    }
}
