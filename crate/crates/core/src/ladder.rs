//! The eight-run model ladder: static MLPs, temporal recurrent models, and
//! the recurrent encoder at sequence length one.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ClassReport, ConfusionMatrix};
use crate::features::{fmt_sig9, stratified_split_indices, ClassLabel, LabeledDataset};
use crate::nn::search::{random_search, SearchSpace, Trial};
use crate::nn::sequence::SeqData;
use crate::nn::{
    evaluate_classifier, kfold_validate, run::carve_validation, train_holdout, ModelSpec,
    TrainConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Validation {
    Holdout,
    KFold,
    Search,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderEntry {
    pub model: usize,
    pub description: &'static str,
    pub spec: ModelSpec,
    pub validation: Validation,
}

impl LadderEntry {
    pub fn architecture(&self) -> &'static str {
        match self.spec.kind {
            crate::nn::ModelKind::Mlp => "MLP",
            crate::nn::ModelKind::Lstm => "LSTM",
            crate::nn::ModelKind::Birnn => "Bi-RNN",
        }
    }

    pub fn seq_len(&self) -> Option<usize> {
        self.spec
            .kind
            .is_recurrent()
            .then_some(self.spec.seq_length)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub seed: u64,
    pub test_fraction: f64,
    pub folds: usize,
    pub search_budget: usize,
    pub search_space: SearchSpace,
    pub hidden: Vec<usize>,
    pub rnn_units: usize,
    pub rnn_layers: usize,
    pub dropout_p: f64,
    pub l2_lambda: f64,
    pub train: TrainConfig,
    /// Run the entries on separate threads. Results do not depend on it.
    #[serde(default)]
    pub parallel: bool,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            test_fraction: 0.2,
            folds: 5,
            search_budget: 8,
            search_space: SearchSpace::default(),
            hidden: vec![128, 64, 32],
            rnn_units: 128,
            rnn_layers: 1,
            dropout_p: 0.3,
            l2_lambda: 1e-4,
            train: TrainConfig::default(),
            parallel: false,
        }
    }
}

/// The eight runs in ladder order.
pub fn ladder_plan(cfg: &LadderConfig) -> Vec<LadderEntry> {
    let plain_mlp = ModelSpec {
        use_batchnorm: false,
        dropout_p: 0.0,
        l2_lambda: 0.0,
        ..ModelSpec::mlp(cfg.hidden.clone())
    };
    let mlp = ModelSpec {
        dropout_p: cfg.dropout_p,
        l2_lambda: cfg.l2_lambda,
        ..ModelSpec::mlp(cfg.hidden.clone())
    };
    let rnn = |kind_lstm: bool, seq: usize| {
        let base = if kind_lstm {
            ModelSpec::lstm(cfg.rnn_units, cfg.rnn_layers, seq)
        } else {
            ModelSpec::birnn(cfg.rnn_units, cfg.rnn_layers, seq)
        };
        ModelSpec {
            dropout_p: cfg.dropout_p,
            l2_lambda: cfg.l2_lambda,
            ..base
        }
    };
    let e = |model, description, spec, validation| LadderEntry {
        model,
        description,
        spec,
        validation,
    };
    vec![
        e(1, "Baseline MLP", plain_mlp, Validation::Holdout),
        e(2, "Regularized MLP", mlp.clone(), Validation::Holdout),
        e(
            3,
            "K-fold validation of regularized MLP",
            mlp,
            Validation::KFold,
        ),
        e(
            4,
            "Unidirectional LSTM over 10 windows",
            rnn(true, 10),
            Validation::Holdout,
        ),
        e(
            5,
            "Bi-RNN over 5 windows",
            rnn(false, 5),
            Validation::Holdout,
        ),
        e(
            6,
            "K-fold validation of Bi-RNN",
            rnn(false, 5),
            Validation::KFold,
        ),
        e(
            7,
            "Bi-RNN as static encoder",
            rnn(false, 1),
            Validation::Holdout,
        ),
        e(
            8,
            "Searched static Bi-RNN",
            rnn(false, 1),
            Validation::Search,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub model: usize,
    pub description: String,
    pub architecture: String,
    pub seq_len: Option<usize>,
    pub validation: Validation,
    pub accuracy: Option<f64>,
    pub weighted_f1: Option<f64>,
    pub grabbing_f1: Option<f64>,
    pub grabbing_precision: Option<f64>,
    pub grabbing_recall: Option<f64>,
    /// `ok` or `failed: <reason>`.
    pub status: String,
    pub seconds: f64,
}

impl LadderRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Detailed output of one ladder run, for writing per-model reports.
#[derive(Debug, Clone)]
pub struct RunDetail {
    pub report: ClassReport,
    pub confusion: ConfusionMatrix,
    pub trials: Option<Vec<Trial>>,
}

#[derive(Debug, Clone)]
pub struct LadderOutcome {
    pub rows: Vec<LadderRow>,
    pub details: Vec<Option<RunDetail>>,
}

impl LadderOutcome {
    pub fn row(&self, model: usize) -> Option<&LadderRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }
}

fn run_entry(
    entry: &LadderEntry,
    cfg: &LadderConfig,
    ds: &LabeledDataset,
    train_rows: &[usize],
    test_rows: &[usize],
) -> Result<(LadderRow, RunDetail)> {
    let train_cfg = TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let mut row = LadderRow {
        model: entry.model,
        description: entry.description.to_string(),
        architecture: entry.architecture().to_string(),
        seq_len: entry.seq_len(),
        validation: entry.validation,
        accuracy: None,
        weighted_f1: None,
        grabbing_f1: None,
        grabbing_precision: None,
        grabbing_recall: None,
        status: "ok".into(),
        seconds: 0.0,
    };
    let fill = |row: &mut LadderRow, r: &ClassReport| {
        let g = r.class(ClassLabel::Grabbing);
        row.accuracy = Some(r.accuracy);
        row.weighted_f1 = Some(r.weighted_avg.f1);
        row.grabbing_f1 = Some(g.f1);
        row.grabbing_precision = Some(g.precision);
        row.grabbing_recall = Some(g.recall);
    };
    let detail = match entry.validation {
        Validation::Holdout => {
            let h = train_holdout(&entry.spec, &train_cfg, ds, train_rows, test_rows)?;
            fill(&mut row, &h.evaluation.report);
            RunDetail {
                report: h.evaluation.report,
                confusion: h.evaluation.confusion,
                trials: None,
            }
        }
        Validation::KFold => {
            let k = kfold_validate(&entry.spec, &train_cfg, ds, cfg.folds, cfg.seed)?;
            fill(&mut row, &k.pooled);
            // fold means rather than pooled values for the headline columns
            row.accuracy = Some(k.mean_accuracy);
            row.weighted_f1 = Some(k.mean_weighted_f1);
            row.grabbing_f1 = Some(k.mean_grabbing_f1);
            RunDetail {
                report: k.pooled,
                confusion: k.pooled_confusion,
                trials: None,
            }
        }
        Validation::Search => {
            let seq = entry.spec.steps();
            let (fit_rows, val_rows) = carve_validation(ds, train_rows, cfg.seed)?;
            let fit = SeqData::from_rows(ds, seq, &fit_rows)?;
            let val = SeqData::from_rows(ds, seq, &val_rows)?;
            let test = SeqData::from_rows(ds, seq, test_rows)?;
            let s = random_search(
                &cfg.search_space,
                cfg.search_budget,
                &entry.spec,
                &train_cfg,
                &fit,
                &val,
                &ClassLabel::names(),
                cfg.seed,
            )?;
            let ev = evaluate_classifier(&s.classifier, &test)?;
            fill(&mut row, &ev.report);
            RunDetail {
                report: ev.report,
                confusion: ev.confusion,
                trials: Some(s.trials),
            }
        }
    };
    Ok((row, detail))
}

/// Runs every entry of `plan` on one shared stratified train/test split.
/// A failing run is recorded in its row and the ladder continues.
pub fn run_ladder(
    ds: &LabeledDataset,
    cfg: &LadderConfig,
    plan: &[LadderEntry],
) -> Result<LadderOutcome> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let (train_rows, test_rows) =
        stratified_split_indices(&ds.labels, cfg.test_fraction, cfg.seed)?;
    let run_one = |entry: &LadderEntry| {
        let start = Instant::now();
        log::info!("model {}: {}", entry.model, entry.description);
        match run_entry(entry, cfg, ds, &train_rows, &test_rows) {
            Ok((mut row, detail)) => {
                row.seconds = start.elapsed().as_secs_f64();
                (row, Some(detail))
            }
            Err(e) => {
                log::warn!("model {} failed: {e}", entry.model);
                let row = LadderRow {
                    model: entry.model,
                    description: entry.description.to_string(),
                    architecture: entry.architecture().to_string(),
                    seq_len: entry.seq_len(),
                    validation: entry.validation,
                    accuracy: None,
                    weighted_f1: None,
                    grabbing_f1: None,
                    grabbing_precision: None,
                    grabbing_recall: None,
                    status: format!("failed: {e}"),
                    seconds: start.elapsed().as_secs_f64(),
                };
                (row, None)
            }
        }
    };
    let results: Vec<(LadderRow, Option<RunDetail>)> = if cfg.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = plan
                .iter()
                .map(|entry| scope.spawn(|| run_one(entry)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("ladder worker panicked"))
                .collect()
        })
    } else {
        plan.iter().map(run_one).collect()
    };
    let (rows, details) = results.into_iter().unzip();
    Ok(LadderOutcome { rows, details })
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "model",
    "description",
    "architecture",
    "seq_len",
    "validation",
    "accuracy",
    "weighted_f1",
    "grabbing_f1",
    "grabbing_precision",
    "grabbing_recall",
    "status",
];

/// `ladder_summary.csv`. Missing sequence lengths print as `N/A`, missing
/// metrics as empty cells. Wall time is left out so reruns are byte-identical.
pub fn write_summary_csv<W: Write>(rows: &[LadderRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    let opt = |v: Option<f64>| v.map(fmt_sig9).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.model.to_string(),
            r.description.clone(),
            r.architecture.clone(),
            r.seq_len.map_or("N/A".to_string(), |s| s.to_string()),
            format!("{:?}", r.validation).to_lowercase(),
            opt(r.accuracy),
            opt(r.weighted_f1),
            opt(r.grabbing_f1),
            opt(r.grabbing_precision),
            opt(r.grabbing_recall),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
