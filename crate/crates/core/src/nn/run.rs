//! Hold-out training runs on a feature dataset: split, train with an inner
//! validation carve-out for early stopping, score on the held-out rows.

use super::model::ModelSpec;
use super::sequence::SeqData;
use super::train::{train, Classifier, History, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{classification_report, confusion_matrix, ClassReport, ConfusionMatrix};
use crate::features::{stratified_split_indices, ClassLabel, LabeledDataset};

/// Share of the training rows held back to drive early stopping.
pub const VALIDATION_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub report: ClassReport,
    pub truth: Vec<usize>,
    pub predicted: Vec<usize>,
    /// Dataset row of each scored sample.
    pub rows: Vec<usize>,
}

pub fn evaluate_classifier(clf: &Classifier, data: &SeqData) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let pred = clf.predict(&data.steps)?;
    let k = clf.spec().num_classes;
    let confusion = confusion_matrix(&data.labels, &pred.labels, k)?;
    let names = (clf.labels.len() == k).then_some(clf.labels.as_slice());
    let report = classification_report(&confusion, names)?;
    Ok(Evaluation {
        confusion,
        report,
        truth: data.labels.clone(),
        predicted: pred.labels,
        rows: data.rows.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct Holdout {
    pub classifier: Classifier,
    pub history: History,
    pub evaluation: Evaluation,
    pub n_train: usize,
    pub n_val: usize,
}

/// Splits `train_rows` into fit/validation parts (stratified,
/// [`VALIDATION_FRACTION`]), trains, and evaluates on `test_rows`.
pub fn train_holdout(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    ds: &LabeledDataset,
    train_rows: &[usize],
    test_rows: &[usize],
) -> Result<Holdout> {
    let (fit_rows, val_rows) = carve_validation(ds, train_rows, cfg.seed)?;
    let seq = spec.steps();
    let fit = SeqData::from_rows(ds, seq, &fit_rows)?;
    let val = SeqData::from_rows(ds, seq, &val_rows)?;
    let test = SeqData::from_rows(ds, seq, test_rows)?;
    if fit.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "sequence length {seq} leaves {} / {} / {} train / val / test samples",
            fit.len(),
            val.len(),
            test.len()
        )));
    }
    let mut seen = [false; crate::features::NUM_CLASSES];
    fit.labels
        .iter()
        .chain(&val.labels)
        .for_each(|&y| seen[y] = true);
    if let Some(&y) = test.labels.iter().find(|&&y| !seen[y]) {
        return Err(Error::InvalidArgument(format!(
            "class {} is absent from the training split",
            ClassLabel::ALL[y]
        )));
    }
    let (classifier, history) = train(spec, &fit, &val, cfg, &ClassLabel::names())?;
    let evaluation = evaluate_classifier(&classifier, &test)?;
    Ok(Holdout {
        classifier,
        history,
        evaluation,
        n_train: fit.len(),
        n_val: val.len(),
    })
}

/// `(fit_rows, val_rows)` as a stratified split of `train_rows`.
pub fn carve_validation(
    ds: &LabeledDataset,
    train_rows: &[usize],
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let labels: Vec<ClassLabel> = train_rows.iter().map(|&r| ds.labels[r]).collect();
    let (fit, val) = stratified_split_indices(&labels, VALIDATION_FRACTION, seed ^ 0x5A11_D000)?;
    Ok((
        fit.into_iter().map(|i| train_rows[i]).collect(),
        val.into_iter().map(|i| train_rows[i]).collect(),
    ))
}
