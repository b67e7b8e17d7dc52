//! Stratified K-fold validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::ModelSpec;
use super::run::train_holdout;
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::eval::{classification_report, ClassReport, ConfusionMatrix};
use crate::features::{ClassLabel, LabeledDataset, NUM_CLASSES};

/// Fold index of every row. Rows of each class are shuffled, then dealt
/// round-robin with one counter running across classes, so fold sizes differ
/// by at most one.
pub fn stratified_folds(labels: &[ClassLabel], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    for (c, rows) in by_class.iter().enumerate() {
        if !rows.is_empty() && rows.len() < k {
            return Err(Error::InvalidArgument(format!(
                "class {} has {} rows, fewer than k = {k}",
                ClassLabel::ALL[c],
                rows.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut counter = 0;
    for rows in &mut by_class {
        rows.shuffle(&mut rng);
        for &r in rows.iter() {
            fold[r] = counter % k;
            counter += 1;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub grabbing_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldReport {
    pub folds: Vec<FoldMetrics>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_weighted_f1: f64,
    pub mean_grabbing_f1: f64,
    /// Report over the summed confusion matrices of all folds.
    pub pooled: ClassReport,
    pub pooled_confusion: ConfusionMatrix,
}

fn mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    v.sum::<f64>() / n
}

/// Trains one model per fold on the other `k - 1` folds and scores it on the
/// held-out fold.
pub fn kfold_validate(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    ds: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<KFoldReport> {
    let assignment = stratified_folds(&ds.labels, k, seed)?;
    let mut folds = Vec::with_capacity(k);
    let mut pooled = vec![vec![0u64; spec.num_classes]; spec.num_classes];
    for f in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..ds.len()).partition(|&r| assignment[r] == f);
        let fold_cfg = TrainConfig {
            seed: cfg.seed.wrapping_add(f as u64),
            ..cfg.clone()
        };
        let run = train_holdout(spec, &fold_cfg, ds, &train, &test)?;
        let ev = &run.evaluation;
        for (dst, src) in pooled.iter_mut().zip(&ev.confusion.counts) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        log::info!("fold {f}: accuracy {:.4}", ev.report.accuracy);
        folds.push(FoldMetrics {
            fold: f,
            n_test: ev.truth.len(),
            accuracy: ev.report.accuracy,
            weighted_f1: ev.report.weighted_avg.f1,
            grabbing_f1: ev.report.class(ClassLabel::Grabbing).f1,
        });
    }
    let mean_accuracy = mean(folds.iter().map(|f| f.accuracy));
    let std_accuracy = mean(folds.iter().map(|f| (f.accuracy - mean_accuracy).powi(2))).sqrt();
    let pooled_confusion = ConfusionMatrix::from_counts(pooled)?;
    Ok(KFoldReport {
        mean_weighted_f1: mean(folds.iter().map(|f| f.weighted_f1)),
        mean_grabbing_f1: mean(folds.iter().map(|f| f.grabbing_f1)),
        mean_accuracy,
        std_accuracy,
        pooled: classification_report(&pooled_confusion, None)?,
        pooled_confusion,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(counts: &[usize]) -> Vec<ClassLabel> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(ClassLabel::ALL[c], n))
            .collect()
    }

    #[test]
    fn hundred_rows_five_folds() {
        let y = labels(&[20, 20, 20, 20, 20]);
        let folds = stratified_folds(&y, 5, 3).unwrap();
        for f in 0..5 {
            assert_eq!(folds.iter().filter(|&&x| x == f).count(), 20);
        }
        assert_eq!(folds, stratified_folds(&y, 5, 3).unwrap());
        assert_ne!(folds, stratified_folds(&y, 5, 4).unwrap());
    }

    #[test]
    fn too_few_rows_in_a_class() {
        let y = labels(&[10, 4, 0, 10, 10]);
        assert!(stratified_folds(&y, 5, 0).is_err());
        assert!(stratified_folds(&y, 4, 0).is_ok());
        assert!(stratified_folds(&y, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(
            counts in proptest::collection::vec(5usize..40, 5),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let y = labels(&counts);
            let folds = stratified_folds(&y, k, seed).unwrap();
            prop_assert_eq!(folds.len(), y.len());
            let sizes: Vec<usize> = (0..k).map(|f| folds.iter().filter(|&&x| x == f).count()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for c in ClassLabel::ALL {
                let per: Vec<usize> = (0..k)
                    .map(|f| y.iter().zip(&folds).filter(|(l, x)| **l == c && **x == f).count())
                    .collect();
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
        }
    }
}
