use std::collections::BTreeMap;
use std::io::{Read, Write};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    select_keyframes, slide_windows, window_feature_vector, ClassLabel, Episode, FeatureVector,
    PipelineConfig,
};
use crate::error::{Error, Result};

pub const FEATURE_CSV_HEADER: [&str; 11] = [
    "mean_dist",
    "std_dist",
    "trend_dist",
    "mean_speed",
    "std_speed",
    "trend_speed",
    "contact_count",
    "contact_duration",
    "label",
    "episode_id",
    "target_index",
];

/// Where a row came from: episode and position of the target keyframe in
/// that episode's keyframe series.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub episode_id: String,
    pub target_index: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<ClassLabel>,
    pub provenance: Vec<Provenance>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, fv: FeatureVector, label: ClassLabel, prov: Provenance) {
        self.features.push(fv);
        self.labels.push(label);
        self.provenance.push(prov);
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledDataset {
        let mut out = LabeledDataset::default();
        for &r in rows {
            out.push(self.features[r], self.labels[r], self.provenance[r].clone());
        }
        out
    }

    pub fn class_counts(&self) -> [usize; super::NUM_CLASSES] {
        let mut counts = [0; super::NUM_CLASSES];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }
}

/// Runs keyframe selection, windowing and feature extraction over every
/// episode, concatenating rows in input order.
pub fn build_dataset(episodes: &[Episode], cfg: &PipelineConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let mut ds = LabeledDataset::default();
    for ep in episodes {
        let series = select_keyframes(ep, cfg)?;
        let windows = slide_windows(&series, cfg, ep);
        if windows.is_empty() {
            warn!(
                "episode {}: {} keyframes, too short for a {}-keyframe window; skipped",
                ep.episode_id,
                series.len(),
                cfg.window_length
            );
            continue;
        }
        for w in &windows {
            ds.push(
                window_feature_vector(w)?,
                w.target_label,
                Provenance {
                    episode_id: ep.episode_id.clone(),
                    target_index: w.target_keyframe,
                },
            );
        }
    }
    Ok(ds)
}

/// Per-class shuffled split; each class contributes
/// `round(count * test_fraction)` rows to the test partition. Both partitions
/// keep the input row order.
pub fn stratified_split(
    ds: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = stratified_split_indices(&ds.labels, test_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Index form of [`stratified_split`]: `(train_rows, test_rows)`, both sorted.
pub fn stratified_split_indices(
    labels: &[ClassLabel],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: BTreeMap<ClassLabel, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(*l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for rows in by_class.values_mut() {
        rows.shuffle(&mut rng);
        let n_test = (rows.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// `%.9g`-style rendering: 9 significant digits, trailing zeros trimmed.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn write_features_csv<W: Write>(ds: &LabeledDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURE_CSV_HEADER)?;
    for i in 0..ds.len() {
        let f = &ds.features[i];
        let p = &ds.provenance[i];
        w.write_record([
            fmt_sig9(f.mean_dist),
            fmt_sig9(f.std_dist),
            fmt_sig9(f.trend_dist),
            fmt_sig9(f.mean_speed),
            fmt_sig9(f.std_speed),
            fmt_sig9(f.trend_speed),
            f.contact_count.to_string(),
            f.contact_duration.to_string(),
            ds.labels[i].name().to_string(),
            p.episode_id.clone(),
            p.target_index.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a features CSV; `source` names the input in error messages.
pub fn read_features_csv<R: Read>(input: R, source: &std::path::Path) -> Result<LabeledDataset> {
    let mut r = csv::Reader::from_reader(input);
    let malformed = |line: usize, msg: String| Error::Malformed {
        path: source.to_path_buf(),
        line,
        msg,
    };
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != FEATURE_CSV_HEADER {
        return Err(malformed(1, format!("unexpected header {header:?}")));
    }
    let mut ds = LabeledDataset::default();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| malformed(line, e.to_string()))?;
        if rec.len() != FEATURE_CSV_HEADER.len() {
            return Err(malformed(line, format!("{} fields", rec.len())));
        }
        let float = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|_| {
                malformed(
                    line,
                    format!("bad number {:?} in {}", &rec[j], FEATURE_CSV_HEADER[j]),
                )
            })
        };
        let int = |j: usize| -> Result<u32> {
            rec[j].parse::<u32>().map_err(|_| {
                malformed(
                    line,
                    format!("bad integer {:?} in {}", &rec[j], FEATURE_CSV_HEADER[j]),
                )
            })
        };
        let fv = FeatureVector {
            mean_dist: float(0)?,
            std_dist: float(1)?,
            trend_dist: float(2)?,
            mean_speed: float(3)?,
            std_speed: float(4)?,
            trend_speed: float(5)?,
            contact_count: int(6)?,
            contact_duration: int(7)?,
        };
        let label: ClassLabel = rec[8]
            .parse()
            .map_err(|e: Error| malformed(line, e.to_string()))?;
        let target_index = rec[10]
            .parse::<usize>()
            .map_err(|_| malformed(line, format!("bad target_index {:?}", &rec[10])))?;
        ds.push(
            fv,
            label,
            Provenance {
                episode_id: rec[9].to_string(),
                target_index,
            },
        );
    }
    Ok(ds)
}
