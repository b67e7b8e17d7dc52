//! Keyframes, predictive windows and the statistical-kinematic feature vector.
//!
//! The pipeline runs per episode:
//!
//! 1. [`select_keyframes`] keeps frames that are both sharp (Laplacian
//!    variance) and changing (frame-difference energy), caching the hand
//!    centroid, hand-object distance and contact flag of each.
//! 2. [`slide_windows`] cuts the keyframe series into `N`-keyframe contexts
//!    labelled with the state of the following keyframe.
//! 3. [`window_feature_vector`] condenses a context into eight numbers.
//!
//! [`build_dataset`] chains the three over a corpus.

mod dataset;
mod keyframes;
pub mod manifest;
mod window;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dataset::{
    build_dataset, fmt_sig9, read_features_csv, stratified_split, stratified_split_indices,
    write_features_csv, LabeledDataset, Provenance, FEATURE_CSV_HEADER,
};
pub use keyframes::{select_keyframes, KeyframeSeries, KeyframeSignal};
pub use window::{
    contact_metrics, linear_trend, slide_windows, window_feature_vector, PredictiveWindow,
};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Raster};

/// Atomic interaction state. Discriminants are the class indices used by the
/// models and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Approaching = 0,
    Grabbing = 1,
    Holding = 2,
    Releasing = 3,
    Unknown = 4,
}

pub const NUM_CLASSES: usize = 5;

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::Approaching,
        ClassLabel::Grabbing,
        ClassLabel::Holding,
        ClassLabel::Releasing,
        ClassLabel::Unknown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Approaching => "approaching",
            ClassLabel::Grabbing => "grabbing",
            ClassLabel::Holding => "holding",
            ClassLabel::Releasing => "releasing",
            ClassLabel::Unknown => "unknown",
        }
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|c| c.name().to_string()).collect()
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown class label {s:?}")))
    }
}

/// A mask-annotated frame sequence with per-frame labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub episode_id: String,
    pub frames: Vec<Raster>,
    pub hand_masks: Vec<BinaryMask>,
    pub object_masks: Vec<BinaryMask>,
    pub labels: Vec<ClassLabel>,
}

impl Episode {
    pub fn new(
        episode_id: impl Into<String>,
        frames: Vec<Raster>,
        hand_masks: Vec<BinaryMask>,
        object_masks: Vec<BinaryMask>,
        labels: Vec<ClassLabel>,
    ) -> Result<Self> {
        let ep = Self {
            episode_id: episode_id.into(),
            frames,
            hand_masks,
            object_masks,
            labels,
        };
        ep.validate()?;
        Ok(ep)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.frames.len();
        if n == 0 {
            return Err(Error::InvalidArgument(format!(
                "episode {} has no frames",
                self.episode_id
            )));
        }
        if self.hand_masks.len() != n || self.object_masks.len() != n || self.labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "episode {}: {} frames, {} hand masks, {} object masks, {} labels",
                self.episode_id,
                n,
                self.hand_masks.len(),
                self.object_masks.len(),
                self.labels.len()
            )));
        }
        let (w, h) = (self.frames[0].width(), self.frames[0].height());
        let same = |ww: usize, hh: usize| ww == w && hh == h;
        for i in 0..n {
            if !same(self.frames[i].width(), self.frames[i].height())
                || !same(self.hand_masks[i].width(), self.hand_masks[i].height())
                || !same(self.object_masks[i].width(), self.object_masks[i].height())
            {
                return Err(Error::DimensionMismatch(format!(
                    "episode {} frame {i}: dimensions differ from {w}x{h}",
                    self.episode_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.frames[0].width(), self.frames[0].height())
    }
}

/// Thresholds and window geometry for feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Minimum Laplacian variance for a keyframe (intensity² units).
    pub sharpness_threshold: f64,
    /// Minimum mean squared difference to the previous frame.
    pub diff_threshold: f64,
    pub window_length: usize,
    pub stride: usize,
    /// Contact distance in pixels.
    pub contact_epsilon: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sharpness_threshold: 10.0,
            diff_threshold: 1.0,
            window_length: 10,
            stride: 1,
            contact_epsilon: 10.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length < 2 {
            return Err(Error::InvalidArgument("window length must be >= 2".into()));
        }
        if self.stride < 1 {
            return Err(Error::InvalidArgument("stride must be >= 1".into()));
        }
        if !(self.contact_epsilon > 0.0) {
            return Err(Error::InvalidArgument("contact epsilon must be > 0".into()));
        }
        if !(self.sharpness_threshold >= 0.0) || !(self.diff_threshold >= 0.0) {
            return Err(Error::InvalidArgument("thresholds must be >= 0".into()));
        }
        Ok(())
    }
}

pub const FEATURE_DIM: usize = 8;

/// Eight-dimensional window descriptor, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean_dist: f64,
    pub std_dist: f64,
    pub trend_dist: f64,
    pub mean_speed: f64,
    pub std_speed: f64,
    pub trend_speed: f64,
    pub contact_count: u32,
    pub contact_duration: u32,
}

impl FeatureVector {
    pub const NAMES: [&'static str; FEATURE_DIM] = [
        "mean_dist",
        "std_dist",
        "trend_dist",
        "mean_speed",
        "std_speed",
        "trend_speed",
        "contact_count",
        "contact_duration",
    ];

    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        [
            self.mean_dist,
            self.std_dist,
            self.trend_dist,
            self.mean_speed,
            self.std_speed,
            self.trend_speed,
            self.contact_count as f64,
            self.contact_duration as f64,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}
