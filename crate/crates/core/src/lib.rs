//! Mask-based statistical-kinematic features for atomic hand-object
//! interaction states, and the classifier ladder that consumes them.
//!
//! The crate is split along the data flow:
//!
//! * [`raster`]: image primitives (sharpness, frame difference, exact EDT,
//!   centroids) and PGM I/O.
//! * [`features`]: keyframe selection, predictive windows, the 8-dimensional
//!   feature vector, dataset assembly and splitting.
//! * [`synth`]: a scripted episode generator with ground-truth labels.
//! * [`nn`]: from-scratch MLP / bidirectional LSTM models, training, search
//!   and k-fold validation.
//! * [`eval`]: confusion matrices and classification reports.
//! * [`ladder`]: the eight-model experiment plan.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod eval;
pub mod features;
pub mod hashing;
pub mod ladder;
pub mod nn;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
pub use features::ClassLabel;
