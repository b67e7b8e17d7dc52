//! Feed-forward and recurrent classifiers trained with minibatch Adam.
//!
//! All tensors are row-major `batch x features` matrices of `f64`.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod kfold;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod run;
pub mod search;
pub mod sequence;
pub mod train;

#[cfg(test)]
pub(crate) mod testing;

pub use checkpoint::Checkpoint;
pub use gradcheck::gradient_check;
pub use kfold::{kfold_validate, stratified_folds, KFoldReport};
pub use model::{ModelKind, ModelSpec, Network};
pub use run::{evaluate_classifier, train_holdout, Evaluation, Holdout};
pub use search::{random_search, SearchSpace};
pub use sequence::SeqData;
pub use train::{train, ClassWeighting, Classifier, History, TrainConfig};

pub type Matrix = ndarray::Array2<f64>;

/// Train mode draws dropout masks and uses batch statistics; infer mode is
/// deterministic and uses running statistics.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Train,
    Infer,
}
