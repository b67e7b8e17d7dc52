//! JSON persistence of a trained [`Classifier`].
//!
//! Floats are written with enough digits to round-trip exactly, so a reloaded
//! classifier predicts bit-identically.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::BnStats;
use super::model::{ModelSpec, Network};
use super::train::{Classifier, Standardizer};
use super::Matrix;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    /// Row-major.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub spec: ModelSpec,
    pub labels: Vec<String>,
    pub standardization: Standardizer,
    pub params: Vec<TensorRecord>,
    pub batchnorm: Vec<RunningStats>,
}

fn row_major(m: &Matrix) -> Vec<f64> {
    m.iter().copied().collect()
}

fn matrix(shape: [usize; 2], values: Vec<f64>, what: &str) -> Result<Matrix> {
    Matrix::from_shape_vec((shape[0], shape[1]), values)
        .map_err(|e| Error::Checkpoint(format!("{what}: {e}")))
}

impl Checkpoint {
    pub fn from_classifier(clf: &Classifier) -> Self {
        let net = &clf.network;
        let params = net
            .params
            .slots()
            .into_iter()
            .zip(net.params.tensors())
            .map(|(s, t)| TensorRecord {
                name: s.name,
                shape: [s.shape.0, s.shape.1],
                values: row_major(t),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            spec: net.spec.clone(),
            labels: clf.labels.clone(),
            standardization: clf.standardizer.clone(),
            params,
            batchnorm: net
                .bn_stats
                .iter()
                .map(|s| RunningStats {
                    mean: row_major(&s.mean),
                    var: row_major(&s.var),
                })
                .collect(),
        }
    }

    /// Rebuilds the classifier, checking every tensor against the layout
    /// implied by the spec.
    pub fn into_classifier(self) -> Result<Classifier> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Checkpoint(format!(
                "schema version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut net = Network::new(&self.spec, 0)?;
        let slots = net.params.slots();
        if slots.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "spec implies {} tensors, checkpoint has {}",
                slots.len(),
                self.params.len()
            )));
        }
        for ((slot, rec), dst) in slots.iter().zip(self.params).zip(net.params.tensors_mut()) {
            if slot.name != rec.name || [slot.shape.0, slot.shape.1] != rec.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    rec.name, rec.shape, slot.name, slot.shape
                )));
            }
            *dst = matrix(rec.shape, rec.values, &rec.name)?;
        }
        if self.batchnorm.len() != net.bn_stats.len() {
            return Err(Error::Checkpoint(format!(
                "spec implies {} batchnorm layers, checkpoint has {}",
                net.bn_stats.len(),
                self.batchnorm.len()
            )));
        }
        for (dst, rec) in net.bn_stats.iter_mut().zip(self.batchnorm) {
            let d = dst.mean.ncols();
            *dst = BnStats {
                mean: matrix([1, d], rec.mean, "batchnorm mean")?,
                var: matrix([1, d], rec.var, "batchnorm var")?,
            };
        }
        let dim = self.spec.input_dim;
        if self.standardization.mean.len() != dim || self.standardization.std.len() != dim {
            return Err(Error::Checkpoint(format!(
                "standardization vectors must have {dim} entries"
            )));
        }
        Ok(Classifier {
            network: net,
            standardizer: self.standardization,
            labels: self.labels,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl Classifier {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Checkpoint::from_classifier(self).save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Checkpoint::load(path)?.into_classifier()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ClassLabel;
    use crate::nn::sequence::SeqData;
    use crate::nn::testing::random_matrix;
    use crate::nn::train::{train, TrainConfig};

    fn trained(spec: &ModelSpec) -> (Classifier, Vec<Matrix>) {
        let steps = spec.steps();
        let xs: Vec<Matrix> = (0..steps)
            .map(|t| random_matrix(40, 8, 30 + t as u64) * 4.0)
            .collect();
        let y: Vec<usize> = (0..40).map(|i| i % 5).collect();
        let data = SeqData::from_parts(xs.clone(), y).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            ..Default::default()
        };
        (
            train(spec, &data, &data, &cfg, &ClassLabel::names())
                .unwrap()
                .0,
            xs,
        )
    }

    #[test]
    fn reload_predicts_bit_identically() {
        let mut rnn = ModelSpec::birnn(5, 2, 3);
        rnn.use_batchnorm = true;
        for spec in [ModelSpec::mlp(vec![12, 6]), rnn, ModelSpec::lstm(4, 1, 2)] {
            let (clf, xs) = trained(&spec);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("ckpt.json");
            clf.save(&path).unwrap();
            let back = Classifier::load(&path).unwrap();
            assert_eq!(back, clf);
            let a = clf.predict(&xs).unwrap();
            let b = back.predict(&xs).unwrap();
            assert_eq!(a, b);
            // saving the reloaded model reproduces the bytes
            let again = dir.path().join("again.json");
            back.save(&again).unwrap();
            assert_eq!(
                std::fs::read(&path).unwrap(),
                std::fs::read(&again).unwrap()
            );
        }
    }

    #[test]
    fn rejects_inconsistent_documents() {
        let (clf, _) = trained(&ModelSpec::mlp(vec![4]));
        let ck = Checkpoint::from_classifier(&clf);

        let mut bad = ck.clone();
        bad.params[0].shape = [4, 8];
        assert!(bad.into_classifier().is_err());

        let mut bad = ck.clone();
        bad.params.pop();
        assert!(bad.into_classifier().is_err());

        let mut bad = ck.clone();
        bad.schema_version = 99;
        assert!(bad.into_classifier().is_err());

        let mut bad = ck;
        bad.standardization.mean.pop();
        assert!(bad.into_classifier().is_err());

        assert!(Checkpoint::from_json("{}").is_err());
    }
}
