//! Turning dataset rows into model inputs.
//!
//! Rows of one episode are ordered by target index; the sequence ending at a
//! row is that row and the `L - 1` rows before it in the same episode, and it
//! takes the row's label. Sequences never span episodes. Rows with a shorter
//! history are left-padded with the episode's first row, so every row yields
//! exactly one sample whatever `L` is.

use std::collections::HashMap;

use ndarray::Axis;

use super::Matrix;
use crate::error::{Error, Result};
use crate::features::{LabeledDataset, FEATURE_DIM};

/// Model-ready samples: one `N x input_dim` matrix per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqData {
    pub steps: Vec<Matrix>,
    pub labels: Vec<usize>,
    /// Dataset row each sample ends at.
    pub rows: Vec<usize>,
}

impl SeqData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn seq_length(&self) -> usize {
        self.steps.len()
    }

    pub fn input_dim(&self) -> usize {
        self.steps.first().map_or(0, |m| m.ncols())
    }

    /// Samples at positions `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> SeqData {
        SeqData {
            steps: self.steps.iter().map(|m| m.select(Axis(0), idx)).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
        }
    }

    /// Builds samples from raw matrices (all steps must agree in shape).
    pub fn from_parts(steps: Vec<Matrix>, labels: Vec<usize>) -> Result<Self> {
        let n = labels.len();
        if steps.is_empty()
            || steps
                .iter()
                .any(|m| m.nrows() != n || m.ncols() != steps[0].ncols())
        {
            return Err(Error::DimensionMismatch(format!(
                "{} steps do not all have {n} rows of equal width",
                steps.len()
            )));
        }
        Ok(Self {
            steps,
            labels,
            rows: (0..n).collect(),
        })
    }

    /// Sequences of length `seq_length` ending at each of `rows`, in the order
    /// given.
    pub fn from_rows(ds: &LabeledDataset, seq_length: usize, rows: &[usize]) -> Result<Self> {
        let windows = episode_windows(ds, seq_length)?;
        let picked: Vec<&Vec<usize>> = rows
            .iter()
            .map(|&r| {
                windows.get(r).ok_or_else(|| {
                    Error::InvalidArgument(format!("row {r} outside dataset of {}", ds.len()))
                })
            })
            .collect::<Result<_>>()?;
        let n = picked.len();
        let mut steps = vec![Matrix::zeros((n, FEATURE_DIM)); seq_length];
        for (i, w) in picked.iter().enumerate() {
            for (t, &r) in w.iter().enumerate() {
                let f = ds.features[r].to_array();
                steps[t].row_mut(i).assign(&ndarray::ArrayView1::from(&f));
            }
        }
        Ok(Self {
            steps,
            labels: picked
                .iter()
                .map(|w| ds.labels[w[seq_length - 1]].index())
                .collect(),
            rows: picked.iter().map(|w| w[seq_length - 1]).collect(),
        })
    }

    /// One sample per dataset row.
    pub fn from_dataset(ds: &LabeledDataset, seq_length: usize) -> Result<Self> {
        let all: Vec<usize> = (0..ds.len()).collect();
        Self::from_rows(ds, seq_length, &all)
    }
}

/// For each dataset row, the row indices of the length-`seq_length`
/// sequence ending at it (left-padded with the episode's first row).
pub fn episode_windows(ds: &LabeledDataset, seq_length: usize) -> Result<Vec<Vec<usize>>> {
    if seq_length == 0 {
        return Err(Error::InvalidArgument("seq_length must be >= 1".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, p) in ds.provenance.iter().enumerate() {
        groups
            .entry(p.episode_id.as_str())
            .or_insert_with(|| {
                order.push(p.episode_id.as_str());
                Vec::new()
            })
            .push(i);
    }
    let mut out = vec![Vec::new(); ds.len()];
    for id in order {
        let rows = groups.get_mut(id).expect("grouped above");
        rows.sort_by_key(|&r| (ds.provenance[r].target_index, r));
        for end in 0..rows.len() {
            out[rows[end]] = (0..seq_length)
                .map(|k| rows[(end + k + 1).saturating_sub(seq_length)])
                .collect();
        }
    }
    Ok(out)
}
