//! Confusion matrices and per-class precision/recall/F1 reports.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ClassLabel;

/// `counts[true][pred]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument(
                "confusion matrix must be square and non-empty".into(),
            ));
        }
        Ok(Self { counts })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    /// CSV with a header row of class names and one row per true class.
    pub fn write_csv<W: Write>(&self, names: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(names)?;
        for row in &self.counts {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::InvalidArgument(format!(
                "label ({t}, {p}) outside 0..{k}"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Predicted-column sum was zero, precision reported as 0.
    pub precision_undefined: bool,
    /// True-row sum was zero, recall reported as 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    /// Unweighted mean over classes with support > 0.
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total_support: u64,
}

impl ClassReport {
    pub fn class(&self, label: ClassLabel) -> &ClassMetrics {
        &self.classes[label.index()]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Builds the report from a confusion matrix; `names` gives row labels and
/// defaults to the [`ClassLabel`] names when the matrix has five classes.
pub fn classification_report(
    cm: &ConfusionMatrix,
    names: Option<&[String]>,
) -> Result<ClassReport> {
    let k = cm.k();
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    let names: Vec<String> = match names {
        Some(n) if n.len() == k => n.to_vec(),
        Some(n) => {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {k} classes",
                n.len()
            )))
        }
        None if k == ClassLabel::ALL.len() => ClassLabel::names(),
        None => (0..k).map(|i| format!("class_{i}")).collect(),
    };

    let mut classes = Vec::with_capacity(k);
    for c in 0..k {
        let tp = cm.counts[c][c];
        let support = cm.row_sum(c);
        let (precision, precision_undefined) = ratio(tp, cm.col_sum(c));
        let (recall, recall_undefined) = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        classes.push(ClassMetrics {
            name: names[c].clone(),
            precision,
            recall,
            f1,
            support,
            precision_undefined,
            recall_undefined,
        });
    }

    let present: Vec<&ClassMetrics> = classes.iter().filter(|m| m.support > 0).collect();
    let np = present.len() as f64;
    let macro_avg = Averages {
        precision: present.iter().map(|m| m.precision).sum::<f64>() / np,
        recall: present.iter().map(|m| m.recall).sum::<f64>() / np,
        f1: present.iter().map(|m| m.f1).sum::<f64>() / np,
    };
    let tw = total as f64;
    let weighted_avg = Averages {
        precision: classes
            .iter()
            .map(|m| m.precision * m.support as f64)
            .sum::<f64>()
            / tw,
        recall: classes
            .iter()
            .map(|m| m.recall * m.support as f64)
            .sum::<f64>()
            / tw,
        f1: classes.iter().map(|m| m.f1 * m.support as f64).sum::<f64>() / tw,
    };
    Ok(ClassReport {
        classes,
        accuracy: cm.trace() as f64 / tw,
        macro_avg,
        weighted_avg,
        total_support: total,
    })
}

/// Two decimals, ties rounded away from zero.
pub fn round2(v: f64) -> String {
    format!("{:.2}", (v * 100.0).round() / 100.0)
}

/// Fixed-width text table in the usual precision/recall/f1-score/support
/// layout.
pub fn render_report(report: &ClassReport) -> String {
    let width = report
        .classes
        .iter()
        .map(|c| c.name.len())
        .chain(std::iter::once("weighted avg".len()))
        .max()
        .unwrap_or(12);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>width$}  {:>9} {:>9} {:>9} {:>9}",
        "", "precision", "recall", "f1-score", "support"
    );
    s.push('\n');
    for c in &report.classes {
        let _ = writeln!(
            s,
            "{:>width$}  {:>9} {:>9} {:>9} {:>9}",
            c.name,
            round2(c.precision),
            round2(c.recall),
            round2(c.f1),
            c.support
        );
    }
    s.push('\n');
    let _ = writeln!(
        s,
        "{:>width$}  {:>9} {:>9} {:>9} {:>9}",
        "accuracy",
        "",
        "",
        round2(report.accuracy),
        report.total_support
    );
    for (name, a) in [
        ("macro avg", report.macro_avg),
        ("weighted avg", report.weighted_avg),
    ] {
        let _ = writeln!(
            s,
            "{:>width$}  {:>9} {:>9} {:>9} {:>9}",
            name,
            round2(a.precision),
            round2(a.recall),
            round2(a.f1),
            report.total_support
        );
    }
    s
}
