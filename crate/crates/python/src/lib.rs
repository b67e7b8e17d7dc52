//! Python bindings: datasets, classifiers, reports and the model ladder.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use hoi_core::eval::{classification_report as report_of, confusion_matrix, render_report};
use hoi_core::eval::{ClassReport, ConfusionMatrix};
use hoi_core::features::manifest::{read_corpus, write_episode};
use hoi_core::features::{
    build_dataset, read_features_csv, stratified_split_indices, write_features_csv, ClassLabel,
    LabeledDataset, PipelineConfig,
};
use hoi_core::ladder::{ladder_plan, run_ladder as core_run_ladder, LadderConfig};
use hoi_core::nn::{
    evaluate_classifier, train_holdout, ClassWeighting, Classifier, ModelKind, ModelSpec, SeqData,
    TrainConfig,
};
use hoi_core::raster::{euclidean_distance_transform, BinaryMask};
use hoi_core::synth::{corpus_episode_id, generate_corpus as core_generate, ScenarioConfig};
use hoi_core::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        e @ (Error::Diverged { .. } | Error::AllTrialsDiverged(_)) => {
            PyRuntimeError::new_err(e.to_string())
        }
        e => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for hoi_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn io<T>(r: std::io::Result<T>) -> PyResult<T> {
    r.map_err(|e| PyIOError::new_err(e.to_string()))
}

fn parse_label(s: &str) -> PyResult<ClassLabel> {
    s.parse().py()
}

/// Exact Euclidean distance from every pixel to the nearest `True` pixel.
/// Rows are image rows; an all-false mask gives `inf` everywhere.
#[pyfunction]
fn distance_transform(mask: Vec<Vec<bool>>) -> PyResult<Vec<Vec<f64>>> {
    let height = mask.len();
    let width = mask.first().map_or(0, Vec::len);
    if mask.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("mask rows must have equal length"));
    }
    let m = BinaryMask::new(width, height, mask.into_iter().flatten().collect()).py()?;
    let d = euclidean_distance_transform(&m);
    Ok((0..height)
        .map(|y| (0..width).map(|x| d.get(x, y)).collect())
        .collect())
}

/// Writes `episodes` synthetic episodes under `out_dir` and returns the
/// window-label histogram of the default pipeline.
#[pyfunction]
#[pyo3(signature = (out_dir, episodes = 20, seed = 7))]
fn generate_corpus(
    out_dir: PathBuf,
    episodes: usize,
    seed: u64,
) -> PyResult<BTreeMap<String, usize>> {
    let cfg = ScenarioConfig {
        seed,
        ..ScenarioConfig::default()
    };
    let corpus = core_generate(&cfg, episodes, seed).py()?;
    for (i, ep) in corpus.iter().enumerate() {
        write_episode(ep, &out_dir.join(corpus_episode_id(i))).py()?;
    }
    let hist = hoi_core::synth::window_label_histogram(&corpus, &PipelineConfig::default()).py()?;
    Ok(ClassLabel::ALL
        .iter()
        .map(|l| (l.name().to_string(), hist[l.index()]))
        .collect())
}

/// Labelled feature rows with their episode provenance.
#[pyclass(name = "Dataset", module = "hoi", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: LabeledDataset,
}

#[pymethods]
impl PyDataset {
    /// Runs the feature pipeline over every manifest under `path`.
    #[staticmethod]
    #[pyo3(signature = (path, tau_sharp = 10.0, tau_diff = 1.0, window = 10, stride = 1, epsilon = 10.0))]
    fn from_corpus(
        path: PathBuf,
        tau_sharp: f64,
        tau_diff: f64,
        window: usize,
        stride: usize,
        epsilon: f64,
    ) -> PyResult<Self> {
        let cfg = PipelineConfig {
            sharpness_threshold: tau_sharp,
            diff_threshold: tau_diff,
            window_length: window,
            stride,
            contact_epsilon: epsilon,
        };
        cfg.validate().py()?;
        let episodes = read_corpus(&path).py()?;
        Ok(Self {
            inner: build_dataset(&episodes, &cfg).py()?,
        })
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        let f = io(File::open(&path))?;
        Ok(Self {
            inner: read_features_csv(BufReader::new(f), &path).py()?,
        })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        let f = io(File::create(&path))?;
        write_features_csv(&self.inner, BufWriter::new(f)).py()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset({} rows)", self.inner.len())
    }

    /// One list of 8 floats per row.
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner
            .features
            .iter()
            .map(|f| f.to_array().to_vec())
            .collect()
    }

    fn labels(&self) -> Vec<String> {
        self.inner
            .labels
            .iter()
            .map(|l| l.name().to_string())
            .collect()
    }

    fn episodes(&self) -> Vec<(String, usize)> {
        self.inner
            .provenance
            .iter()
            .map(|p| (p.episode_id.clone(), p.target_index))
            .collect()
    }

    fn class_counts(&self) -> BTreeMap<String, usize> {
        let c = self.inner.class_counts();
        ClassLabel::ALL
            .iter()
            .map(|l| (l.name().to_string(), c[l.index()]))
            .collect()
    }

    /// Row indices `(train, test)` of a stratified split.
    #[pyo3(signature = (test_fraction = 0.2, seed = 7))]
    fn split_indices(&self, test_fraction: f64, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>)> {
        stratified_split_indices(&self.inner.labels, test_fraction, seed).py()
    }
}

/// Per-class precision, recall, F1 and support with macro and weighted
/// averages.
#[pyclass(name = "Report", module = "hoi", skip_from_py_object)]
struct PyReport {
    report: ClassReport,
    confusion: ConfusionMatrix,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn accuracy(&self) -> f64 {
        self.report.accuracy
    }

    #[getter]
    fn macro_f1(&self) -> f64 {
        self.report.macro_avg.f1
    }

    #[getter]
    fn weighted_f1(&self) -> f64 {
        self.report.weighted_avg.f1
    }

    /// `{name: (precision, recall, f1, support)}`.
    fn per_class(&self) -> BTreeMap<String, (f64, f64, f64, u64)> {
        self.report
            .classes
            .iter()
            .map(|c| (c.name.clone(), (c.precision, c.recall, c.f1, c.support)))
            .collect()
    }

    /// Counts indexed `[true][predicted]`.
    fn confusion(&self) -> Vec<Vec<u64>> {
        self.confusion.counts.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        self.report.to_json().py()
    }

    fn __str__(&self) -> String {
        render_report(&self.report)
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(accuracy={:.4}, weighted_f1={:.4})",
            self.report.accuracy, self.report.weighted_avg.f1
        )
    }
}

/// Report for two equally long lists of class names.
#[pyfunction]
fn classification_report(y_true: Vec<String>, y_pred: Vec<String>) -> PyResult<PyReport> {
    let idx = |v: &[String]| -> PyResult<Vec<usize>> {
        v.iter()
            .map(|s| parse_label(s).map(|l| l.index()))
            .collect()
    };
    let confusion = confusion_matrix(&idx(&y_true)?, &idx(&y_pred)?, ClassLabel::ALL.len()).py()?;
    let report = report_of(&confusion, Some(&ClassLabel::names())).py()?;
    Ok(PyReport { report, confusion })
}

/// A trained network with its input standardization.
#[pyclass(name = "Classifier", module = "hoi", skip_from_py_object)]
struct PyClassifier {
    inner: Classifier,
}

#[pymethods]
impl PyClassifier {
    /// Trains on a stratified split of `dataset` and returns the classifier
    /// with its report on the held-out rows.
    #[staticmethod]
    #[pyo3(signature = (
        dataset, arch = "birnn", hidden = vec![128, 64, 32], units = 128, layers = 1,
        seq_length = 1, dropout = None, l2 = None, batchnorm = None, lr = 1e-3,
        batch_size = 64, epochs = 60, patience = Some(10), class_weight = "balanced",
        test_fraction = 0.2, seed = 7
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        dataset: &PyDataset,
        arch: &str,
        hidden: Vec<usize>,
        units: usize,
        layers: usize,
        seq_length: usize,
        dropout: Option<f64>,
        l2: Option<f64>,
        batchnorm: Option<bool>,
        lr: f64,
        batch_size: usize,
        epochs: usize,
        patience: Option<usize>,
        class_weight: &str,
        test_fraction: f64,
        seed: u64,
    ) -> PyResult<(Self, PyReport)> {
        let kind: ModelKind = arch.parse().py()?;
        let mut spec = match kind {
            ModelKind::Mlp => ModelSpec::mlp(hidden),
            ModelKind::Birnn => ModelSpec::birnn(units, layers, seq_length),
            ModelKind::Lstm => ModelSpec::lstm(units, layers, seq_length),
        };
        spec.dropout_p = dropout.unwrap_or(spec.dropout_p);
        spec.l2_lambda = l2.unwrap_or(spec.l2_lambda);
        spec.use_batchnorm = batchnorm.unwrap_or(spec.use_batchnorm);
        let cfg = TrainConfig {
            learning_rate: lr,
            batch_size,
            epochs,
            seed,
            class_weighting: class_weight.parse::<ClassWeighting>().py()?,
            early_stop_patience: patience,
            ..TrainConfig::default()
        };
        let ds = &dataset.inner;
        let (train_rows, test_rows) =
            stratified_split_indices(&ds.labels, test_fraction, seed).py()?;
        let h = py
            .detach(|| train_holdout(&spec, &cfg, ds, &train_rows, &test_rows))
            .py()?;
        Ok((
            Self {
                inner: h.classifier,
            },
            PyReport {
                report: h.evaluation.report,
                confusion: h.evaluation.confusion,
            },
        ))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Classifier::load(&path).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).py()
    }

    #[getter]
    fn description(&self) -> String {
        self.inner.spec().describe()
    }

    #[getter]
    fn seq_length(&self) -> usize {
        self.inner.spec().steps()
    }

    /// Class probabilities for every row of `dataset`.
    fn predict_proba(&self, dataset: &PyDataset) -> PyResult<Vec<Vec<f64>>> {
        let data = SeqData::from_dataset(&dataset.inner, self.inner.spec().steps()).py()?;
        let p = self.inner.predict(&data.steps).py()?;
        Ok(p.probabilities.outer_iter().map(|r| r.to_vec()).collect())
    }

    /// Predicted class name for every row of `dataset`.
    fn predict(&self, dataset: &PyDataset) -> PyResult<Vec<String>> {
        let data = SeqData::from_dataset(&dataset.inner, self.inner.spec().steps()).py()?;
        let p = self.inner.predict(&data.steps).py()?;
        Ok(p.labels
            .iter()
            .map(|&i| {
                self.inner
                    .labels
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| i.to_string())
            })
            .collect())
    }

    /// Report over every row of `dataset`.
    fn evaluate(&self, dataset: &PyDataset) -> PyResult<PyReport> {
        let data = SeqData::from_dataset(&dataset.inner, self.inner.spec().steps()).py()?;
        let ev = evaluate_classifier(&self.inner, &data).py()?;
        Ok(PyReport {
            report: ev.report,
            confusion: ev.confusion,
        })
    }

    fn __repr__(&self) -> String {
        format!("Classifier({})", self.inner.spec().describe())
    }
}

/// Runs the eight-model ladder and returns one dict per model.
#[pyfunction]
#[pyo3(signature = (dataset, seed = 7, budget = 8, folds = 5, epochs = 60))]
fn run_ladder<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    seed: u64,
    budget: usize,
    folds: usize,
    epochs: usize,
) -> PyResult<Vec<Bound<'py, pyo3::types::PyDict>>> {
    let cfg = LadderConfig {
        seed,
        search_budget: budget,
        folds,
        train: TrainConfig {
            epochs,
            ..TrainConfig::default()
        },
        ..LadderConfig::default()
    };
    let plan = ladder_plan(&cfg);
    let outcome = py
        .detach(|| core_run_ladder(&dataset.inner, &cfg, &plan))
        .py()?;
    outcome
        .rows
        .iter()
        .map(|r| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("model", r.model)?;
            d.set_item("description", &r.description)?;
            d.set_item("architecture", &r.architecture)?;
            d.set_item("seq_len", r.seq_len)?;
            d.set_item("accuracy", r.accuracy)?;
            d.set_item("weighted_f1", r.weighted_f1)?;
            d.set_item("grabbing_f1", r.grabbing_f1)?;
            d.set_item("status", &r.status)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
pub fn hoi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CLASSES", ClassLabel::names())?;
    m.add(
        "FEATURES",
        hoi_core::features::FeatureVector::NAMES.to_vec(),
    )?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyClassifier>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(distance_transform, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(classification_report, m)?)?;
    m.add_function(wrap_pyfunction!(run_ladder, m)?)?;
    Ok(())
}
