use hoi::hoi;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    pyo3::append_to_inittab!(hoi);
    Python::initialize();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("hoi", py.import("hoi").unwrap()).unwrap();
        f(py, &globals);
    });
}

fn run(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) {
    let code = std::ffi::CString::new(code).unwrap();
    if let Err(e) = py.run(&code, Some(globals), None) {
        e.print(py);
        panic!("python snippet failed");
    }
}

#[test]
fn module_surface() {
    let dir = tempfile::TempDir::new().unwrap();
    with_module(|py, g| {
        g.set_item("tmp", dir.path()).unwrap();
        run(
            py,
            g,
            r#"
import math
assert hoi.CLASSES == ["approaching", "grabbing", "holding", "releasing", "unknown"]
d = hoi.distance_transform([[True, False], [False, False]])
assert d[1][1] == math.sqrt(2.0)

r = hoi.classification_report(["holding", "grabbing"], ["holding", "holding"])
assert r.accuracy == 0.5
assert r.per_class()["holding"][3] == 1
assert "weighted avg" in str(r)

hist = hoi.generate_corpus(tmp / "c", episodes=2, seed=3)
ds = hoi.Dataset.from_corpus(tmp / "c")
assert len(ds) == sum(hist.values())
assert sum(ds.class_counts().values()) == len(ds)
train, test = ds.split_indices(0.2, 7)
assert sorted(train + test) == list(range(len(ds)))

clf, rep = hoi.Classifier.train(ds, arch="mlp", hidden=[16], epochs=2)
clf.save(tmp / "m.json")
back = hoi.Classifier.load(tmp / "m.json")
assert back.predict_proba(ds) == clf.predict_proba(ds)
assert back.seq_length == 1

try:
    hoi.Classifier.train(ds, arch="transformer")
    raise AssertionError("expected ValueError")
except ValueError:
    pass
try:
    hoi.Classifier.load(tmp / "missing.json")
    raise AssertionError("expected OSError")
except OSError:
    pass
"#,
        );
    });
}
