"""Smoke test for the `hoi` extension module.

Uses an installed `hoi` if there is one (e.g. after `maturin develop` in
crates/python); otherwise loads the shared library that
`cargo build -p hoi-python --features extension-module` leaves in target/.
"""

import importlib.machinery
import importlib.util
import math
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_hoi():
    try:
        import hoi

        return hoi
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libhoi.so", "libhoi.dylib", "hoi.dll"):
            lib = ROOT / "target" / profile / name
            if lib.exists():
                loader = importlib.machinery.ExtensionFileLoader("hoi", str(lib))
                spec = importlib.util.spec_from_loader("hoi", loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                sys.modules["hoi"] = module
                return module
    sys.exit("hoi extension not found; build it first")


def main():
    hoi = load_hoi()
    assert len(hoi.CLASSES) == 5 and len(hoi.FEATURES) == 8

    dist = hoi.distance_transform([[False, False, False], [False, False, True]])
    assert dist[1][2] == 0.0
    assert abs(dist[0][0] - math.sqrt(5.0)) < 1e-12
    assert all(math.isinf(v) for row in hoi.distance_transform([[False] * 3]) for v in row)

    report = hoi.classification_report(
        ["holding", "holding", "grabbing", "unknown"],
        ["holding", "grabbing", "grabbing", "unknown"],
    )
    assert report.accuracy == 0.75
    assert report.confusion()[2][1] == 1

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        hist = hoi.generate_corpus(tmp / "corpus", episodes=3, seed=7)
        assert set(hist) == set(hoi.CLASSES)

        ds = hoi.Dataset.from_corpus(tmp / "corpus")
        assert len(ds) == sum(hist.values())
        ds.write_csv(tmp / "features.csv")
        again = hoi.Dataset.read_csv(tmp / "features.csv")
        assert again.labels() == ds.labels()
        for a, b in zip(again.features(), ds.features()):
            assert all(math.isclose(x, y, rel_tol=1e-8, abs_tol=1e-12) for x, y in zip(a, b))

        clf, held_out = hoi.Classifier.train(ds, arch="birnn", seq_length=1, units=16, epochs=5)
        print(clf)
        print(held_out)
        clf.save(tmp / "ckpt.json")
        reloaded = hoi.Classifier.load(tmp / "ckpt.json")
        assert reloaded.predict_proba(ds) == clf.predict_proba(ds)
        preds = reloaded.predict(ds)
        assert len(preds) == len(ds) and set(preds) <= set(hoi.CLASSES)
        assert reloaded.evaluate(ds).accuracy == clf.evaluate(ds).accuracy

    print("smoke test passed")


if __name__ == "__main__":
    main()
