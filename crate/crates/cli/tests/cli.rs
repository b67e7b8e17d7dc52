use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hoi_core::features::manifest::write_episode;
use hoi_core::features::{select_keyframes, Episode, PipelineConfig};
use hoi_core::hashing::{file_sha256, tree_sha256};
use hoi_core::synth::{generate_episode, ScenarioConfig};
use tempfile::TempDir;

fn hoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoi"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("spawn hoi")
}

fn ok(args: &[&str]) -> String {
    let out = hoi(args);
    assert!(
        out.status.success(),
        "hoi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Corpus plus features in a fresh temp dir.
fn features(episodes: usize) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    let feat = dir.path().join("feat");
    ok(&[
        "synth",
        "--episodes",
        &episodes.to_string(),
        "--out",
        p(&corpus),
    ]);
    ok(&["extract", "--input", p(&corpus), "--out", p(&feat)]);
    (dir, feat.join("features.csv"))
}

/// Every file under `dir` except run manifests, by relative path.
fn digests(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.ends_with("run_manifest.json") {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, file_sha256(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const FAST: [&str; 6] = ["--epochs", "3", "--units", "16", "--patience", "none"];

#[test]
fn synth_is_deterministic_and_lists_every_class() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = ok(&["synth", "--episodes", "3", "--seed", "7", "--out", p(&a)]);
    ok(&["synth", "--episodes", "3", "--seed", "7", "--out", p(&b)]);
    for name in ["approaching", "grabbing", "holding", "releasing", "unknown"] {
        assert!(out.contains(name), "{name} missing from {out}");
    }
    for ep in ["ep_0000", "ep_0001", "ep_0002"] {
        assert_eq!(
            tree_sha256(&a.join(ep)).unwrap(),
            tree_sha256(&b.join(ep)).unwrap()
        );
    }
    assert_eq!(digests(&a), digests(&b));
    assert!(a.join("run_manifest.json").is_file());
}

#[test]
fn synth_rejects_zero_episodes_and_infeasible_scenarios() {
    let dir = TempDir::new().unwrap();
    let out = hoi(&["synth", "--episodes", "0", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let out = hoi(&[
        "synth",
        "--episodes",
        "1",
        "--approach-speed",
        "0.05",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("infeasible"), "{err}");
}

#[test]
fn extract_single_window_episode() {
    let cfg = PipelineConfig::default();
    let ep = generate_episode(&ScenarioConfig::default()).unwrap();
    let kept = select_keyframes(&ep, &cfg).unwrap().indices();
    assert!(kept.len() > cfg.window_length);
    let end = kept[cfg.window_length] + 1;
    let short = Episode::new(
        "short",
        ep.frames[..end].to_vec(),
        ep.hand_masks[..end].to_vec(),
        ep.object_masks[..end].to_vec(),
        ep.labels[..end].to_vec(),
    )
    .unwrap();

    let dir = TempDir::new().unwrap();
    write_episode(&short, &dir.path().join("corpus/short")).unwrap();
    let out = ok(&[
        "extract",
        "--input",
        p(&dir.path().join("corpus")),
        "--out",
        p(&dir.path().join("feat")),
    ]);
    assert!(out.starts_with("1 rows"), "{out}");
    let csv = fs::read_to_string(dir.path().join("feat/features.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn extract_is_deterministic_and_monotone_in_tau_diff() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["synth", "--episodes", "2", "--out", p(&corpus)]);
    let rows = |name: &str, tau: &str| {
        let out = dir.path().join(name);
        ok(&[
            "extract",
            "--input",
            p(&corpus),
            "--tau-diff",
            tau,
            "--out",
            p(&out),
        ]);
        let csv = out.join("features.csv");
        let n = fs::read_to_string(&csv).unwrap().lines().count() - 1;
        (n, file_sha256(&csv).unwrap())
    };
    let (n1, h1) = rows("a", "1");
    let (n2, h2) = rows("b", "1");
    assert_eq!((n1, &h1), (n2, &h2));
    let mut last = n1;
    for (i, tau) in ["5", "20", "80", "400"].iter().enumerate() {
        let (n, _) = rows(&format!("t{i}"), tau);
        assert!(n <= last, "tau-diff {tau}: {n} rows > {last}");
        last = n;
    }
}

#[test]
fn extract_reports_malformed_manifest_location() {
    let dir = TempDir::new().unwrap();
    let ep = dir.path().join("corpus/bad");
    fs::create_dir_all(&ep).unwrap();
    fs::write(
        ep.join("manifest.csv"),
        "frame,hand_mask,object_mask,label\nf.pgm,h.pgm,o.pgm,flying\n",
    )
    .unwrap();
    let out = hoi(&[
        "extract",
        "--input",
        p(&dir.path().join("corpus")),
        "--out",
        p(&dir.path().join("feat")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("manifest.csv:2"), "{err}");
}

#[test]
fn train_then_eval_reproduces_report() {
    let (dir, feat) = features(3);
    for (name, arch) in [
        ("mlp", &["--arch", "mlp", "--hidden", "128,64,32"][..]),
        ("birnn", &["--arch", "birnn", "--seq-length", "1"][..]),
    ] {
        let t = dir.path().join(format!("train_{name}"));
        let e = dir.path().join(format!("eval_{name}"));
        let mut args = vec!["train", "--features", p(&feat), "--out", p(&t)];
        args.extend_from_slice(arch);
        args.extend_from_slice(&FAST);
        ok(&args);
        for f in [
            "checkpoint.json",
            "history.csv",
            "report.txt",
            "confusion.csv",
        ] {
            assert!(t.join(f).is_file(), "{f}");
        }
        ok(&[
            "eval",
            "--checkpoint",
            p(&t.join("checkpoint.json")),
            "--features",
            p(&feat),
            "--out",
            p(&e),
        ]);
        for f in ["report.txt", "report.json", "confusion.csv"] {
            assert_eq!(
                fs::read(t.join(f)).unwrap(),
                fs::read(e.join(f)).unwrap(),
                "{name}: {f}"
            );
        }
    }
}

#[test]
fn train_is_deterministic() {
    let (dir, feat) = features(2);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let mut args = vec![
            "train",
            "--features",
            p(&feat),
            "--seq-length",
            "3",
            "--out",
            p(&out),
        ];
        args.extend_from_slice(&FAST);
        ok(&args);
        digests(&out)
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn train_fails_when_a_class_is_missing_from_training() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("features.csv");
    let header = hoi_core::features::FEATURE_CSV_HEADER.join(",");
    let mut text = format!("{header}\n");
    for i in 0..21 {
        let v = i as f64;
        let l = if i == 20 { "grabbing" } else { "holding" };
        text.push_str(&format!("{v},{v},{v},{v},{v},{v},0,0,{l},e,{i}\n"));
    }
    fs::write(&csv, text).unwrap();
    let out = hoi(&[
        "train",
        "--features",
        p(&csv),
        "--arch",
        "mlp",
        "--test-fraction",
        "0.6",
        "--epochs",
        "1",
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("absent from the training split"), "{err}");
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let (dir, feat) = features(2);
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "epochs = 2\nbatch_size = 16\narch = mlp\n").unwrap();
    let out = dir.path().join("o");
    ok(&[
        "train",
        "--config",
        p(&cfg),
        "--features",
        p(&feat),
        "--epochs",
        "1",
        "--out",
        p(&out),
    ]);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["epochs"], "1");
    assert_eq!(m["config"]["batch-size"], "16");
    assert_eq!(m["config"]["arch"], "mlp");
    assert_eq!(m["config"]["lr"], "0.001");
    let hist = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(hist.lines().count(), 2);
}

#[test]
fn search_writes_one_row_per_trial() {
    let (dir, feat) = features(2);
    let run = |name: &str, budget: &str| {
        let out = dir.path().join(name);
        let mut args = vec![
            "search",
            "--features",
            p(&feat),
            "--budget",
            budget,
            "--out",
            p(&out),
        ];
        args.extend_from_slice(&FAST[..2]);
        ok(&args);
        out
    };
    let one = run("one", "1");
    let rows = fs::read_to_string(one.join("trials.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2);
    assert!(one.join("checkpoint.json").is_file());

    let a = run("a", "3");
    let b = run("b", "3");
    assert_eq!(digests(&a), digests(&b));
    let mut r = csv::Reader::from_path(a.join("trials.csv")).unwrap();
    let accs: Vec<f64> = r
        .records()
        .map(|rec| rec.unwrap()[7].parse().unwrap())
        .collect();
    assert_eq!(accs.len(), 3);
    let best: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("best.json")).unwrap()).unwrap();
    let best_acc = best["outcome"]["Completed"]["val_accuracy"]
        .as_f64()
        .unwrap();
    let max = accs.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(format!("{best_acc:.9}"), format!("{max:.9}"));
}

#[test]
fn xval_writes_fold_table() {
    let (dir, feat) = features(3);
    let out = dir.path().join("x");
    let mut args = vec![
        "xval",
        "--features",
        p(&feat),
        "--folds",
        "3",
        "--out",
        p(&out),
    ];
    args.extend_from_slice(&FAST);
    ok(&args);
    let folds = fs::read_to_string(out.join("folds.csv")).unwrap();
    assert_eq!(folds.lines().count(), 4);
    assert!(out.join("xval.json").is_file());
}

#[test]
fn ladder_summary_has_eight_rows_and_reruns_identically() {
    let (dir, feat) = features(3);
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "ladder",
            "--features",
            p(&feat),
            "--budget",
            "1",
            "--folds",
            "2",
            "--out",
            p(&out),
        ];
        args.extend_from_slice(&FAST);
        args.extend_from_slice(extra);
        ok(&args);
        out
    };
    let a = run("a", &[]);
    let b = run("b", &["--parallel"]);
    let summary = fs::read_to_string(a.join("ladder_summary.csv")).unwrap();
    let models: Vec<&str> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(models, ["1", "2", "3", "4", "5", "6", "7", "8"]);
    assert_eq!(digests(&a), digests(&b));
    assert!(a.join("model_8/trials.csv").is_file());
}

#[test]
fn ladder_marks_failures_and_exits_nonzero() {
    let (dir, feat) = features(2);
    let out = dir.path().join("l");
    let mut args = vec![
        "ladder",
        "--features",
        p(&feat),
        "--folds",
        "500",
        "--budget",
        "1",
        "--out",
        p(&out),
    ];
    args.extend_from_slice(&FAST);
    let res = hoi(&args);
    assert!(!res.status.success());
    let summary = fs::read_to_string(out.join("ladder_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 9);
    assert_eq!(summary.matches("failed:").count(), 2);
}
