use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use hoi_core::eval::{render_report, ClassReport, ConfusionMatrix};
use hoi_core::features::manifest::{read_corpus, write_episode};
use hoi_core::features::{
    build_dataset, read_features_csv, stratified_split_indices, write_features_csv, ClassLabel,
    LabeledDataset, PipelineConfig,
};
use hoi_core::ladder::{ladder_plan, run_ladder, write_summary_csv, LadderConfig};
use hoi_core::nn::run::carve_validation;
use hoi_core::nn::search::{write_trials_csv, SearchSpace};
use hoi_core::nn::{
    evaluate_classifier, kfold_validate, random_search, train_holdout, Classifier, ModelKind,
    ModelSpec, SeqData, TrainConfig,
};
use hoi_core::synth::{corpus_episode_id, generate_corpus, window_label_histogram, ScenarioConfig};

use crate::config::{Patience, Settings, Widths};
use crate::manifest::Recorder;
use crate::{
    Cli, Command, EvalArgs, ExtractArgs, FitArgs, LadderArgs, ModelArgs, SearchArgs, SynthArgs,
    TrainArgs, XvalArgs,
};

const DEFAULT_SEED: u64 = 7;
const DEFAULT_TEST_FRACTION: f64 = 0.2;

struct Ctx {
    settings: Settings,
    seed: u64,
    out: PathBuf,
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    let seed = settings.get("seed", cli.seed, DEFAULT_SEED)?;
    let out: PathBuf = match cli.out {
        Some(p) => p,
        None => settings.get("out", None, "out".to_string())?.into(),
    };
    settings.record("out", out.display());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut ctx = Ctx {
        settings,
        seed,
        out,
    };
    match cli.command {
        Command::Synth(a) => synth(&mut ctx, a),
        Command::Extract(a) => extract(&mut ctx, a),
        Command::Train(a) => train(&mut ctx, a),
        Command::Eval(a) => eval(&mut ctx, a),
        Command::Search(a) => search(&mut ctx, a),
        Command::Xval(a) => xval(&mut ctx, a),
        Command::Ladder(a) => ladder(&mut ctx, a),
    }
}

fn required_path(s: &mut Settings, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
    let p = match flag {
        Some(p) => p.display().to_string(),
        None => s.get(key, None, String::new())?,
    };
    if p.is_empty() {
        bail!("--{key} is required");
    }
    s.record(key, &p);
    Ok(PathBuf::from(p))
}

fn load_features(path: &Path) -> Result<LabeledDataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let ds = read_features_csv(std::io::BufReader::new(f), path)?;
    if ds.is_empty() {
        bail!("{} has no rows", path.display());
    }
    Ok(ds)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn model_spec(s: &mut Settings, a: &ModelArgs, default_kind: ModelKind) -> Result<ModelSpec> {
    let kind = s.get("arch", a.arch, default_kind)?;
    let hidden = s.get("hidden", a.hidden.clone(), Widths(vec![128, 64, 32]))?;
    let units = s.get("units", a.units, 128)?;
    let layers = s.get("layers", a.layers, 1)?;
    let seq = s.get("seq-length", a.seq_length, 1)?;
    let mut spec = match kind {
        ModelKind::Mlp => ModelSpec::mlp(hidden.0),
        ModelKind::Birnn => ModelSpec::birnn(units, layers, seq),
        ModelKind::Lstm => ModelSpec::lstm(units, layers, seq),
    };
    spec.dropout_p = s.get("dropout", a.dropout, spec.dropout_p)?;
    spec.l2_lambda = s.get("l2", a.l2, spec.l2_lambda)?;
    spec.use_batchnorm = s.get("batchnorm", a.batchnorm, spec.use_batchnorm)?;
    spec.validate()?;
    Ok(spec)
}

fn train_config(s: &mut Settings, a: &FitArgs, seed: u64) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: s.get("lr", a.lr, d.learning_rate)?,
        batch_size: s.get("batch-size", a.batch_size, d.batch_size)?,
        epochs: s.get("epochs", a.epochs, d.epochs)?,
        seed,
        class_weighting: s.get("class-weight", a.class_weight, d.class_weighting)?,
        standardize_features: s.get("standardize", a.standardize, d.standardize_features)?,
        early_stop_patience: s
            .get("patience", a.patience, Patience(d.early_stop_patience))?
            .0,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// report.txt, report.json and confusion.csv in `dir`.
fn write_report(
    rec: &mut Recorder,
    dir: &Path,
    report: &ClassReport,
    confusion: &ConfusionMatrix,
) -> Result<()> {
    let names: Vec<String> = report.classes.iter().map(|c| c.name.clone()).collect();
    let txt = dir.join("report.txt");
    fs::write(&txt, render_report(report))?;
    let json = dir.join("report.json");
    fs::write(&json, report.to_json()?)?;
    let csv = dir.join("confusion.csv");
    confusion.write_csv(&names, create(&csv)?)?;
    for p in [txt, json, csv] {
        rec.output(p);
    }
    Ok(())
}

fn synth(ctx: &mut Ctx, a: SynthArgs) -> Result<ExitCode> {
    let s = &mut ctx.settings;
    let d = ScenarioConfig::default();
    let episodes = s.get("episodes", a.episodes, 20)? as usize;
    let mut cfg = ScenarioConfig {
        width: s.get("width", a.width, d.width)?,
        height: s.get("height", a.height, d.height)?,
        hand_radius: s.get("hand-radius", a.hand_radius, d.hand_radius)?,
        approach_speed: s.get("approach-speed", a.approach_speed, d.approach_speed)?,
        contact_epsilon: s.get("epsilon", a.epsilon, d.contact_epsilon)?,
        jitter_sigma: s.get("jitter", a.jitter, d.jitter_sigma)?,
        noise_flip_prob: s.get("noise", a.noise, d.noise_flip_prob)?,
        seed: ctx.seed,
        ..d.clone()
    };
    cfg.phases.idle = s.get("idle", a.idle, d.phases.idle)?;
    cfg.phases.approach = s.get("approach", a.approach, d.phases.approach)?;
    cfg.phases.grab = s.get("grab", a.grab, d.phases.grab)?;
    cfg.phases.hold = s.get("hold", a.hold, d.phases.hold)?;
    cfg.phases.release = s.get("release", a.release, d.phases.release)?;
    cfg.phases.retreat = s.get("retreat", a.retreat, d.phases.retreat)?;

    let mut rec = Recorder::new("synth", ctx.seed);
    let corpus = generate_corpus(&cfg, episodes, ctx.seed)?;
    for (i, ep) in corpus.iter().enumerate() {
        let dir = ctx.out.join(corpus_episode_id(i));
        write_episode(ep, &dir)?;
        rec.output(dir);
    }
    let hist = window_label_histogram(&corpus, &PipelineConfig::default())?;
    println!("wrote {} episodes to {}", corpus.len(), ctx.out.display());
    println!("window labels:");
    for (label, n) in ClassLabel::ALL.iter().zip(hist) {
        println!("  {:<12} {n}", label.name());
    }
    rec.finish(&ctx.out, ctx.settings.effective())?;
    Ok(ExitCode::SUCCESS)
}

fn extract(ctx: &mut Ctx, a: ExtractArgs) -> Result<ExitCode> {
    let s = &mut ctx.settings;
    let input = required_path(s, "input", a.input)?;
    let d = PipelineConfig::default();
    let p = a.pipeline;
    let cfg = PipelineConfig {
        sharpness_threshold: s.get("tau-sharp", p.tau_sharp, d.sharpness_threshold)?,
        diff_threshold: s.get("tau-diff", p.tau_diff, d.diff_threshold)?,
        window_length: s.get("window", p.window, d.window_length)?,
        stride: s.get("stride", p.stride, d.stride)?,
        contact_epsilon: s.get("epsilon", p.epsilon, d.contact_epsilon)?,
    };
    cfg.validate()?;
    let mut rec = Recorder::new("extract", ctx.seed);
    rec.input(&input);
    let episodes = read_corpus(&input)?;
    if episodes.is_empty() {
        bail!("no manifests found under {}", input.display());
    }
    let ds = build_dataset(&episodes, &cfg)?;
    let path = ctx.out.join("features.csv");
    write_features_csv(&ds, create(&path)?)?;
    rec.output(&path);
    println!(
        "{} rows from {} episodes -> {}",
        ds.len(),
        episodes.len(),
        path.display()
    );
    rec.finish(&ctx.out, ctx.settings.effective())?;
    Ok(ExitCode::SUCCESS)
}

fn test_fraction(s: &mut Settings, flag: Option<f64>) -> Result<f64> {
    let f = s.get("test-fraction", flag, DEFAULT_TEST_FRACTION)?;
    if !(f > 0.0 && f < 1.0) {
        bail!("--test-fraction must lie in (0, 1), got {f}");
    }
    Ok(f)
}

fn train(ctx: &mut Ctx, a: TrainArgs) -> Result<ExitCode> {
    let s = &mut ctx.settings;
    let features = required_path(s, "features", a.features)?;
    let frac = test_fraction(s, a.test_fraction)?;
    let spec = model_spec(s, &a.model, ModelKind::Birnn)?;
    let cfg = train_config(s, &a.fit, ctx.seed)?;
    let mut rec = Recorder::new("train", ctx.seed);
    rec.input(&features);
    let ds = load_features(&features)?;
    let (train_rows, test_rows) = stratified_split_indices(&ds.labels, frac, ctx.seed)?;
    let h = train_holdout(&spec, &cfg, &ds, &train_rows, &test_rows)?;

    let ckpt = ctx.out.join("checkpoint.json");
    h.classifier.save(&ckpt)?;
    rec.output(&ckpt);
    let hist = ctx.out.join("history.csv");
    h.history.write_csv(create(&hist)?)?;
    rec.output(&hist);
    write_report(
        &mut rec,
        &ctx.out,
        &h.evaluation.report,
        &h.evaluation.confusion,
    )?;

    println!(
        "{} | {} train / {} val / {} test | best epoch {} of {}",
        spec.describe(),
        h.n_train,
        h.n_val,
        test_rows.len(),
        h.history.best_epoch,
        h.history.epochs.len()
    );
    print!("{}", render_report(&h.evaluation.report));
    rec.finish(&ctx.out, ctx.settings.effective())?;
    Ok(ExitCode::SUCCESS)
}

fn eval(ctx: &mut Ctx, a: EvalArgs) -> Result<ExitCode> {
    let s = &mut ctx.settings;
    let ckpt = required_path(s, "checkpoint", a.checkpoint)?;
    let features = required_path(s, "features", a.features)?;
    let frac = test_fraction(s, a.test_fraction)?;
    s.record("all", a.all);
    let mut rec = Recorder::new("eval", ctx.seed);
    rec.input(&ckpt);
    rec.input(&features);
    let clf = Classifier::load(&ckpt).with_context(|| format!("loading {}", ckpt.display()))?;
    let ds = load_features(&features)?;
    let rows: Vec<usize> = if a.all {
        (0..ds.len()).collect()
    } else {
        stratified_split_indices(&ds.labels, frac, ctx.seed)?.1
    };
    let data = SeqData::from_rows(&ds, clf.spec().steps(), &rows)?;
    let ev = evaluate_classifier(&clf, &data)?;
    write_report(&mut rec, &ctx.out, &ev.report, &ev.confusion)?;
    print!("{}", render_report(&ev.report));
    rec.finish(&ctx.out, ctx.settings.effective())?;
    Ok(ExitCode::SUCCESS)
}

fn search(ctx: &mut Ctx, a: SearchArgs) -> Result<ExitCode> {
    let s = &mut ctx.settings;
    let features = required_path(s, "features", a.features)?;
    let budget = s.get("budget", a.budget, 8)? as usize;
    let frac = test_fraction(s, a.test_fraction)?;
    let mut model = a.model.clone();
    model.arch = Some(ModelKind::Birnn);
    model.seq_length = Some(1);
    let spec = model_spec(s, &model, ModelKind::Birnn)?;
    let cfg = train_config(s, &a.fit, ctx.seed)?;
    let mut rec = Recorder::new("search", ctx.seed);
    rec.input(&features);
    let ds = load_features(&features)?;
    let (train_rows, test_rows) = stratified_split_indices(&ds.labels, frac, ctx.seed)?;
    let (fit_rows, val_rows) = carve_validation(&ds, &train_rows, ctx.seed)?;
    let fit = SeqData::from_rows(&ds, 1, &fit_rows)?;
    let val = SeqData::from_rows(&ds, 1, &val_rows)?;
    let test = SeqData::from_rows(&ds, 1, &test_rows)?;
    let space = SearchSpace::default();
    let result = random_search(
        &space,
        budget,
        &spec,
        &cfg,
        &fit,
        &val,
        &ClassLabel::names(),
        ctx.seed,
    )?;

    let trials = ctx.out.join("trials.csv");
    write_trials_csv(&result.trials, create(&trials)?)?;
    rec.output(&trials);
    let best = ctx.out.join("best.json");
    fs::write(&best, serde_json::to_string_pretty(result.best_trial())?)?;
    rec.output(&best);
    let ckpt = ctx.out.join("checkpoint.json");
    result.classifier.save(&ckpt)?;
    rec.output(&ckpt);
    let hist = ctx.out.join("history.csv");
    result.history.write_csv(create(&hist)?)?;
    rec.output(&hist);
    let ev = evaluate_classifier(&result.classifier, &test)?;
    write_report(&mut rec, &ctx.out, &ev.report, &ev.confusion)?;

    let b = result.best_trial();
    println!(
        "best trial {} of {}: units {} layers {} dropout {:.3} lr {:.2e} batch {}",
        b.index,
        result.trials.len(),
        b.params.rnn_units,
        b.params.rnn_layers,
        b.params.dropout_p,
        b.params.learning_rate,
        b.params.batch_size
    );
    print!("{}", render_report(&ev.report));
    rec.finish(&ctx.out, ctx.settings.effective())?;
    Ok(ExitCode::SUCCESS)
}

fn xval(ctx: &mut Ctx, a: XvalArgs) -> Result<ExitCode> {
    let s = &mut ctx.settings;
    let features = required_path(s, "features", a.features)?;
    let folds = s.get("folds", a.folds, 5)?;
    let spec = model_spec(s, &a.model, ModelKind::Birnn)?;
    let cfg = train_config(s, &a.fit, ctx.seed)?;
    let mut rec = Recorder::new("xval", ctx.seed);
    rec.input(&features);
    let ds = load_features(&features)?;
    let k = kfold_validate(&spec, &cfg, &ds, folds, ctx.seed)?;

    let path = ctx.out.join("folds.csv");
    {
        let mut w = create(&path)?;
        use std::io::Write;
        writeln!(w, "fold,n_test,accuracy,weighted_f1,grabbing_f1")?;
        let f = hoi_core::features::fmt_sig9;
        for m in &k.folds {
            writeln!(
                w,
                "{},{},{},{},{}",
                m.fold,
                m.n_test,
                f(m.accuracy),
                f(m.weighted_f1),
                f(m.grabbing_f1)
            )?;
        }
        w.flush()?;
    }
    rec.output(&path);
    let summary = ctx.out.join("xval.json");
    fs::write(&summary, serde_json::to_string_pretty(&k)?)?;
    rec.output(&summary);
    write_report(&mut rec, &ctx.out, &k.pooled, &k.pooled_confusion)?;

    println!(
        "{} | {folds}-fold accuracy {:.4} +/- {:.4}, weighted F1 {:.4}, grabbing F1 {:.4}",
        spec.describe(),
        k.mean_accuracy,
        k.std_accuracy,
        k.mean_weighted_f1,
        k.mean_grabbing_f1
    );
    print!("{}", render_report(&k.pooled));
    rec.finish(&ctx.out, ctx.settings.effective())?;
    Ok(ExitCode::SUCCESS)
}

fn ladder(ctx: &mut Ctx, a: LadderArgs) -> Result<ExitCode> {
    let s = &mut ctx.settings;
    let features = required_path(s, "features", a.features)?;
    let d = LadderConfig::default();
    let m = &a.model;
    let cfg = LadderConfig {
        seed: ctx.seed,
        test_fraction: test_fraction(s, a.test_fraction)?,
        folds: s.get("folds", a.folds, d.folds)?,
        search_budget: s.get("budget", a.budget, d.search_budget as u64)? as usize,
        search_space: d.search_space.clone(),
        hidden: s
            .get("hidden", m.hidden.clone(), Widths(d.hidden.clone()))?
            .0,
        rnn_units: s.get("units", m.units, d.rnn_units)?,
        rnn_layers: s.get("layers", m.layers, d.rnn_layers)?,
        dropout_p: s.get("dropout", m.dropout, d.dropout_p)?,
        l2_lambda: s.get("l2", m.l2, d.l2_lambda)?,
        train: train_config(s, &a.fit, ctx.seed)?,
        parallel: a.parallel,
    };
    if m.arch.is_some() || m.seq_length.is_some() || m.batchnorm.is_some() {
        bail!("--arch, --seq-length and --batchnorm are fixed by the ladder plan");
    }
    s.record("parallel", a.parallel);
    let mut rec = Recorder::new("ladder", ctx.seed);
    rec.input(&features);
    let ds = load_features(&features)?;
    let plan = ladder_plan(&cfg);
    let outcome = run_ladder(&ds, &cfg, &plan)?;

    let summary = ctx.out.join("ladder_summary.csv");
    write_summary_csv(&outcome.rows, create(&summary)?)?;
    rec.output(&summary);
    for (row, detail) in outcome.rows.iter().zip(&outcome.details) {
        let Some(detail) = detail else { continue };
        let dir = ctx.out.join(format!("model_{}", row.model));
        fs::create_dir_all(&dir)?;
        write_report(&mut rec, &dir, &detail.report, &detail.confusion)?;
        if let Some(trials) = &detail.trials {
            let p = dir.join("trials.csv");
            write_trials_csv(trials, create(&p)?)?;
            rec.output(p);
        }
    }

    println!(
        "{:>5}  {:<40} {:<7} {:>7} {:>8} {:>11} {:>11}  {:>7}",
        "model", "description", "arch", "seq_len", "accuracy", "weighted_f1", "grabbing_f1", "time"
    );
    let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    for r in &outcome.rows {
        println!(
            "{:>5}  {:<40} {:<7} {:>7} {:>8} {:>11} {:>11}  {:>6.1}s{}",
            r.model,
            r.description,
            r.architecture,
            r.seq_len.map_or("N/A".to_string(), |s| s.to_string()),
            f(r.accuracy),
            f(r.weighted_f1),
            f(r.grabbing_f1),
            r.seconds,
            if r.ok() {
                String::new()
            } else {
                format!("  {}", r.status)
            }
        );
    }
    rec.finish(&ctx.out, ctx.settings.effective())?;
    let failures = outcome.failures();
    if failures > 0 {
        return Err(anyhow!(
            "{failures} of {} ladder runs failed",
            outcome.rows.len()
        ));
    }
    Ok(ExitCode::SUCCESS)
}
