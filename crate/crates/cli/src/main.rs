use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use driftbench::benchmark::{
    self, compare_detectors, eigen_shift_experiment, model_quality_experiment, synthetic_suite, write_outputs,
    BenchmarkReport, ExperimentPlan,
};
use driftbench::detectors::{
    calibrate, detect, Calibration, ContextConfig, DetectorContext, DetectorName, DetectorSpec, LevelEntry,
};
use driftbench::rng;
use driftbench::shift::{self, choose_rows, ShiftContext, ShiftSpec};
use driftbench::tabular::{load_csv, make_synthetic, split, write_csv, Dataset, SplitSpec, SyntheticSpec};

const EXIT_SHIFT: u8 = 3;

#[derive(Parser)]
#[command(name = "driftbench", version, about = "Dataset-shift detection and benchmarking for tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a target CSV against a source CSV; exits 3 when shift is detected.
    Detect(DetectArgs),
    /// Estimate a dataset-adaptive significance level from null splits.
    Calibrate(CalibrateArgs),
    /// Split a CSV and apply one shift, writing source/target/spec files.
    SimulateShift(SimulateArgs),
    /// Run an experiment plan and write cells.csv, report.json and tables.md.
    Benchmark(BenchmarkArgs),
    /// Friedman/Nemenyi comparison of detectors from a report.
    Compare(CompareArgs),
    /// BBSDs power under a degraded primary model.
    ModelQuality(QualityArgs),
    /// Prior shifts along the confusion matrix's minimum eigenvector.
    EigenShift(EigenArgs),
    /// Write a synthetic Gaussian-mixture dataset.
    MakeSynthetic(SyntheticArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Label column name.
    #[arg(long)]
    label: Option<String>,
    /// CSV the primary model, encoder and projections are fitted on (default: source).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Previously saved context (see --save-model).
    #[arg(long, conflicts_with = "train")]
    model: Option<PathBuf>,
    /// Save the fitted context as JSON.
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Trees in the primary and domain-classifier forests.
    #[arg(long, default_value_t = 100)]
    trees: usize,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// BBSDs, BBSDh, Test_X, Test_PCA, Test_SRP, DC, DC*, BBSDs+X or BBSDs+DC.
    #[arg(long)]
    detector: DetectorName,
    /// Compare against a calibrated level instead of alpha.
    #[arg(long)]
    adaptive: bool,
    /// Calibration file(s) from `calibrate`; without one --adaptive calibrates on the source.
    #[arg(long)]
    levels: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, env = "DRIFTBENCH_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    detector: DetectorName,
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, env = "DRIFTBENCH_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Shift spec JSON: {"kind", "s"?, "f"?, "seed", "extra"?}.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    source_size: Option<usize>,
    #[arg(long, env = "DRIFTBENCH_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trees: usize,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    report: PathBuf,
    /// Shift type label (e.g. "Knock-Out") or "All".
    #[arg(long)]
    shift_type: String,
    /// Comma-separated detector labels (default: all in the report).
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<String>>,
}

#[derive(Args)]
struct QualityArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.6,0.7,0.8,0.9,1.0")]
    qualities: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EigenArgs {
    /// Labeled evaluation CSV.
    #[arg(long)]
    eval: PathBuf,
    #[arg(long, default_value_t = 11)]
    alphas: usize,
    #[arg(long, env = "DRIFTBENCH_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long)]
    out: PathBuf,
    /// SyntheticSpec JSON file.
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in dataset: balanced-binary, imbalanced-binary, correlated-binary, heteroscedastic-binary.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, env = "DRIFTBENCH_SEED", default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Detect(a) => cmd_detect(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::SimulateShift(a) => cmd_simulate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Compare(a) => cmd_compare(a),
        Command::ModelQuality(a) => cmd_quality(a),
        Command::EigenShift(a) => cmd_eigen(a),
        Command::MakeSynthetic(a) => cmd_synthetic(a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load(path: &Path, label: Option<&str>) -> Result<Dataset> {
    load_csv(path, label).with_context(|| format!("loading {}", path.display()))
}

fn context_config(trees: usize, seed: u64) -> ContextConfig {
    let mut cfg = ContextConfig::default().with_seed(seed);
    cfg.forest.n_trees = trees;
    cfg.dc_forest.n_trees = trees;
    cfg
}

/// `--label`, or the label column recorded in `--model`.
fn data_label(m: &ModelArgs) -> Result<Option<String>> {
    if m.label.is_some() {
        return Ok(m.label.clone());
    }
    match &m.model {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(DetectorContext::from_json(&text)?.label)
        }
        None => Ok(None),
    }
}

/// Load `--model`, or fit on `--train` (falling back to `fallback`).
fn build_context(m: &ModelArgs, fallback: &Dataset, seed: u64) -> Result<DetectorContext<f64>> {
    let ctx = match (&m.model, &m.train) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            DetectorContext::from_json(&text)?
        }
        (None, Some(path)) => {
            let mut train = load(path, m.label.as_deref())?;
            if let (Some(names), Some(_)) = (fallback.class_names(), train.labels()) {
                train = train.align_classes(names)?;
            }
            DetectorContext::fit(&train, &context_config(m.trees, seed))?
        }
        (None, None) => {
            if fallback.labels().is_some() {
                eprintln!("warning: primary model fitted on the source itself; pass --train or --model for out-of-sample predictions");
            }
            DetectorContext::fit(fallback, &context_config(m.trees, seed))?
        }
    };
    if let Some(path) = &m.save_model {
        fs::write(path, ctx.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ctx)
}

fn read_levels(paths: &[PathBuf]) -> Result<Vec<LevelEntry>> {
    let mut out = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let cal: Calibration = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        out.push(LevelEntry { detector: cal.detector, size: cal.size, level: cal.level });
    }
    Ok(out)
}

fn cmd_detect(a: DetectArgs) -> Result<u8> {
    if a.detector.uses_model() && a.model.label.is_none() && a.model.model.is_none() {
        bail!("{} needs --label or --model", a.detector);
    }
    let label = data_label(&a.model)?;
    let source = load(&a.source, label.as_deref())?;
    let mut target = load(&a.target, label.as_deref())?;
    if let Some(names) = source.class_names() {
        if target.labels().is_some() {
            target = target.align_classes(names)?;
        }
    }
    let mut ctx = build_context(&a.model, &source, a.seed)?;
    let mut s = ctx.prepare(&source)?;
    let mut t = ctx.prepare(&target)?;
    if a.detector.uses_domain_classifier() && s.n_rows() != t.n_rows() {
        let n = s.n_rows().min(t.n_rows());
        s = s.select(&choose_rows(s.n_rows(), n, &mut rng::stream(a.seed, &[rng::tag("balance-source")])));
        t = t.select(&choose_rows(t.n_rows(), n, &mut rng::stream(a.seed, &[rng::tag("balance-target")])));
    }
    let spec = DetectorSpec::new(a.detector, a.adaptive).with_alpha(a.alpha)?;
    let size = s.n_rows().min(t.n_rows());
    if a.adaptive {
        for e in read_levels(&a.levels)? {
            ctx.levels.insert(e.detector, e.size, e.level);
        }
        if ctx.levels.get(a.detector, size).is_none() {
            if !a.levels.is_empty() {
                bail!("no calibrated level for {} at size {size} in the given --levels files", a.detector);
            }
            let pool = ctx.prepare(&source)?;
            let cal = calibrate(&ctx, &pool, &[a.detector], size, a.runs, a.alpha, a.seed)
                .context("calibrating on the source (pass --levels to reuse a calibration)")?
                .remove(0);
            if cal.degenerate {
                eprintln!("warning: degenerate null distribution for {} at size {size}", a.detector);
            }
            ctx.levels.insert(a.detector, size, cal.level);
        }
    }
    let result = detect(&ctx, &s, &t, &spec, a.seed)?;
    print_json(&result)?;
    Ok(if result.detected { EXIT_SHIFT } else { 0 })
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<u8> {
    if a.detector.uses_model() && a.model.label.is_none() && a.model.model.is_none() {
        bail!("{} needs --label or --model", a.detector);
    }
    let source = load(&a.source, data_label(&a.model)?.as_deref())?;
    let ctx = build_context(&a.model, &source, a.seed)?;
    let pool = ctx.prepare(&source)?;
    let cal = calibrate(&ctx, &pool, &[a.detector], a.size, a.runs, a.alpha, a.seed)?.remove(0);
    if cal.degenerate {
        eprintln!("warning: more than half of the null p-values equal 1; level {} is degenerate", cal.level);
    }
    let text = serde_json::to_string_pretty(&cal)?;
    fs::write(&a.out, text + "\n").with_context(|| format!("writing {}", a.out.display()))?;
    print_json(&serde_json::json!({
        "detector": cal.detector,
        "size": cal.size,
        "level": cal.level,
        "degenerate": cal.degenerate,
        "out": a.out,
    }))?;
    Ok(0)
}

/// Default partition of an `n`-row file: 1000/2000/2000, or 20/40/40 % when small.
fn default_split(n: usize, train: Option<usize>, source: Option<usize>, seed: u64) -> SplitSpec {
    let (dt, ds) = if n >= 5000 { (1000, 2000) } else { (n / 5, 2 * n / 5) };
    let train_size = train.unwrap_or(dt);
    let source_size = source.unwrap_or(ds);
    SplitSpec { train_size, source_size, target_size: 0, seed }
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8> {
    let ds = load(&a.input, a.label.as_deref())?;
    let text = fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let spec: ShiftSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.spec.display()))?;
    spec.validate()?;
    let sp = default_split(ds.n_rows(), a.train_size, a.source_size, a.seed);
    let (train, source, _) = split(&ds, &sp)?;
    let ctx = DetectorContext::<f64>::fit(&train, &context_config(a.trees, a.seed))?;
    let train_x = ctx.encode(&train)?.values;
    let sctx = ShiftContext { encoder: Some(&ctx.encoder), model: ctx.model.as_deref(), pool: Some(&train_x) };
    let outcome = shift::apply(&source, &spec, &sctx)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let write = |name: &str, d: &Dataset| -> Result<()> {
        let path = a.out.join(name);
        let f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        write_csv(d, f)?;
        Ok(())
    };
    write("train.csv", &train)?;
    write("source.csv", &source)?;
    write("target.csv", &outcome.target)?;
    fs::write(a.out.join("spec.json"), serde_json::to_string_pretty(&outcome.applied)? + "\n")?;
    print_json(&serde_json::json!({
        "out": a.out,
        "train_rows": train.n_rows(),
        "source_rows": source.n_rows(),
        "target_rows": outcome.target.n_rows(),
        "affected_rows": outcome.affected_rows.len(),
        "attack_failures": outcome.attack_failures,
    }))?;
    Ok(0)
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<u8> {
    let plan = ExperimentPlan::from_file(&a.plan)?;
    let report = benchmark::run(&plan, a.jobs)?;
    write_outputs(&report, &a.out)?;
    if report.summary.failed_cells > 0 {
        eprintln!("{} of {} cells failed; see the error column of cells.csv", report.summary.failed_cells, report.cells.len());
    }
    for e in &report.calibration_errors {
        eprintln!("calibration failed: {e}");
    }
    print_json(&serde_json::json!({
        "out": a.out,
        "cells": report.cells.len(),
        "failed_cells": report.summary.failed_cells,
    }))?;
    Ok(0)
}

fn cmd_compare(a: CompareArgs) -> Result<u8> {
    let text = fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let report: BenchmarkReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.report.display()))?;
    let cmp = compare_detectors(&report, &a.shift_type, a.detectors.as_deref())?;
    if !cmp.significant {
        eprintln!("Friedman: no significant difference (p = {:.4})", cmp.friedman_p);
    }
    print_json(&cmp)?;
    Ok(0)
}

fn cmd_quality(a: QualityArgs) -> Result<u8> {
    let plan = ExperimentPlan::from_file(&a.plan)?;
    let report = model_quality_experiment(&plan, &a.qualities, a.size, a.jobs)?;
    match &a.out {
        Some(path) => {
            fs::write(path, serde_json::to_string_pretty(&report)? + "\n").with_context(|| format!("writing {}", path.display()))?;
            print_json(&report.table)?;
        }
        None => print_json(&report)?,
    }
    Ok(0)
}

fn cmd_eigen(a: EigenArgs) -> Result<u8> {
    let eval = load(&a.eval, data_label(&a.model)?.as_deref())?;
    if eval.labels().is_none() {
        bail!("eigen-shift needs a labeled --eval file (pass --label)");
    }
    let ctx = match (&a.model.model, &a.model.train) {
        (None, None) => bail!("eigen-shift needs --model or --train"),
        _ => build_context(&a.model, &eval, a.seed)?,
    };
    if let Some(forest) = &ctx.forest {
        if forest.k != eval.class_count() {
            bail!("model has {} classes, evaluation set has {}", forest.k, eval.class_count());
        }
    }
    print_json(&eigen_shift_experiment(&ctx, &eval, a.alphas, a.seed)?)?;
    Ok(0)
}

fn cmd_synthetic(a: SyntheticArgs) -> Result<u8> {
    let mut spec: SyntheticSpec = match (&a.spec, &a.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, name) => {
            let name = name.as_deref().unwrap_or("balanced-binary");
            synthetic_suite(a.seed)
                .into_iter()
                .find(|d| d.name == name)
                .and_then(|d| d.synthetic)
                .with_context(|| format!("unknown preset `{name}`"))?
        }
    };
    if let Some(n) = a.n {
        spec.n = n;
    }
    if a.spec.is_some() && a.seed != 0 {
        spec.seed = a.seed;
    }
    let ds = make_synthetic(&spec)?;
    let f = fs::File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write_csv(&ds, f)?;
    print_json(&serde_json::json!({ "out": a.out, "rows": ds.n_rows(), "columns": ds.n_cols(), "classes": ds.class_count() }))?;
    Ok(0)
}
