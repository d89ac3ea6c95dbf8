//! satflow: batch pipeline for encrypted-traffic classification experiments
//! and soft-QoS conformance checks.
//!
//! Subcommands mirror the experiment stages: `gen` emulated traces,
//! `featurize` them into ML datasets, `train` a classifier, evaluate with
//! `eval-cv` / `eval-cross`, analyze features with `rank` / `ablate`, check
//! flows against path descriptors with `verify`, and collate results with
//! `report`. Every artifact is accompanied by a manifest with the full
//! configuration, and partial outputs are removed on failure.

mod util;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use satflow::eval::{ablation, cross_condition_eval, monte_carlo_cv, AblationSpec, CvSpec};
use satflow::features::{
    raw_series_dataset, read_dataset_csv, table_dataset, write_dataset_csv, Normalization,
};
use satflow::flow::{assemble_flows, window_flow, Flow, FlowError, TrafficClass, WindowSpec};
use satflow::infotheory::{
    subset_analysis, BinStrategy, Binning, DiscretizedDataset, SUBSET_GUARD_DEFAULT,
};
use satflow::ingest::{read_csv_trace, write_csv_trace};
use satflow::ml::{train, ModelSpec, TrainedModel};
use satflow::qos::{load_pvd_config, monitor_trace, render_text};
use satflow::traffic::{generate_dataset, ScenarioFile};

use util::{write_manifest, Outputs};

#[derive(Parser)]
#[command(
    name = "satflow",
    version,
    about = "Traffic classification and soft-QoS toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an emulated trace dataset from a scenario config.
    Gen(GenArgs),
    /// Turn generated traces into an ML dataset (raw series or feature table).
    Featurize(FeaturizeArgs),
    /// Fit one classifier and save it as JSON.
    Train(TrainArgs),
    /// Monte Carlo cross-validation over a model grid.
    EvalCv(EvalCvArgs),
    /// Train on one dataset, score on another, per normalization mode.
    EvalCross(EvalCrossArgs),
    /// Information-theoretic feature ranking (and optional subset analysis).
    Rank(RankArgs),
    /// Feature-ablation study over the essential-feature subsets.
    Ablate(AblateArgs),
    /// Check flows against path descriptors with a trained model.
    Verify(VerifyArgs),
    /// Summarize the manifests and reports in an output directory.
    Report(ReportArgs),
}

#[derive(Args, Serialize)]
struct GenArgs {
    /// Scenario config (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (traces/, labels.csv, manifest.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct FeaturizeArgs {
    /// A `gen` output directory (reads traces/*.csv and labels.csv).
    #[arg(long)]
    data: PathBuf,
    /// Representation: `raw` (throughput series) or `table` (12 features).
    #[arg(long)]
    repr: String,
    /// Per-sequence normalization for raw series: `minmax` or `stdnorm`.
    #[arg(long)]
    norm: Option<String>,
    /// Throughput bin width in seconds.
    #[arg(long, default_value_t = 0.1)]
    bin: f64,
    /// Samples (bins) per observation window.
    #[arg(long, default_value_t = 50)]
    samples: usize,
    /// Window stride in bins; defaults to `samples` (non-overlapping).
    #[arg(long)]
    stride: Option<usize>,
    /// Output dataset CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Model spec, e.g. `rf:trees=50,depth=12,leaves=256` or `knn:k=3`.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalCvArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Semicolon-separated model specs.
    #[arg(long)]
    models: String,
    #[arg(long, default_value_t = 200)]
    repeats: usize,
    /// Train:validation split ratio.
    #[arg(long, default_value = "5:1")]
    ratio: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report output.
    #[arg(long)]
    out: PathBuf,
    /// Optional five-number summary CSV (for box plots).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvalCrossArgs {
    #[arg(long)]
    train_dataset: PathBuf,
    #[arg(long)]
    test_dataset: PathBuf,
    /// Comma-separated normalization modes (`minmax`, `stdnorm`).
    #[arg(long, default_value = "minmax,stdnorm")]
    norms: String,
    /// Semicolon-separated model specs.
    #[arg(long)]
    models: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report output.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV (model,normalization,accuracy).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct RankArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Binning strategy: `equal-frequency` or `equal-width`.
    #[arg(long, default_value = "equal-frequency")]
    strategy: String,
    /// How many features to select; defaults to all.
    #[arg(long)]
    top: Option<usize>,
    /// Ranking CSV output (feature,weight,rank).
    #[arg(long)]
    out: PathBuf,
    /// Optional exhaustive subset report CSV (subset,i_bits,h_cond_bits).
    #[arg(long)]
    subsets: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AblateArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Semicolon-separated model specs.
    #[arg(long)]
    models: String,
    #[arg(long, default_value_t = 200)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output (deleted,model,median,delta_pct).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// A `gen` output directory with traces to verify.
    #[arg(long)]
    data: PathBuf,
    /// Path descriptor config (TOML).
    #[arg(long)]
    pvd: PathBuf,
    /// Trained model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    bin: f64,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    /// JSON report output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ReportArgs {
    /// Directory containing manifests and report files.
    #[arg(long)]
    dir: PathBuf,
    /// Write the digest here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut outputs = Outputs::default();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(&args, &mut outputs),
        Command::Featurize(args) => cmd_featurize(&args, &mut outputs),
        Command::Train(args) => cmd_train(&args, &mut outputs),
        Command::EvalCv(args) => cmd_eval_cv(&args, &mut outputs),
        Command::EvalCross(args) => cmd_eval_cross(&args, &mut outputs),
        Command::Rank(args) => cmd_rank(&args, &mut outputs),
        Command::Ablate(args) => cmd_ablate(&args, &mut outputs),
        Command::Verify(args) => cmd_verify(&args, &mut outputs),
        Command::Report(args) => cmd_report(&args, &mut outputs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            outputs.discard();
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_gen(args: &GenArgs, outputs: &mut Outputs) -> Result<()> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading scenario {}", args.scenario.display()))?;
    let (config, profiles) = ScenarioFile::from_toml_str(&text)?;
    let flows = generate_dataset(&config, &profiles)?;

    let trace_dir = args.out.join("traces");
    std::fs::create_dir_all(&trace_dir)?;
    let mut labels = String::from("flow_id,label\n");
    for flow in &flows {
        let path = trace_dir.join(format!("{}.csv", flow.key));
        write_csv_trace(&path, &flow.records)?;
        outputs.track(&path);
        let label = flow.label.expect("generated flows are labeled");
        let _ = writeln!(labels, "{},{}", flow.key, label);
    }
    outputs.write(&args.out.join("labels.csv"), &labels)?;
    write_manifest(outputs, &args.out, "gen", args)?;
    println!(
        "wrote {} trace files to {}",
        flows.len(),
        args.out.display()
    );
    Ok(())
}

/// Reads a `gen` output directory back into labeled flows.
fn load_flows(data: &Path) -> Result<Vec<Flow>> {
    let labels_path = data.join("labels.csv");
    let labels_text = std::fs::read_to_string(&labels_path)
        .with_context(|| format!("reading {}", labels_path.display()))?;
    let mut labels: BTreeMap<String, TrafficClass> = BTreeMap::new();
    for (i, line) in labels_text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let (id, class) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("labels.csv line {}: expected flow_id,label", i + 1))?;
        let class = TrafficClass::parse(class)
            .ok_or_else(|| anyhow!("labels.csv line {}: unknown class `{class}`", i + 1))?;
        labels.insert(id.to_string(), class);
    }

    let trace_dir = data.join("traces");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&trace_dir)
        .with_context(|| format!("reading {}", trace_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();

    let mut records = Vec::new();
    for path in &paths {
        records.extend(read_csv_trace(path)?);
    }
    let mut flows = assemble_flows(records);
    for flow in &mut flows {
        flow.label = labels.get(flow.key.as_str()).copied();
    }
    Ok(flows)
}

fn window_spec(bin: f64, samples: usize, stride: Option<usize>) -> Result<WindowSpec> {
    Ok(WindowSpec::new(bin, samples, stride.unwrap_or(samples))?)
}

fn cmd_featurize(args: &FeaturizeArgs, outputs: &mut Outputs) -> Result<()> {
    let spec = window_spec(args.bin, args.samples, args.stride)?;
    let flows = load_flows(&args.data)?;

    let mut windows = Vec::new();
    let mut too_short = 0usize;
    for flow in &flows {
        if flow.label.is_none() {
            bail!("flow {} has no label in labels.csv", flow.key);
        }
        match window_flow(flow, &spec) {
            Ok(mut w) => windows.append(&mut w),
            Err(FlowError::FlowTooShort { .. }) | Err(FlowError::EmptyFlow) => too_short += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if too_short > 0 {
        eprintln!("excluded {too_short} flows shorter than one window");
    }

    let dataset = match args.repr.as_str() {
        "raw" => {
            let norm = match args.norm.as_deref() {
                None => None,
                Some(name) => Some(
                    Normalization::parse(name)
                        .ok_or_else(|| anyhow!("unknown normalization `{name}`"))?,
                ),
            };
            raw_series_dataset(&windows, &spec, norm)?
        }
        "table" => {
            let (ds, skipped) = table_dataset(&windows)?;
            if skipped > 0 {
                eprintln!("excluded {skipped} windows with fewer than 2 packets");
            }
            ds
        }
        other => bail!("unknown representation `{other}`, expected raw or table"),
    };

    write_dataset_csv(&args.out, &dataset)?;
    outputs.track(&args.out);
    write_manifest(outputs, &args.out, "featurize", args)?;
    println!(
        "wrote {} rows x {} features to {}",
        dataset.n_samples(),
        dataset.n_features(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs, outputs: &mut Outputs) -> Result<()> {
    let dataset = read_dataset_csv(&args.dataset)?;
    let spec = ModelSpec::parse(&args.model)?;
    let model = train(&spec, &dataset, args.seed)?;
    outputs.write(&args.out, &model.to_json()?)?;
    write_manifest(outputs, &args.out, "train", args)?;
    println!("trained {spec} on {} samples", dataset.n_samples());
    Ok(())
}

fn parse_models(text: &str) -> Result<Vec<ModelSpec>> {
    let specs: Result<Vec<ModelSpec>, _> = text
        .split(';')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(ModelSpec::parse)
        .collect();
    let specs = specs?;
    if specs.is_empty() {
        bail!("no model specs given");
    }
    Ok(specs)
}

fn parse_ratio(text: &str) -> Result<(u32, u32)> {
    let (t, v) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("ratio must look like 5:1"))?;
    Ok((t.parse()?, v.parse()?))
}

#[derive(Serialize)]
struct CvReportRow {
    model: String,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
    samples: Vec<f64>,
}

fn cmd_eval_cv(args: &EvalCvArgs, outputs: &mut Outputs) -> Result<()> {
    let dataset = read_dataset_csv(&args.dataset)?;
    let specs = parse_models(&args.models)?;
    let (train_ratio, validation_ratio) = parse_ratio(&args.ratio)?;
    let cv = CvSpec {
        repeats: args.repeats,
        train_ratio,
        validation_ratio,
        seed: args.seed,
    };

    let mut rows = Vec::new();
    for spec in &specs {
        let dist = monte_carlo_cv(&dataset, spec, &cv)?;
        let s = dist.summary;
        println!(
            "{spec}: median {:.4} (q1 {:.4}, q3 {:.4})",
            s.median, s.q1, s.q3
        );
        rows.push(CvReportRow {
            model: spec.to_string(),
            min: s.min,
            q1: s.q1,
            median: s.median,
            q3: s.q3,
            max: s.max,
            samples: dist.samples,
        });
    }
    outputs.write(&args.out, &serde_json::to_string_pretty(&rows)?)?;
    if let Some(summary) = &args.summary {
        let mut csv = String::from("model,min,q1,median,q3,max\n");
        for r in &rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                r.model, r.min, r.q1, r.median, r.q3, r.max
            );
        }
        outputs.write(summary, &csv)?;
    }
    write_manifest(outputs, &args.out, "eval-cv", args)?;
    Ok(())
}

fn parse_norms(text: &str) -> Result<Vec<Normalization>> {
    let norms: Result<Vec<Normalization>, _> = text
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| Normalization::parse(s).ok_or_else(|| anyhow!("unknown normalization `{s}`")))
        .collect();
    let norms = norms?;
    if norms.is_empty() {
        bail!("no normalization modes given");
    }
    Ok(norms)
}

fn cmd_eval_cross(args: &EvalCrossArgs, outputs: &mut Outputs) -> Result<()> {
    let train_ds = read_dataset_csv(&args.train_dataset)?;
    let test_ds = read_dataset_csv(&args.test_dataset)?;
    let norms = parse_norms(&args.norms)?;
    let specs = parse_models(&args.models)?;

    let results = cross_condition_eval(&train_ds, &test_ds, &norms, &specs, args.seed)?;
    for r in &results {
        println!(
            "{} {}: {:.4}",
            r.model,
            r.normalization.as_str(),
            r.accuracy
        );
    }
    outputs.write(&args.out, &serde_json::to_string_pretty(&results)?)?;
    if let Some(csv_path) = &args.csv {
        let mut csv = String::from("model,normalization,accuracy\n");
        for r in &results {
            let _ = writeln!(
                csv,
                "{},{},{}",
                r.model,
                r.normalization.as_str(),
                r.accuracy
            );
        }
        outputs.write(csv_path, &csv)?;
    }
    write_manifest(outputs, &args.out, "eval-cross", args)?;
    Ok(())
}

fn cmd_rank(args: &RankArgs, outputs: &mut Outputs) -> Result<()> {
    let dataset = read_dataset_csv(&args.dataset)?;
    let strategy = match args.strategy.as_str() {
        "equal-frequency" => BinStrategy::EqualFrequency,
        "equal-width" => BinStrategy::EqualWidth,
        other => bail!("unknown binning strategy `{other}`"),
    };
    let binning = Binning {
        strategy,
        bins: args.bins,
    };
    let discretized = DiscretizedDataset::from_dataset(&dataset, binning)?;
    for name in &discretized.degenerate_features {
        eprintln!("warning: feature `{name}` is constant; it lands in a single bin");
    }

    let top = args.top.unwrap_or_else(|| discretized.n_features());
    let ranking = satflow::infotheory::mrmr_rank(&discretized, top)?;
    let mut csv = String::from("feature,weight,rank\n");
    for (i, entry) in ranking.entries.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", entry.feature, entry.weight, i + 1);
    }
    outputs.write(&args.out, &csv)?;

    if let Some(subsets_path) = &args.subsets {
        let results = subset_analysis(&discretized, SUBSET_GUARD_DEFAULT)?;
        let mut csv = String::from("subset,i_bits,h_cond_bits\n");
        for r in &results {
            let _ = writeln!(
                csv,
                "{},{},{}",
                r.features.join("+"),
                r.i_bits,
                r.h_cond_bits
            );
        }
        outputs.write(subsets_path, &csv)?;
    }
    write_manifest(outputs, &args.out, "rank", args)?;
    println!(
        "ranked {} features; top: {}",
        ranking.entries.len(),
        ranking
            .entries
            .first()
            .map(|e| e.feature.as_str())
            .unwrap_or("-")
    );
    Ok(())
}

fn cmd_ablate(args: &AblateArgs, outputs: &mut Outputs) -> Result<()> {
    let dataset = read_dataset_csv(&args.dataset)?;
    let specs = parse_models(&args.models)?;
    let cv = CvSpec {
        repeats: args.repeats,
        seed: args.seed,
        ..CvSpec::default()
    };
    let table = ablation(&dataset, &AblationSpec::essential(), &specs, &cv)?;

    let mut csv = String::from("deleted,model,median,delta_pct\n");
    for row in &table.rows {
        for (m, model) in table.models.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                row.deleted.join("+"),
                model,
                row.medians[m],
                row.delta_pct[m]
            );
        }
    }
    outputs.write(&args.out, &csv)?;
    write_manifest(outputs, &args.out, "ablate", args)?;
    for (m, model) in table.models.iter().enumerate() {
        let worst = table
            .rows
            .iter()
            .map(|r| r.delta_pct[m])
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{model}: baseline {:.4}, worst delta {worst:.2}%",
            table.baseline_medians[m]
        );
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs, outputs: &mut Outputs) -> Result<()> {
    let spec = window_spec(args.bin, args.samples, None)?;
    let flows = load_flows(&args.data)?;
    let descriptors = load_pvd_config(&args.pvd)?;
    let model_text = std::fs::read_to_string(&args.model)
        .with_context(|| format!("reading model {}", args.model.display()))?;
    let model = TrainedModel::from_json(&model_text)?;

    let report = monitor_trace(&flows, &descriptors, &model, &spec)?;
    print!("{}", render_text(&report));
    outputs.write(&args.out, &serde_json::to_string_pretty(&report)?)?;
    write_manifest(outputs, &args.out, "verify", args)?;
    Ok(())
}

fn cmd_report(args: &ReportArgs, outputs: &mut Outputs) -> Result<()> {
    let mut digest = String::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&args.dir)
        .with_context(|| format!("reading {}", args.dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();

    let mut found = 0;
    for path in &entries {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_default();
        if !name.ends_with("manifest.json") {
            continue;
        }
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let command = value.get("command").and_then(|v| v.as_str()).unwrap_or("?");
        let version = value.get("version").and_then(|v| v.as_str()).unwrap_or("?");
        let outputs_list = value
            .get("outputs")
            .and_then(|v| v.as_array())
            .map(|a| a.len())
            .unwrap_or(0);
        let _ = writeln!(
            digest,
            "{name}: command `{command}` (v{version}), {outputs_list} artifacts"
        );
        found += 1;
    }
    if found == 0 {
        bail!("no manifests found under {}", args.dir.display());
    }
    match &args.out {
        Some(path) => {
            outputs.write(path, &digest)?;
            write_manifest(outputs, path, "report", args)?;
        }
        None => print!("{digest}"),
    }
    Ok(())
}
