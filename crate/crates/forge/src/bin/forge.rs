//! `forge` — turn Android packages into fused RGB feature images and drive
//! the built-in classifier over the resulting datasets.

use clap::{Parser, Subcommand, ValueEnum};
use forge::apk::{extract_artifacts, DexMode};
use forge::axml;
use forge::classify::{
    decode_model, encode_model, evaluate_binary, evaluate_multiclass, featurize, train,
};
use forge::dex;
use forge::fuse::encode_png;
use forge::pipeline::{
    fuse_apk_bytes, load_config, make_report, png_path, read_manifest, run_pipeline,
    PipelineConfig, PipelineError, RecordStatus, ReportRow,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "forge",
    version,
    about = "Convert Android APKs into multi-feature fused RGB images and classify them"
)]
struct Cli {
    /// TOML configuration file (any subset of keys; the rest default)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for batch commands
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Channel mask, a non-empty subset of "rgb" (e.g. "rg" drops blue)
    #[arg(long, global = true, value_name = "MASK")]
    channels: Option<String>,
    /// Which DEX members feed the code channel
    #[arg(long, global = true, value_enum, value_name = "MODE")]
    dex_mode: Option<DexModeArg>,
    /// Re-threshold binary channels after resizing
    #[arg(long, global = true)]
    rebinarize: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum DexModeArg {
    /// Concatenate every .dex member in name order
    Concat,
    /// Use only the primary classes.dex
    ClassesOnly,
}

impl From<DexModeArg> for DexMode {
    fn from(v: DexModeArg) -> Self {
        match v {
            DexModeArg::Concat => DexMode::ConcatAll,
            DexModeArg::ClassesOnly => DexMode::ClassesOnly,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract raw DEX members and AndroidManifest.xml from one APK
    Extract {
        apk: PathBuf,
        /// Directory to write the members into
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the API calls referenced by one APK, one per line
    DumpApis {
        apk: PathBuf,
        /// Keep calls outside the platform whitelist too
        #[arg(long)]
        include_third_party: bool,
    },
    /// Print the decoded AndroidManifest.xml of one APK
    DumpManifest { apk: PathBuf },
    /// Fuse one APK into a single RGB PNG
    Imagize {
        apk: PathBuf,
        /// Output PNG path
        #[arg(long)]
        out: PathBuf,
    },
    /// Batch-convert a directory of APKs into PNGs plus a JSONL manifest
    Run {
        input: PathBuf,
        /// Output directory for PNGs and manifest.jsonl
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the built-in classifier from a dataset manifest
    Train {
        /// Path to a manifest.jsonl produced by `forge run`
        #[arg(long)]
        manifest: PathBuf,
        /// Output model file
        #[arg(long)]
        out: PathBuf,
        /// Per-channel downsample size (overrides config feature_dim)
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Evaluate a trained model against a dataset manifest
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Positive class for binary metrics; omitted = one-vs-rest report
        #[arg(long)]
        positive: Option<String>,
        /// Write the summary row as JSON (consumed by `forge report`)
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Merge eval JSON rows into a text table and CSV
    Report {
        /// JSON files written by `forge eval --json`
        inputs: Vec<PathBuf>,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes: usage 1, no usable inputs 2,
/// internal 3.
enum Failure {
    Usage(String),
    NoInputs(String),
    Internal(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (code, msg) = match self {
            Failure::Usage(m) => (1, m),
            Failure::NoInputs(m) => (2, m),
            Failure::Internal(m) => (3, m),
        };
        eprintln!("forge: {msg}");
        ExitCode::from(code)
    }
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn no_inputs<E: std::fmt::Display>(e: E) -> Failure {
    Failure::NoInputs(e.to_string())
}

fn internal<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Internal(e.to_string())
}

fn from_pipeline(e: PipelineError) -> Failure {
    match e {
        PipelineError::NoInputs(_) => Failure::NoInputs(e.to_string()),
        PipelineError::UnwritableOutput(_) => Failure::Internal(e.to_string()),
        PipelineError::BadConfig(_) => Failure::Usage(e.to_string()),
    }
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path).map_err(from_pipeline)?,
        None => PipelineConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(mask) = &cli.channels {
        cfg.fuse.channels = mask.parse().map_err(usage)?;
    }
    if let Some(mode) = cli.dex_mode {
        cfg.dex_mode = mode.into();
    }
    if cli.rebinarize {
        cfg.rebinarize = true;
    }
    if let Ok(value) = std::env::var("FORGE_SEED") {
        cfg.seed = value
            .parse()
            .map_err(|_| Failure::Usage(format!("FORGE_SEED must be a u64, got '{value}'")))?;
    }
    Ok(cfg)
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::NoInputs(format!("{}: {e}", path.display())))
}

/// Flatten a ZIP member name into a single safe file name.
fn member_file_name(name: &str) -> String {
    name.replace(['/', '\\'], "_")
}

fn cmd_extract(apk: &Path, out: &Path, cfg: &PipelineConfig) -> Result<(), Failure> {
    let bytes = read_input(apk)?;
    let artifacts = extract_artifacts(&bytes, cfg.dex_mode).map_err(no_inputs)?;
    std::fs::create_dir_all(out).map_err(internal)?;
    for (name, payload) in &artifacts.dexes {
        let target = out.join(member_file_name(name));
        std::fs::write(&target, payload).map_err(internal)?;
        println!("wrote {} ({} bytes)", target.display(), payload.len());
    }
    let target = out.join("AndroidManifest.xml");
    std::fs::write(&target, &artifacts.manifest).map_err(internal)?;
    println!(
        "wrote {} ({} bytes)",
        target.display(),
        artifacts.manifest.len()
    );
    for w in &artifacts.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cmd_dump_apis(apk: &Path, third_party: bool, cfg: &PipelineConfig) -> Result<(), Failure> {
    let bytes = read_input(apk)?;
    let artifacts = extract_artifacts(&bytes, cfg.dex_mode).map_err(no_inputs)?;
    let mut calls = std::collections::BTreeSet::new();
    for (name, payload) in &artifacts.dexes {
        let tables = dex::parse_dex(payload)
            .map_err(|e| Failure::NoInputs(format!("{e} (in {name})")))?;
        let report = dex::scan_invokes_with(
            payload,
            &tables,
            third_party || cfg.include_third_party,
            &cfg.api_whitelist,
        );
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        calls.extend(report.calls);
    }
    for call in calls {
        println!("{call}");
    }
    Ok(())
}

fn cmd_dump_manifest(apk: &Path, cfg: &PipelineConfig) -> Result<(), Failure> {
    let bytes = read_input(apk)?;
    let artifacts = extract_artifacts(&bytes, cfg.dex_mode).map_err(no_inputs)?;
    let doc = axml::decode_axml(&artifacts.manifest).map_err(no_inputs)?;
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", doc.text);
    Ok(())
}

fn cmd_imagize(apk: &Path, out: &Path, cfg: &PipelineConfig) -> Result<(), Failure> {
    let bytes = read_input(apk)?;
    let fused = fuse_apk_bytes(&bytes, cfg).map_err(Failure::NoInputs)?;
    for w in &fused.warnings {
        eprintln!("warning: {w}");
    }
    let png = encode_png(&fused.image).map_err(internal)?;
    std::fs::write(out, &png).map_err(internal)?;
    println!(
        "wrote {} ({}x{}, {} bytes)",
        out.display(),
        fused.image.width(),
        fused.image.height(),
        png.len()
    );
    Ok(())
}

fn cmd_run(input: &Path, out: &Path, cfg: &PipelineConfig) -> Result<(), Failure> {
    let records = run_pipeline(input, out, cfg).map_err(from_pipeline)?;
    let ok = records
        .iter()
        .filter(|r| r.status == RecordStatus::Ok)
        .count();
    let failed = records.len() - ok;
    println!(
        "{} processed: {ok} ok, {failed} failed -> {}",
        records.len(),
        out.join("manifest.jsonl").display()
    );
    for r in &records {
        if let RecordStatus::Failed(reason) = &r.status {
            eprintln!("failed: {} ({reason})", r.apk_path);
        }
    }
    if ok == 0 {
        return Err(Failure::NoInputs("no APK converted successfully".into()));
    }
    Ok(())
}

/// Load features+labels for every Ok record of a manifest.
fn featurized_records(
    manifest: &Path,
    dim: usize,
) -> Result<Vec<(Vec<f64>, String)>, Failure> {
    let records = read_manifest(manifest).map_err(from_pipeline)?;
    let mut out = Vec::new();
    for r in &records {
        if r.status != RecordStatus::Ok {
            continue;
        }
        let path = png_path(manifest, r);
        let png = std::fs::read(&path)
            .map_err(|e| Failure::NoInputs(format!("{}: {e}", path.display())))?;
        let img = forge::fuse::decode_png(&png).map_err(no_inputs)?;
        let features = featurize(&img, dim).map_err(internal)?;
        out.push((features, r.label.clone()));
    }
    if out.is_empty() {
        return Err(Failure::NoInputs(format!(
            "{}: no Ok records",
            manifest.display()
        )));
    }
    Ok(out)
}

fn cmd_train(
    manifest: &Path,
    out: &Path,
    dim: Option<usize>,
    cfg: &PipelineConfig,
) -> Result<(), Failure> {
    let dim = dim.unwrap_or(cfg.feature_dim);
    let samples = featurized_records(manifest, dim)?;
    let outcome = train(&samples, cfg.classifier, cfg.seed).map_err(no_inputs)?;
    let correct = samples
        .iter()
        .filter(|(x, l)| outcome.model.predict_label(x) == l)
        .count();
    std::fs::write(out, encode_model(&outcome.model)).map_err(internal)?;
    println!(
        "trained on {} samples, {} classes; final loss {:.6}; train accuracy {:.4}; model -> {}",
        samples.len(),
        outcome.model.classes.len(),
        outcome.loss_trace.last().copied().unwrap_or(f64::NAN),
        correct as f64 / samples.len() as f64,
        out.display()
    );
    Ok(())
}

fn cmd_eval(
    manifest: &Path,
    model_path: &Path,
    positive: Option<&str>,
    json: Option<&Path>,
) -> Result<(), Failure> {
    let model_bytes = std::fs::read(model_path)
        .map_err(|e| Failure::NoInputs(format!("{}: {e}", model_path.display())))?;
    let model = decode_model(&model_bytes).map_err(no_inputs)?;
    let dim = ((model.n_features / 3) as f64).sqrt().round() as usize;
    if 3 * dim * dim != model.n_features {
        return Err(Failure::NoInputs(format!(
            "model feature count {} is not 3·d²",
            model.n_features
        )));
    }
    let records = featurized_records(manifest, dim)?;

    let row = if let Some(pos) = positive {
        let m = evaluate_binary(&model, &records, pos).map_err(no_inputs)?;
        println!(
            "binary vs '{pos}': tp={} tn={} fp={} fn={}",
            m.tp, m.tn, m.fp, m.fn_
        );
        ReportRow {
            model: "builtin".into(),
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        }
    } else {
        let rep = evaluate_multiclass(&model, &records).map_err(no_inputs)?;
        for (class, m) in &rep.per_class {
            println!(
                "{class:<12} tp={:<4} tn={:<4} fp={:<4} fn={:<4} p={:.4} r={:.4} f1={:.4}",
                m.tp, m.tn, m.fp, m.fn_, m.precision, m.recall, m.f1
            );
        }
        println!(
            "macro    p={:.4} r={:.4} f1={:.4}",
            rep.macro_avg.precision, rep.macro_avg.recall, rep.macro_avg.f1
        );
        println!(
            "weighted p={:.4} r={:.4} f1={:.4}",
            rep.weighted_avg.precision, rep.weighted_avg.recall, rep.weighted_avg.f1
        );
        ReportRow {
            model: "builtin".into(),
            accuracy: rep.accuracy,
            precision: rep.macro_avg.precision,
            recall: rep.macro_avg.recall,
            f1: rep.macro_avg.f1,
        }
    };
    println!(
        "accuracy={:.4} precision={:.4} recall={:.4} f1={:.4}",
        row.accuracy, row.precision, row.recall, row.f1
    );
    if let Some(path) = json {
        let value = serde_json::json!({
            "model": row.model,
            "accuracy": row.accuracy,
            "precision": row.precision,
            "recall": row.recall,
            "f1": row.f1,
        });
        std::fs::write(path, format!("{value}\n")).map_err(internal)?;
    }
    Ok(())
}

fn cmd_report(inputs: &[PathBuf], csv_out: Option<&Path>) -> Result<(), Failure> {
    if inputs.is_empty() {
        return Err(Failure::Usage("report needs at least one JSON input".into()));
    }
    let mut rows = Vec::new();
    for path in inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::NoInputs(format!("{}: {e}", path.display())))?;
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Failure::NoInputs(format!("{}: {e}", path.display())))?;
        let field = |k: &str| -> Result<f64, Failure> {
            v.get(k)
                .and_then(|x| x.as_f64())
                .ok_or_else(|| Failure::NoInputs(format!("{}: missing '{k}'", path.display())))
        };
        rows.push(ReportRow {
            model: v
                .get("model")
                .and_then(|x| x.as_str())
                .unwrap_or("builtin")
                .to_string(),
            accuracy: field("accuracy")?,
            precision: field("precision")?,
            recall: field("recall")?,
            f1: field("f1")?,
        });
    }
    let (text, csv) = make_report(&rows);
    print!("{text}");
    match csv_out {
        Some(path) => std::fs::write(path, csv).map_err(internal)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_cli(cli: &Cli) -> Result<(), Failure> {
    let cfg = effective_config(cli)?;
    match &cli.cmd {
        Cmd::Extract { apk, out } => cmd_extract(apk, out, &cfg),
        Cmd::DumpApis {
            apk,
            include_third_party,
        } => cmd_dump_apis(apk, *include_third_party, &cfg),
        Cmd::DumpManifest { apk } => cmd_dump_manifest(apk, &cfg),
        Cmd::Imagize { apk, out } => cmd_imagize(apk, out, &cfg),
        Cmd::Run { input, out } => cmd_run(input, out, &cfg),
        Cmd::Train { manifest, out, dim } => cmd_train(manifest, out, *dim, &cfg),
        Cmd::Eval {
            manifest,
            model,
            positive,
            json,
        } => cmd_eval(manifest, model, positive.as_deref(), json.as_deref()),
        Cmd::Report { inputs, csv } => cmd_report(inputs, csv.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own exit code differs from ours; print its rendering
            // but keep 0 for --help/--version and 1 for usage errors.
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run_cli(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
