//! Batch orchestration: walk a directory of APKs, run
//! extract → analyze → plot → enhance → fuse per package, write PNGs and a
//! JSON Lines manifest, and summarize evaluation results.
//!
//! Every per-APK failure is isolated into its own record; the batch never
//! aborts because one package is malformed. Output is deterministic: records
//! are sorted by path, workers only change wall-clock time.

use crate::apk::{extract_artifacts, DexMode};
use crate::axml;
use crate::byteplot::{bytes_to_gray_with, WidthTable};
use crate::dex;
use crate::enhance::{EnhanceConfig, Enhancement};
use crate::fuse::{encode_png, lanczos_resize, merge_rgb, FuseConfig};
use crate::raster::{GrayImage, RgbImage};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("NoInputs: {0}")]
    NoInputs(String),
    #[error("UnwritableOutput: {0}")]
    UnwritableOutput(String),
    #[error("BadConfig: {0}")]
    BadConfig(String),
}

/// Everything the batch driver needs; loadable from a TOML file, every field
/// optional with these defaults.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub width_table: WidthTable,
    pub enhance: EnhanceConfig,
    pub fuse: FuseConfig,
    /// Class-prefix whitelist for the API channel.
    pub api_whitelist: Vec<String>,
    pub include_third_party: bool,
    pub dex_mode: DexMode,
    pub workers: usize,
    pub seed: u64,
    /// Re-threshold binary channels after Lanczos resampling (off by
    /// default: resampling ringing is part of the fused texture).
    pub rebinarize: bool,
    /// Built-in classifier settings.
    pub classifier: crate::classify::Hyperparams,
    /// Per-channel downsample size fed to the classifier (features are
    /// 3·dim² long).
    pub feature_dim: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            width_table: WidthTable::default(),
            enhance: EnhanceConfig::default(),
            fuse: FuseConfig::default(),
            api_whitelist: dex::default_api_whitelist(),
            include_third_party: false,
            dex_mode: DexMode::default(),
            workers: 1,
            seed: 42,
            rebinarize: false,
            classifier: crate::classify::Hyperparams::default(),
            feature_dim: 32,
        }
    }
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::BadConfig(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| PipelineError::BadConfig(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelStats {
    pub min: u8,
    pub max: u8,
    pub mean: f64,
}

impl ChannelStats {
    fn of(plane: &GrayImage) -> Self {
        let px = plane.pixels();
        let mut min = 255u8;
        let mut max = 0u8;
        let mut sum = 0u64;
        for &p in px {
            min = min.min(p);
            max = max.max(p);
            sum += p as u64;
        }
        Self {
            min,
            max,
            mean: sum as f64 / px.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "reason", rename_all = "kebab-case")]
pub enum RecordStatus {
    Ok,
    Failed(String),
}

/// One APK's manifest line: provenance, outcome and channel statistics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetRecord {
    /// Input path relative to the batch root, unix separators.
    pub apk_path: String,
    /// SHA-256 of the APK bytes, 64 lowercase hex chars ("" when unreadable).
    pub apk_sha256: String,
    pub label: String,
    /// PNG file name relative to the manifest's directory; empty for
    /// failed records.
    pub output_png: String,
    pub status: RecordStatus,
    pub warnings: Vec<String>,
    /// R/G/B statistics of the planes as fused (masked channels are zero).
    pub channel_stats: Option<[ChannelStats; 3]>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// The three resized feature planes plus the fused image.
pub struct FusedImage {
    /// Final planes in channel order (dex, manifest, api), post-mask.
    pub planes: [GrayImage; 3],
    pub image: RgbImage,
    pub warnings: Vec<String>,
}

fn rebinarize(plane: &mut GrayImage) {
    let w = plane.width();
    for y in 0..plane.height() {
        for x in 0..w {
            let v = plane.get(x, y);
            plane.set(x, y, if v > 127 { 255 } else { 0 });
        }
    }
}

/// Plot → enhance → resize one feature payload. An empty payload yields an
/// all-zero plane and a warning instead of failing the APK.
fn feature_plane(
    payload: &[u8],
    enhancement: Enhancement,
    what: &str,
    cfg: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<GrayImage, String> {
    let target = cfg.fuse.target;
    if payload.is_empty() {
        warnings.push(format!("EmptyPayload: {what} channel zeroed"));
        return Ok(GrayImage::zeroed(target, target));
    }
    let plot = bytes_to_gray_with(payload, &cfg.width_table).map_err(|e| e.to_string())?;
    let (enhanced, mut w) = enhancement
        .apply(&plot, &cfg.enhance)
        .map_err(|e| e.to_string())?;
    warnings.append(&mut w);
    let mut resized = lanczos_resize(&enhanced, target, target).map_err(|e| e.to_string())?;
    if cfg.rebinarize && enhancement.is_binary() {
        rebinarize(&mut resized);
    }
    Ok(resized)
}

/// Run the whole per-APK image pipeline on in-memory APK bytes.
///
/// Channel assignment: red = DEX byteplot through Canny, green = decoded
/// manifest text through histogram equalization, blue = API call text
/// through adaptive thresholding.
pub fn fuse_apk_bytes(bytes: &[u8], cfg: &PipelineConfig) -> Result<FusedImage, String> {
    let artifacts = extract_artifacts(bytes, cfg.dex_mode).map_err(|e| e.to_string())?;
    let mut warnings = artifacts.warnings.clone();

    let dex_payload = artifacts.dex_concat();

    let manifest_doc = axml::decode_axml(&artifacts.manifest).map_err(|e| e.to_string())?;
    warnings.extend(manifest_doc.warnings.iter().cloned());
    let manifest_payload = axml::manifest_text_bytes(&manifest_doc);

    let mut calls = BTreeSet::new();
    for (name, payload) in &artifacts.dexes {
        let tables = dex::parse_dex(payload).map_err(|e| format!("{e} (in {name})"))?;
        warnings.extend(tables.warnings.iter().cloned());
        let report =
            dex::scan_invokes_with(payload, &tables, cfg.include_third_party, &cfg.api_whitelist);
        warnings.extend(report.warnings.iter().cloned());
        calls.extend(report.calls);
    }
    let mut api_payload = Vec::new();
    for call in &calls {
        api_payload.extend_from_slice(call.as_bytes());
        api_payload.push(b'\n');
    }

    let red = feature_plane(&dex_payload, Enhancement::Canny, "dex", cfg, &mut warnings)?;
    let green = feature_plane(
        &manifest_payload,
        Enhancement::HistEq,
        "manifest",
        cfg,
        &mut warnings,
    )?;
    let blue = feature_plane(
        &api_payload,
        Enhancement::AdaptiveThreshold,
        "api",
        cfg,
        &mut warnings,
    )?;

    let image = merge_rgb(&red, &green, &blue, cfg.fuse.channels).map_err(|e| e.to_string())?;
    // Report the planes exactly as fused: masked channels read back as zero.
    let planes = [image.channel(0), image.channel(1), image.channel(2)];
    Ok(FusedImage {
        planes,
        image,
        warnings,
    })
}

/// An input APK with its resolved label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledApk {
    pub path: PathBuf,
    /// Path relative to the input root, unix separators; manifest key.
    pub rel: String,
    pub label: String,
}

/// Find `*.apk` files (case-insensitive) under `input_dir` and resolve
/// labels: `labels.csv` (`filename,label`) takes precedence, otherwise the
/// immediate parent directory name labels the file ("unlabeled" at the root).
pub fn collect_inputs(input_dir: &Path) -> Result<Vec<LabeledApk>, PipelineError> {
    if !input_dir.is_dir() {
        return Err(PipelineError::NoInputs(format!(
            "{} is not a directory",
            input_dir.display()
        )));
    }
    let csv_labels = read_labels_csv(input_dir)?;

    let mut found = Vec::new();
    for entry in walkdir::WalkDir::new(input_dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
    {
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let is_apk = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("apk"));
        if !is_apk {
            continue;
        }
        let rel = path.strip_prefix(input_dir).unwrap_or(path);
        let rel_unix = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let base = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let label = if let Some(labels) = &csv_labels {
            match labels
                .get(rel_unix.as_str())
                .or_else(|| labels.get(base.as_str()))
            {
                Some(l) => l.clone(),
                None => continue, // unlabeled files are not inputs under CSV labeling
            }
        } else {
            rel.parent()
                .and_then(|p| p.file_name())
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        };
        let label = if label.is_empty() {
            "unlabeled".to_string()
        } else {
            label
        };
        found.push(LabeledApk {
            path: path.to_path_buf(),
            rel: rel_unix,
            label,
        });
    }
    found.sort_by(|a, b| a.rel.cmp(&b.rel));
    if found.is_empty() {
        return Err(PipelineError::NoInputs(format!(
            "no labeled .apk files under {}",
            input_dir.display()
        )));
    }
    Ok(found)
}

type LabelMap = std::collections::BTreeMap<String, String>;

fn read_labels_csv(input_dir: &Path) -> Result<Option<LabelMap>, PipelineError> {
    let path = input_dir.join("labels.csv");
    if !path.is_file() {
        return Ok(None);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(&path)
        .map_err(|e| PipelineError::BadConfig(format!("labels.csv: {e}")))?;
    let mut map = LabelMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| PipelineError::BadConfig(format!("labels.csv: {e}")))?;
        if record.len() < 2 {
            continue;
        }
        let (file, label) = (record[0].trim(), record[1].trim());
        if file == "filename" && label == "label" {
            continue; // header row
        }
        if !file.is_empty() && !label.is_empty() {
            map.insert(file.to_string(), label.to_string());
        }
    }
    Ok(Some(map))
}

fn process_one(apk: &LabeledApk, cfg: &PipelineConfig) -> (DatasetRecord, Option<Vec<u8>>) {
    let mut record = DatasetRecord {
        apk_path: apk.rel.clone(),
        apk_sha256: String::new(),
        label: apk.label.clone(),
        output_png: String::new(),
        status: RecordStatus::Ok,
        warnings: Vec::new(),
        channel_stats: None,
    };
    let bytes = match std::fs::read(&apk.path) {
        Ok(b) => b,
        Err(e) => {
            record.status = RecordStatus::Failed(format!("Io: {e}"));
            return (record, None);
        }
    };
    record.apk_sha256 = sha256_hex(&bytes);
    match fuse_apk_bytes(&bytes, cfg) {
        Ok(fused) => {
            record.warnings = fused.warnings.clone();
            record.channel_stats = Some([
                ChannelStats::of(&fused.planes[0]),
                ChannelStats::of(&fused.planes[1]),
                ChannelStats::of(&fused.planes[2]),
            ]);
            match encode_png(&fused.image) {
                Ok(png) => (record, Some(png)),
                Err(e) => {
                    record.status = RecordStatus::Failed(e.to_string());
                    record.channel_stats = None;
                    (record, None)
                }
            }
        }
        Err(reason) => {
            record.status = RecordStatus::Failed(reason);
            (record, None)
        }
    }
}

/// Run the batch pipeline and write `<sha256>_<label>.png` per Ok record
/// plus `manifest.jsonl` (records sorted by `apk_path`) into `output_dir`.
pub fn run_pipeline(
    input_dir: &Path,
    output_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<Vec<DatasetRecord>, PipelineError> {
    let inputs = collect_inputs(input_dir)?;
    std::fs::create_dir_all(output_dir)
        .map_err(|e| PipelineError::UnwritableOutput(format!("{}: {e}", output_dir.display())))?;

    let workers = cfg.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::BadConfig(e.to_string()))?;
    // par_iter + collect preserves input order, so worker count never
    // changes the merged result.
    let mut results: Vec<(DatasetRecord, Option<Vec<u8>>)> =
        pool.install(|| inputs.par_iter().map(|apk| process_one(apk, cfg)).collect());

    for (record, png) in &mut results {
        if let Some(png) = png {
            let name = format!("{}_{}.png", record.apk_sha256, sanitize(&record.label));
            let path = output_dir.join(&name);
            std::fs::write(&path, png).map_err(|e| {
                PipelineError::UnwritableOutput(format!("{}: {e}", path.display()))
            })?;
            // Stored relative to the manifest so the output tree relocates.
            record.output_png = name;
        }
    }

    let mut records: Vec<DatasetRecord> = results.into_iter().map(|(r, _)| r).collect();
    records.sort_by(|a, b| a.apk_path.cmp(&b.apk_path));

    let manifest_path = output_dir.join("manifest.jsonl");
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    std::fs::write(&manifest_path, text).map_err(|e| {
        PipelineError::UnwritableOutput(format!("{}: {e}", manifest_path.display()))
    })?;
    Ok(records)
}

/// Keep labels filesystem-safe in output names.
fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// Resolve a record's PNG against the directory its manifest lives in.
pub fn png_path(manifest_path: &Path, record: &DatasetRecord) -> PathBuf {
    match manifest_path.parent() {
        Some(dir) => dir.join(&record.output_png),
        None => PathBuf::from(&record.output_png),
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<DatasetRecord>, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::NoInputs(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(line).map_err(|e| {
            PipelineError::BadConfig(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// One line of the evaluation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Render evaluation rows as an aligned text table plus CSV
/// (`model,accuracy,precision,recall,f1`, four decimals, input order).
pub fn make_report(rows: &[ReportRow]) -> (String, String) {
    let mut csv = String::from("model,accuracy,precision,recall,f1\n");
    let mut text = format!(
        "{:<12} {:>9} {:>10} {:>8} {:>8}\n",
        "model", "accuracy", "precision", "recall", "f1"
    );
    for r in rows {
        csv.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4}\n",
            r.model, r.accuracy, r.precision, r.recall, r.f1
        ));
        text.push_str(&format!(
            "{:<12} {:>9.4} {:>10.4} {:>8.4} {:>8.4}\n",
            r.model, r.accuracy, r.precision, r.recall, r.f1
        ));
    }
    (text, csv)
}
