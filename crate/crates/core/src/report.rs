//! Run directory records and report tables.
//!
//! A run directory holds
//!
//! * `manifest.json`: dataset, seeds, split ids, prompt fingerprints, model
//!   ids and per-run coverage. `generated_at` is its only timestamp.
//! * `predictions/<regime>__<model>.jsonl`: one [`PredictionRecord`] per
//!   evaluated item, carrying the truth so reports need no dataset.
//! * `baselines.json`: the [`BaselineResult`] list, when baselines ran.
//!
//! [`emit_report`] derives from those
//!
//! * `metrics.tsv`: one row per (regime, model) run and one per baseline
//!   predictor. Columns: `dataset source regime model predictor n excluded
//!   exclusion_rate coverage pearson r2_squared_pearson r2_agreement r2
//!   r2_heldout_mean r2_heldout_sd n_splits note`. `-` marks a column that
//!   does not apply to the row, `undefined` a metric that cannot be computed;
//!   `note` then gives the reason.
//! * `position_curve.tsv`: `dataset regime model position n r2` for RT runs.
//! * `summary.jsonl`: the metrics rows as JSON, `null` for undefined.
//! * `reference.tsv`: published values for side-by-side comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineResult;
use crate::config::{EvaluationConfig, Regime, SeedConfig, SplitConfig};
use crate::corpus::DatasetKind;
use crate::error::{Error, Result};
use crate::gateway::FineTuneJob;
use crate::metrics::{position_curve, summarize, PairedSeries, R2Mode};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BASELINES_FILE: &str = "baselines.json";
pub const PREDICTIONS_DIR: &str = "predictions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub item_id: String,
    /// Parse outcome: `ok`, `clamped`, `no_number`, `recovered`,
    /// `unparseable` or `request_failed`.
    pub status: String,
    pub raw: Option<String>,
    pub error: Option<String>,
    /// One value per scored unit (the item, or each token of a sentence).
    pub predicted: Vec<Option<f64>>,
    pub truth: Vec<f64>,
    /// Token positions for RT items; empty for scalar items.
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub regime: Regime,
    pub model: String,
    pub base_model: String,
    pub prompt_fingerprint: String,
    pub few_shot_example_ids: Vec<String>,
    pub predictions_file: String,
    pub items: usize,
    pub status_counts: BTreeMap<String, usize>,
    /// Fraction of scored units with a parsed (and aligned) prediction.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub kind: DatasetKind,
    pub path: String,
    pub items: usize,
    pub tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub generated_at: String,
    pub tool_version: String,
    pub dataset: DatasetInfo,
    pub seeds: SeedConfig,
    pub splits: SplitConfig,
    pub few_shot_k: usize,
    pub train_ids: Vec<String>,
    pub eval_ids: Vec<String>,
    pub fine_tune: Option<FineTuneJob>,
    pub runs: Vec<RunRecord>,
    pub baselines_file: Option<String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }

    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.generated_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    /// Inserts or replaces the run with the same regime and model.
    pub fn upsert_run(&mut self, run: RunRecord) {
        self.runs.retain(|r| !(r.regime == run.regime && r.model == run.model));
        self.runs.push(run);
        self.runs
            .sort_by(|a, b| (a.regime, &a.model).cmp(&(b.regime, &b.model)));
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        path: path.into(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("in-memory JSON encoding cannot fail");
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn predictions_file_name(regime: Regime, model: &str) -> String {
    let safe: String = model
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{PREDICTIONS_DIR}/{regime}__{safe}.jsonl")
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("in-memory JSON encoding cannot fail");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.into(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

/// The scored pairs of a run; clamped ratings count as excluded when
/// `include_clamped` is off.
pub fn prediction_series(records: &[PredictionRecord], include_clamped: bool) -> PairedSeries {
    PairedSeries::from_optional(records.iter().flat_map(|r| {
        let drop = !include_clamped && r.status == "clamped";
        r.predicted.iter().zip(&r.truth).enumerate().map(move |(i, (p, t))| {
            let id = match r.positions.get(i) {
                Some(pos) => format!("{}:{pos}", r.item_id),
                None => r.item_id.clone(),
            };
            (id, if drop { None } else { *p }, *t)
        })
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub dataset: DatasetKind,
    pub source: String,
    pub regime: Option<Regime>,
    pub model: Option<String>,
    pub predictor: Option<String>,
    pub n: usize,
    pub excluded: usize,
    pub exclusion_rate: f64,
    pub coverage: Option<f64>,
    pub pearson: Option<f64>,
    pub r2_squared_pearson: Option<f64>,
    pub r2_agreement: Option<f64>,
    /// Headline value: the configured R² mode for model runs, the mean
    /// held-out R² for baselines.
    pub r2: Option<f64>,
    pub r2_heldout_mean: Option<f64>,
    pub r2_heldout_sd: Option<f64>,
    pub n_splits: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub dataset: DatasetKind,
    pub regime: Regime,
    pub model: String,
    pub position: usize,
    pub n: usize,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub metrics: PathBuf,
    pub position_curve: PathBuf,
    pub summary: PathBuf,
    pub reference: PathBuf,
    pub rows: Vec<MetricsRow>,
}

pub fn run_metrics_row(
    dataset: DatasetKind,
    run: &RunRecord,
    records: &[PredictionRecord],
    eval: &EvaluationConfig,
) -> MetricsRow {
    let s = prediction_series(records, eval.include_clamped);
    let m = summarize(&s);
    let r2 = match eval.r2_mode {
        R2Mode::SquaredPearson => m.r2_squared_pearson,
        R2Mode::Agreement => m.r2_agreement,
    };
    MetricsRow {
        dataset,
        source: "model".into(),
        regime: Some(run.regime),
        model: Some(run.model.clone()),
        predictor: None,
        n: m.n,
        excluded: m.excluded,
        exclusion_rate: m.exclusion_rate,
        coverage: Some(run.coverage),
        pearson: m.pearson,
        r2_squared_pearson: m.r2_squared_pearson,
        r2_agreement: m.r2_agreement,
        r2,
        r2_heldout_mean: None,
        r2_heldout_sd: None,
        n_splits: None,
        note: m.undefined_reason,
    }
}

pub fn baseline_metrics_row(dataset: DatasetKind, b: &BaselineResult) -> MetricsRow {
    let ev = b.evaluation.as_ref();
    let total = b.rows + b.dropped;
    MetricsRow {
        dataset,
        source: "baseline".into(),
        regime: None,
        model: None,
        predictor: Some(b.predictor.clone()),
        n: b.rows,
        excluded: b.dropped,
        exclusion_rate: if total == 0 {
            0.0
        } else {
            b.dropped as f64 / total as f64
        },
        coverage: None,
        pearson: None,
        r2_squared_pearson: None,
        r2_agreement: None,
        r2: ev.map(|e| e.mean_r2),
        r2_heldout_mean: ev.map(|e| e.mean_r2),
        r2_heldout_sd: ev.map(|e| e.sd_r2),
        n_splits: ev.map(|e| e.n_splits),
        note: b.error.clone(),
    }
}

fn curve_rows(
    dataset: DatasetKind,
    run: &RunRecord,
    records: &[PredictionRecord],
    eval: &EvaluationConfig,
) -> Vec<CurveRow> {
    let triples = records.iter().flat_map(|r| {
        let drop = !eval.include_clamped && r.status == "clamped";
        r.positions
            .iter()
            .zip(r.predicted.iter().zip(&r.truth))
            .map(move |(pos, (p, t))| (*pos, if drop { None } else { *p }, *t))
    });
    position_curve(triples, eval.min_position_n, eval.r2_mode)
        .entries
        .into_iter()
        .map(|e| CurveRow {
            dataset,
            regime: run.regime,
            model: run.model.clone(),
            position: e.position,
            n: e.n,
            r2: e.r2,
        })
        .collect()
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "undefined".into(),
    }
}

fn metrics_tsv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(
        "dataset\tsource\tregime\tmodel\tpredictor\tn\texcluded\texclusion_rate\tcoverage\tpearson\t\
         r2_squared_pearson\tr2_agreement\tr2\tr2_heldout_mean\tr2_heldout_sd\tn_splits\tnote\n",
    );
    for r in rows {
        let model_row = r.source == "model";
        let only = |apply: bool, v: Option<f64>| if apply { num(v) } else { "-".into() };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.dataset,
            r.source,
            r.regime.map_or("-".to_string(), |g| g.to_string()),
            r.model.as_deref().unwrap_or("-"),
            r.predictor.as_deref().unwrap_or("-"),
            r.n,
            r.excluded,
            r.exclusion_rate,
            only(model_row, r.coverage),
            only(model_row, r.pearson),
            only(model_row, r.r2_squared_pearson),
            only(model_row, r.r2_agreement),
            num(r.r2),
            only(!model_row, r.r2_heldout_mean),
            only(!model_row, r.r2_heldout_sd),
            if model_row {
                "-".to_string()
            } else {
                r.n_splits.map_or("undefined".into(), |n| n.to_string())
            },
            r.note
                .as_deref()
                .map_or("-".to_string(), |n| n.replace(['\t', '\n'], " ")),
        );
    }
    out
}

fn curve_tsv(rows: &[CurveRow]) -> String {
    let mut out = String::from("dataset\tregime\tmodel\tposition\tn\tr2\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.dataset,
            r.regime,
            r.model,
            r.position,
            r.n,
            num(r.r2)
        );
    }
    out
}

/// Published values (R², or correlation where so reported) for comparison.
pub const REFERENCE_ROWS: &[(&str, &str, &str, &str)] = &[
    ("word_mem", "model", "fine_tune", "0.53-0.59"),
    ("word_mem", "baseline", "combined_scalar", "0.28"),
    ("sent_mem", "model", "fine_tune", "0.45-0.49"),
    ("sent_mem", "baseline", "combined_scalar", "0.32"),
    ("rt_spr", "model", "zero_shot", "0.02-0.05"),
    ("rt_spr", "model", "fine_tune", "0.15-0.21"),
    ("rt_spr", "baseline", "combined_scalar", "0.08"),
    ("rt_et", "model", "zero_shot", "0.27"),
    ("rt_et", "model", "few_shot", "0.35"),
    ("rt_et", "model", "fine_tune", "0.08-0.57"),
];

fn reference_tsv() -> String {
    let mut out = String::from("dataset\tsource\tregime_or_predictor\treported\n");
    for (d, s, r, v) in REFERENCE_ROWS {
        let _ = writeln!(out, "{d}\t{s}\t{r}\t{v}");
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes the report tables for a manifest, its predictions (keyed by
/// predictions file) and baseline results into `out_dir`.
pub fn emit_report(
    manifest: &RunManifest,
    predictions: &BTreeMap<String, Vec<PredictionRecord>>,
    baselines: &[BaselineResult],
    eval: &EvaluationConfig,
    out_dir: &Path,
) -> Result<ReportFiles> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let kind = manifest.dataset.kind;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for run in &manifest.runs {
        let records = predictions
            .get(&run.predictions_file)
            .map(Vec::as_slice)
            .unwrap_or_default();
        rows.push(run_metrics_row(kind, run, records, eval));
        if kind.is_rt() {
            curves.extend(curve_rows(kind, run, records, eval));
        }
    }
    rows.extend(baselines.iter().map(|b| baseline_metrics_row(kind, b)));

    let files = ReportFiles {
        metrics: out_dir.join("metrics.tsv"),
        position_curve: out_dir.join("position_curve.tsv"),
        summary: out_dir.join("summary.jsonl"),
        reference: out_dir.join("reference.tsv"),
        rows,
    };
    write_text(&files.metrics, &metrics_tsv(&files.rows))?;
    write_text(&files.position_curve, &curve_tsv(&curves))?;
    let mut summary = Vec::new();
    for r in &files.rows {
        serde_json::to_writer(&mut summary, r).expect("in-memory JSON encoding cannot fail");
        summary.write_all(b"\n").expect("writing to a Vec cannot fail");
    }
    fs::write(&files.summary, summary).map_err(|e| Error::io(format!("writing {}", files.summary.display()), e))?;
    write_text(&files.reference, &reference_tsv())?;
    Ok(files)
}

/// Rebuilds the report of an existing run directory from its records alone.
pub fn regenerate_report(run_dir: &Path, eval: &EvaluationConfig) -> Result<ReportFiles> {
    let manifest = RunManifest::load(run_dir)?;
    let mut predictions = BTreeMap::new();
    for run in &manifest.runs {
        predictions.insert(
            run.predictions_file.clone(),
            read_predictions(&run_dir.join(&run.predictions_file))?,
        );
    }
    let baselines: Vec<BaselineResult> = match &manifest.baselines_file {
        Some(f) => read_json(&run_dir.join(f))?,
        None => Vec::new(),
    };
    emit_report(&manifest, &predictions, &baselines, eval, run_dir)
}
