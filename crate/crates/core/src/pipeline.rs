//! End-to-end experiment: ingest, optional fine-tune on the train side,
//! elicitation on the eval side, baselines and report.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::align::{project_predictions, ProjectOptions};
use crate::baselines::features::{FrequencyTable, SurprisalTable};
use crate::baselines::{run_baselines, BaselineInputs, BaselineOptions, BaselineResult, FitOptions, RtSources};
use crate::config::{ExperimentConfig, Regime};
use crate::corpus::{
    attach_embeddings, describe, load_embeddings, load_norms, load_rt_corpus, split_dataset, write_dataset,
    CanonicalFiles, Dataset, Item, Items,
};
use crate::error::{Error, Result};
use crate::gateway::{
    Backend, ChatRequest, ChatResponse, FineTuneJob, Gateway, GatewayError, HttpBackend, JobStatus, MockBackend,
    MockPersonality, PollOptions, ResponseCache, RetryPolicy,
};
use crate::parse::{parse_duration_map, parse_scalar_rating, MapStatus, ScalarStatus};
use crate::prompting::{
    format_target, make_finetune_example, render_few_shot, render_zero_shot, select_few_shot_examples,
    serialize_finetune_file, Message, PromptKind, PromptTemplate, RenderedPrompt,
};
use crate::report::{
    predictions_file_name, read_json, regenerate_report, write_json, write_predictions, DatasetInfo, PredictionRecord,
    ReportFiles, RunManifest, RunRecord, BASELINES_FILE,
};

pub const FINETUNE_JOB_FILE: &str = "finetune_job.json";
pub const FINETUNE_TRAIN_FILE: &str = "finetune_train.jsonl";
pub const CACHE_DIR: &str = "cache";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    FineTune,
    Elicit,
    Baselines,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::FineTune => "finetune",
            Stage::Elicit => "elicit",
            Stage::Baselines => "baselines",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl PipelineError {
    /// 2 for configuration problems, 3 for backend failures, 4 for data.
    pub fn exit_code(&self) -> i32 {
        match self.source {
            Error::Config(_) => 2,
            Error::Gateway(_) => 3,
            _ => 4,
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

/// Command-line overrides of the config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub regime: Option<Regime>,
    pub mock: Option<MockPersonality>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(r) = self.regime {
            cfg.regime = r;
        }
        if let Some(m) = self.mock {
            cfg.backend.mock = Some(m);
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let d = &cfg.dataset;
    if d.kind.is_rt() {
        return load_rt_corpus(&d.path, d.kind);
    }
    let mut dataset = load_norms(&d.path, d.kind)?;
    if let Some(p) = &d.embedding_path {
        let missing = attach_embeddings(&mut dataset, &load_embeddings(p)?)?;
        if missing > 0 {
            log::warn!("{missing} records have no embedding");
        }
    }
    Ok(dataset)
}

/// Validates the dataset and writes it in canonical form under
/// `<output_dir>/data`.
pub fn ingest(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(Dataset, CanonicalFiles)> {
    let dataset = load_dataset(cfg)?;
    let dir = cfg.output_dir.join("data");
    create_dir(&dir)?;
    let files = write_dataset(&dataset, &dir)?;
    describe(&dataset, &mut *out).map_err(|e| Error::io("writing summary", e))?;
    writeln!(out, "canonical table: {}", files.table.display()).map_err(|e| Error::io("writing summary", e))?;
    Ok((dataset, files))
}

/// The seeded (train, eval) partition shared by every regime.
pub fn split(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<(Dataset, Dataset)> {
    let (train, eval) = split_dataset(dataset, cfg.splits.finetune_train_fraction, cfg.seeds.split_seed)?;
    let train_ids: HashSet<String> = train.ids().into_iter().collect();
    if let Some(id) = eval.ids().into_iter().find(|id| train_ids.contains(id)) {
        return Err(Error::Data(format!("item `{id}` is on both sides of the split")));
    }
    Ok((train, eval))
}

/// Ground-truth answers keyed by rendered prompt, for the mock oracle.
pub fn oracle_answers(dataset: &Dataset) -> Result<Vec<(String, String)>> {
    let kind = PromptKind::from(dataset.kind);
    dataset
        .items()
        .into_iter()
        .map(|item| {
            let prompt = render_zero_shot(kind, item)?;
            Ok((prompt.final_user_content().to_string(), format_target(kind, item)?))
        })
        .collect()
}

pub fn build_gateway(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Gateway> {
    let (backend, retry): (Arc<dyn Backend>, RetryPolicy) = match cfg.backend.mock {
        Some(p) => (
            Arc::new(MockBackend::new(p).with_answers(oracle_answers(dataset)?)),
            RetryPolicy::immediate(cfg.backend.max_retries),
        ),
        None => {
            let http = HttpBackend::from_env(cfg.backend.base_url.clone(), &cfg.backend.auth_env_var).map_err(|e| {
                Error::Gateway(match e {
                    crate::gateway::BackendError::Auth(m) => GatewayError::Auth(m),
                    other => GatewayError::Endpoint {
                        status: None,
                        message: other.to_string(),
                    },
                })
            })?;
            (
                Arc::new(http),
                RetryPolicy {
                    max_retries: cfg.backend.max_retries,
                    ..RetryPolicy::default()
                },
            )
        }
    };
    let cache_dir = match cfg.backend.mock {
        Some(p) => cfg.output_dir.join(CACHE_DIR).join(format!("mock-{p}")),
        None => cfg.output_dir.join(CACHE_DIR),
    };
    let cache = ResponseCache::open(cache_dir).map_err(|e| Error::io("opening response cache", e))?;
    Ok(Gateway::new(backend).with_cache(cache).with_retry(retry))
}

fn dataset_info(cfg: &ExperimentConfig, dataset: &Dataset) -> DatasetInfo {
    DatasetInfo {
        kind: dataset.kind,
        path: cfg.dataset.path.display().to_string(),
        items: dataset.len(),
        tokens: dataset.token_count(),
    }
}

/// The run directory's manifest; reused only when it describes the same
/// dataset and split, otherwise started afresh.
pub fn open_manifest(cfg: &ExperimentConfig, dataset: &Dataset, train: &Dataset, eval: &Dataset) -> RunManifest {
    let mut train_ids = train.ids();
    let mut eval_ids = eval.ids();
    train_ids.sort();
    eval_ids.sort();
    let info = dataset_info(cfg, dataset);
    if let Ok(m) = RunManifest::load(&cfg.output_dir) {
        if m.dataset == info && m.train_ids == train_ids && m.eval_ids == eval_ids && m.seeds == cfg.seeds {
            return m;
        }
        log::warn!("existing manifest describes a different dataset or split; starting a new one");
    }
    RunManifest {
        generated_at: String::new(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        dataset: info,
        seeds: cfg.seeds,
        splits: cfg.splits,
        few_shot_k: cfg.few_shot.k,
        train_ids,
        eval_ids,
        fine_tune: None,
        runs: Vec::new(),
        baselines_file: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FineTuneRecord {
    training_sha256: String,
    job: FineTuneJob,
}

/// Fine-tunes on every train-side item. A succeeded job recorded for the
/// same training file is reused instead of starting a new one.
pub fn finetune(cfg: &ExperimentConfig, gateway: &Gateway, train: &Dataset) -> Result<FineTuneJob> {
    let kind = PromptKind::from(train.kind);
    let examples = train
        .items()
        .into_iter()
        .map(|item| make_finetune_example(kind, item))
        .collect::<Result<Vec<_>>>()?;
    let file = serialize_finetune_file(&examples);
    if let Some(w) = file.warning {
        return Err(Error::Data(w));
    }
    create_dir(&cfg.output_dir)?;
    let train_path = cfg.output_dir.join(FINETUNE_TRAIN_FILE);
    std::fs::write(&train_path, &file.bytes).map_err(|e| Error::io(format!("writing {}", train_path.display()), e))?;
    let sha = crate::sha256_hex(&file.bytes);
    let record_path = cfg.output_dir.join(FINETUNE_JOB_FILE);
    if let Ok(prev) = read_json::<FineTuneRecord>(&record_path) {
        if prev.training_sha256 == sha
            && prev.job.status == JobStatus::Succeeded
            && prev.job.base_model == cfg.backend.model
        {
            log::info!(
                "reusing fine-tuned model {}",
                prev.job.result_model.as_deref().unwrap_or("?")
            );
            return Ok(prev.job);
        }
    }
    log::info!("fine-tuning {} on {} examples", cfg.backend.model, file.records);
    let poll = PollOptions {
        interval: Duration::from_secs_f64(cfg.fine_tune.poll_interval_secs),
        timeout: Duration::from_secs_f64(cfg.fine_tune.timeout_secs),
    };
    let job = gateway.run_finetune(&file.bytes, &cfg.backend.model, &cfg.fine_tune.hyperparams(), poll)?;
    write_json(
        &record_path,
        &FineTuneRecord {
            training_sha256: sha,
            job: job.clone(),
        },
    )?;
    if job.status != JobStatus::Succeeded || job.result_model.is_none() {
        return Err(Error::Gateway(GatewayError::Endpoint {
            status: None,
            message: format!(
                "fine-tuning job {} failed: {}",
                job.job_id,
                job.error.as_deref().unwrap_or("no model produced")
            ),
        }));
    }
    Ok(job)
}

/// The model recorded by an earlier successful fine-tune in this run
/// directory.
pub fn recorded_finetune(cfg: &ExperimentConfig) -> Result<FineTuneJob> {
    let path = cfg.output_dir.join(FINETUNE_JOB_FILE);
    let rec: FineTuneRecord = read_json(&path).map_err(|_| {
        Error::Config(format!(
            "regime: fine_tune needs a completed `finetune` run in {}",
            cfg.output_dir.display()
        ))
    })?;
    if rec.job.status != JobStatus::Succeeded || rec.job.result_model.is_none() {
        return Err(Error::Config(format!(
            "regime: recorded fine-tuning job {} did not succeed",
            rec.job.job_id
        )));
    }
    Ok(rec.job)
}

fn max_output_tokens(item: Item<'_>) -> u32 {
    match item {
        Item::Norm(_) => 16,
        Item::Sentence(s) => 8 * s.tokens.len() as u32 + 16,
    }
}

const SCALAR_CLARIFICATION: &str = "Please answer with a single number between 0 and 1.";
const MAP_CLARIFICATION: &str =
    "Please answer only with the dictionary mapping each word to its reading time in milliseconds.";

fn score(item: Item<'_>, text: &str, opts: ProjectOptions) -> (String, Vec<Option<f64>>) {
    match item {
        Item::Norm(_) => {
            let p = parse_scalar_rating(text);
            let status = match p.status {
                ScalarStatus::Ok => "ok",
                ScalarStatus::Clamped => "clamped",
                ScalarStatus::NoNumber => "no_number",
            };
            (status.into(), vec![p.value])
        }
        Item::Sentence(s) => {
            let m = parse_duration_map(text);
            let status = match m.status {
                MapStatus::Ok => "ok",
                MapStatus::Recovered => "recovered",
                MapStatus::Unparseable => "unparseable",
            };
            (status.into(), project_predictions(s, &m, opts).values)
        }
    }
}

fn truth_of(item: Item<'_>) -> (Vec<f64>, Vec<usize>) {
    match item {
        Item::Norm(r) => (vec![r.score], Vec::new()),
        Item::Sentence(s) => (
            s.tokens.iter().map(|t| t.rt_ms).collect(),
            s.tokens.iter().map(|t| t.position).collect(),
        ),
    }
}

fn parse_failed(status: &str) -> bool {
    matches!(status, "no_number" | "unparseable")
}

/// Prompts the eval side under `regime` with `model`, parses (and for RT
/// aligns) every answer, writes the predictions file and returns the run
/// record.
pub fn elicit(
    cfg: &ExperimentConfig,
    regime: Regime,
    gateway: &Gateway,
    train: &Dataset,
    eval: &Dataset,
    model: &str,
) -> Result<(RunRecord, Vec<PredictionRecord>)> {
    let kind = PromptKind::from(eval.kind);
    let examples = match regime {
        Regime::FewShot => select_few_shot_examples(train, cfg.few_shot.k, cfg.seeds.fewshot_seed)?,
        _ => Vec::new(),
    };
    let train_ids: HashSet<&str> = train.items().into_iter().map(|i| i.id()).collect();
    let items = eval.items();
    if let Some(i) = items.iter().find(|i| train_ids.contains(i.id())) {
        return Err(Error::Data(format!("eval item `{}` is also a train item", i.id())));
    }
    let prompts: Vec<RenderedPrompt> = items
        .iter()
        .map(|item| match regime {
            Regime::FewShot => render_few_shot(kind, *item, &examples),
            _ => render_zero_shot(kind, *item),
        })
        .collect::<Result<_>>()?;
    let reqs: Vec<ChatRequest> = prompts
        .iter()
        .zip(&items)
        .map(|(p, item)| ChatRequest::new(model, p.messages.clone(), max_output_tokens(*item)))
        .collect();
    log::info!("eliciting {} {regime} predictions from {model}", reqs.len());
    let responses = gateway.complete_batch(&reqs, cfg.backend.max_in_flight);
    check_batch(&responses)?;

    let opts = ProjectOptions {
        keep_substitutions: cfg.evaluation.keep_substitutions,
    };
    let mut records: Vec<PredictionRecord> = items
        .iter()
        .zip(&responses)
        .map(|(item, resp)| {
            let (truth, positions) = truth_of(*item);
            match resp {
                Ok(r) => {
                    let (status, predicted) = score(*item, &r.text, opts);
                    PredictionRecord {
                        item_id: item.id().to_string(),
                        status,
                        raw: Some(r.text.clone()),
                        error: None,
                        predicted,
                        truth,
                        positions,
                    }
                }
                Err(e) => PredictionRecord {
                    item_id: item.id().to_string(),
                    status: "request_failed".into(),
                    raw: None,
                    error: Some(e.to_string()),
                    predicted: vec![None; truth.len()],
                    truth,
                    positions,
                },
            }
        })
        .collect();

    if cfg.evaluation.retry_failed_parse {
        let failed: Vec<usize> = (0..records.len())
            .filter(|&i| parse_failed(&records[i].status))
            .collect();
        if !failed.is_empty() {
            log::info!("retrying {} unparsed answers with a clarification turn", failed.len());
            let clarify = if kind.is_scalar() {
                SCALAR_CLARIFICATION
            } else {
                MAP_CLARIFICATION
            };
            let retry_reqs: Vec<ChatRequest> = failed
                .iter()
                .map(|&i| {
                    let mut req = reqs[i].clone();
                    req.messages
                        .push(Message::assistant(records[i].raw.clone().unwrap_or_default()));
                    req.messages.push(Message::user(clarify));
                    req
                })
                .collect();
            let retried = gateway.complete_batch(&retry_reqs, cfg.backend.max_in_flight);
            for (&i, resp) in failed.iter().zip(retried) {
                if let Ok(r) = resp {
                    let (status, predicted) = score(items[i], &r.text, opts);
                    if !parse_failed(&status) {
                        records[i].status = format!("{status}_after_retry");
                        records[i].raw = Some(r.text);
                        records[i].predicted = predicted;
                    }
                }
            }
        }
    }

    let mut status_counts = BTreeMap::new();
    let (mut units, mut present) = (0usize, 0usize);
    for r in &records {
        *status_counts.entry(r.status.clone()).or_insert(0) += 1;
        units += r.predicted.len();
        present += r.predicted.iter().filter(|v| v.is_some()).count();
    }
    let file = predictions_file_name(regime, model);
    write_predictions(&cfg.output_dir.join(&file), &records)?;
    let run = RunRecord {
        regime,
        model: model.to_string(),
        base_model: cfg.backend.model.clone(),
        prompt_fingerprint: PromptTemplate::for_kind(kind).fingerprint(),
        few_shot_example_ids: examples.iter().map(|e| e.id().to_string()).collect(),
        predictions_file: file,
        items: records.len(),
        status_counts,
        coverage: if units == 0 { 0.0 } else { present as f64 / units as f64 },
    };
    Ok((run, records))
}

/// Authentication failures, or a batch where nothing succeeded, fail the
/// stage; isolated failures are kept as per-item records.
fn check_batch(responses: &[std::result::Result<ChatResponse, GatewayError>]) -> Result<()> {
    if let Some(Err(e)) = responses.iter().find(|r| matches!(r, Err(GatewayError::Auth(_)))) {
        return Err(Error::Gateway(GatewayError::Auth(e.to_string())));
    }
    if !responses.is_empty() && responses.iter().all(|r| r.is_err()) {
        if let Some(Err(e)) = responses.iter().next() {
            return Err(Error::Gateway(match e {
                GatewayError::RetriesExhausted { attempts, last } => GatewayError::RetriesExhausted {
                    attempts: *attempts,
                    last: last.clone(),
                },
                other => GatewayError::Endpoint {
                    status: None,
                    message: other.to_string(),
                },
            }));
        }
    }
    let failed = responses.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        log::warn!(
            "{failed} of {} requests failed; they are reported as exclusions",
            responses.len()
        );
    }
    Ok(())
}

/// Whether the config supplies any predictor beyond the dataset's text.
pub fn has_baseline_inputs(cfg: &ExperimentConfig, dataset: &Dataset) -> bool {
    match &dataset.items {
        Items::Norms(r) => r.iter().any(|x| !x.features.is_empty() || x.embedding.is_some()),
        Items::Rt(_) => {
            cfg.dataset.frequency_path.is_some()
                || cfg.dataset.surprisal_path.is_some()
                || cfg.dataset.embedding_path.is_some()
        }
    }
}

pub fn baselines(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<BaselineResult>> {
    let frequency = match &cfg.dataset.frequency_path {
        Some(p) if dataset.kind.is_rt() => Some(FrequencyTable::load(p, cfg.evaluation.frequency_floor)?),
        _ => None,
    };
    let surprisal = match &cfg.dataset.surprisal_path {
        Some(p) => Some(SurprisalTable::load(p)?),
        None => None,
    };
    let rt_embeddings = match &cfg.dataset.embedding_path {
        Some(p) if dataset.kind.is_rt() => Some(load_embeddings(p)?),
        _ => None,
    };
    let inputs = BaselineInputs {
        rt: RtSources {
            frequency: frequency.as_ref(),
            surprisal: surprisal.as_ref(),
            frequency_transform: cfg.evaluation.frequency_transform,
        },
        rt_embeddings: rt_embeddings.as_ref(),
    };
    let opts = BaselineOptions {
        n_splits: cfg.splits.baseline_n,
        train_fraction: cfg.splits.baseline_train_fraction,
        seed: cfg.seeds.baseline_seed,
        fit: FitOptions {
            ridge: cfg.evaluation.ridge,
        },
    };
    log::info!("evaluating baselines over {} splits", opts.n_splits);
    let results = run_baselines(dataset, &inputs, &opts);
    for r in &results {
        if let Some(e) = &r.error {
            log::warn!("baseline {}: {e}", r.predictor);
        }
    }
    Ok(results)
}

fn save_baselines(cfg: &ExperimentConfig, manifest: &mut RunManifest, results: &[BaselineResult]) -> Result<()> {
    write_json(&cfg.output_dir.join(BASELINES_FILE), &results)?;
    manifest.baselines_file = Some(BASELINES_FILE.to_string());
    Ok(())
}

pub fn report(cfg: &ExperimentConfig) -> Result<ReportFiles> {
    regenerate_report(&cfg.output_dir, &cfg.evaluation)
}

/// Everything a subcommand needs after loading and splitting the data.
struct Prepared {
    dataset: Dataset,
    train: Dataset,
    eval: Dataset,
    manifest: RunManifest,
}

fn prepare(cfg: &ExperimentConfig) -> std::result::Result<Prepared, PipelineError> {
    create_dir(&cfg.output_dir).at(Stage::Ingest)?;
    let dataset = load_dataset(cfg).at(Stage::Ingest)?;
    let (train, eval) = split(cfg, &dataset).at(Stage::Ingest)?;
    let manifest = open_manifest(cfg, &dataset, &train, &eval);
    Ok(Prepared {
        dataset,
        train,
        eval,
        manifest,
    })
}

pub fn run_finetune_stage(cfg: &ExperimentConfig) -> std::result::Result<FineTuneJob, PipelineError> {
    let mut p = prepare(cfg)?;
    let gateway = build_gateway(cfg, &p.dataset).at(Stage::FineTune)?;
    let job = finetune(cfg, &gateway, &p.train).at(Stage::FineTune)?;
    p.manifest.fine_tune = Some(job.clone());
    p.manifest.save(&cfg.output_dir).at(Stage::FineTune)?;
    Ok(job)
}

pub fn run_elicit_stage(cfg: &ExperimentConfig) -> std::result::Result<RunRecord, PipelineError> {
    let mut p = prepare(cfg)?;
    let gateway = build_gateway(cfg, &p.dataset).at(Stage::Elicit)?;
    let model = match cfg.regime {
        Regime::FineTune => {
            let job = recorded_finetune(cfg).at(Stage::Elicit)?;
            let m = job.result_model.clone().expect("checked by recorded_finetune");
            p.manifest.fine_tune = Some(job);
            m
        }
        _ => cfg.backend.model.clone(),
    };
    let (run, _) = elicit(cfg, cfg.regime, &gateway, &p.train, &p.eval, &model).at(Stage::Elicit)?;
    p.manifest.upsert_run(run.clone());
    p.manifest.save(&cfg.output_dir).at(Stage::Elicit)?;
    Ok(run)
}

pub fn run_baselines_stage(cfg: &ExperimentConfig) -> std::result::Result<Vec<BaselineResult>, PipelineError> {
    let mut p = prepare(cfg)?;
    let results = baselines(cfg, &p.dataset).at(Stage::Baselines)?;
    save_baselines(cfg, &mut p.manifest, &results).at(Stage::Baselines)?;
    p.manifest.save(&cfg.output_dir).at(Stage::Baselines)?;
    Ok(results)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub run: RunRecord,
    pub report: ReportFiles,
    pub fine_tune: Option<FineTuneJob>,
}

/// The full pipeline for the configured regime. Every response is cached
/// under the output directory, so an interrupted run resumes where it
/// stopped.
pub fn run_experiment(cfg: &ExperimentConfig) -> std::result::Result<ExperimentOutcome, PipelineError> {
    let mut p = prepare(cfg)?;
    let gateway = build_gateway(cfg, &p.dataset).at(Stage::Elicit)?;
    let mut fine_tune = None;
    let model = if cfg.regime == Regime::FineTune {
        let job = finetune(cfg, &gateway, &p.train).at(Stage::FineTune)?;
        p.manifest.fine_tune = Some(job.clone());
        p.manifest.save(&cfg.output_dir).at(Stage::FineTune)?;
        let m = job.result_model.clone().expect("checked by finetune");
        fine_tune = Some(job);
        m
    } else {
        cfg.backend.model.clone()
    };
    let (run, _) = elicit(cfg, cfg.regime, &gateway, &p.train, &p.eval, &model).at(Stage::Elicit)?;
    p.manifest.upsert_run(run.clone());
    p.manifest.save(&cfg.output_dir).at(Stage::Elicit)?;
    if has_baseline_inputs(cfg, &p.dataset) {
        let results = baselines(cfg, &p.dataset).at(Stage::Baselines)?;
        save_baselines(cfg, &mut p.manifest, &results).at(Stage::Baselines)?;
        p.manifest.save(&cfg.output_dir).at(Stage::Baselines)?;
    }
    let report = report(cfg).at(Stage::Report)?;
    Ok(ExperimentOutcome { run, report, fine_tune })
}

pub fn run_ingest_stage(
    cfg: &ExperimentConfig,
    out: &mut dyn Write,
) -> std::result::Result<CanonicalFiles, PipelineError> {
    create_dir(&cfg.output_dir).at(Stage::Ingest)?;
    ingest(cfg, out).map(|(_, f)| f).at(Stage::Ingest)
}

pub fn run_report_stage(cfg: &ExperimentConfig) -> std::result::Result<ReportFiles, PipelineError> {
    report(cfg).at(Stage::Report)
}
