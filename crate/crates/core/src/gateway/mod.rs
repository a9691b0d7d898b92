//! Chat-completion traffic: cached, retried single and batched requests,
//! and the remote fine-tuning job lifecycle.

mod cache;
mod http;
mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::{parse_finetune_line, Message};

pub use cache::{CachedResponse, ResponseCache};
pub use http::HttpBackend;
pub use mock::{MockBackend, MockPersonality, TUNED_MODEL_PREFIX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

#[derive(Serialize)]
struct HashedFields<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_output_tokens: u32,
}

impl ChatRequest {
    /// A greedy-decoding request (temperature 0).
    pub fn new(model: impl Into<String>, messages: Vec<Message>, max_output_tokens: u32) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature: 0.0,
            max_output_tokens,
        }
    }

    /// SHA-256 over the compact JSON of model, messages, temperature and
    /// max_output_tokens, in that order.
    pub fn request_hash(&self) -> String {
        let fields = HashedFields {
            model: &self.model,
            messages: &self.messages,
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        };
        crate::sha256_hex(&serde_json::to_vec(&fields).expect("in-memory JSON encoding cannot fail"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    ContentFilter,
    Other,
}

impl FinishReason {
    pub fn from_wire(s: Option<&str>) -> Self {
        match s {
            Some("stop") => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            Some("content_filter") => FinishReason::ContentFilter,
            _ => FinishReason::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub request_hash: String,
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: f64,
    pub from_cache: bool,
    /// Transient failures retried before this response arrived.
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendReply {
    pub text: String,
    pub finish_reason: FinishReason,
}

/// Failure of one backend call, classified for the retry loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transient failure{}: {message}", status_suffix(*.status))]
    Transient { status: Option<u16>, message: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("endpoint error{}: {message}", status_suffix(*.status))]
    Fatal { status: Option<u16>, message: String },
}

fn status_suffix(status: Option<u16>) -> String {
    status.map(|s| format!(" (HTTP {s})")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("endpoint error{}: {message}", status_suffix(*.status))]
    Endpoint { status: Option<u16>, message: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("training file rejected: {0}")]
    UploadRejected(String),
    #[error("fine-tuning job {job_id} still not finished after {waited:?}")]
    PollTimeout { job_id: String, waited: Duration },
    #[error("cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Succeeded | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineTuneHyperparams {
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate_multiplier: f64,
}

impl Default for FineTuneHyperparams {
    fn default() -> Self {
        FineTuneHyperparams {
            epochs: 3,
            batch_size: 1,
            learning_rate_multiplier: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneJob {
    pub job_id: String,
    pub base_model: String,
    pub training_file_ref: String,
    pub hyperparams: FineTuneHyperparams,
    pub status: JobStatus,
    /// Present exactly when `status` is `Succeeded`.
    pub result_model: Option<String>,
    /// Provider message for failed jobs.
    pub error: Option<String>,
}

/// A chat-completion provider.
pub trait Backend: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<BackendReply, BackendError>;

    /// Uploads a fine-tuning file and returns the provider's file reference.
    fn upload_training_file(&self, bytes: &[u8]) -> Result<String, BackendError>;

    fn create_finetune_job(
        &self,
        training_file: &str,
        base_model: &str,
        hp: &FineTuneHyperparams,
    ) -> Result<FineTuneJob, BackendError>;

    fn finetune_job(&self, job_id: &str) -> Result<FineTuneJob, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `retry` (0-based): `base * 2^retry`, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.min(20));
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PollOptions {
    pub interval: Duration,
    pub timeout: Duration,
}

impl Default for PollOptions {
    fn default() -> Self {
        PollOptions {
            interval: Duration::from_secs(30),
            timeout: Duration::from_secs(24 * 3600),
        }
    }
}

pub struct Gateway {
    backend: Arc<dyn Backend>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    backend_calls: AtomicUsize,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Gateway {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            backend_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Backend calls issued so far, including retried attempts.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, BackendError>) -> Result<(T, u32), GatewayError> {
        let mut retries = 0;
        loop {
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            match call() {
                Ok(v) => return Ok((v, retries)),
                Err(BackendError::Transient { status, message }) => {
                    if retries >= self.retry.max_retries {
                        return Err(GatewayError::RetriesExhausted {
                            attempts: retries + 1,
                            last: format!("{}{message}", status.map(|s| format!("HTTP {s}: ")).unwrap_or_default()),
                        });
                    }
                    let delay = self.retry.delay(retries);
                    log::debug!("transient failure ({message}), retrying in {delay:?}");
                    thread::sleep(delay);
                    retries += 1;
                }
                Err(BackendError::Auth(m)) => return Err(GatewayError::Auth(m)),
                Err(BackendError::Fatal { status, message }) => return Err(GatewayError::Endpoint { status, message }),
            }
        }
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if req.temperature != 0.0 {
            return Err(GatewayError::InvalidRequest(format!(
                "experiment requests must use temperature 0, got {}",
                req.temperature
            )));
        }
        let hash = req.request_hash();
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&hash) {
                return Ok(ChatResponse {
                    request_hash: hash,
                    text: hit.text,
                    finish_reason: hit.finish_reason,
                    latency_ms: hit.latency_ms,
                    from_cache: true,
                    retries: 0,
                });
            }
        }
        let started = Instant::now();
        let (reply, retries) = self.with_retries(|| self.backend.chat(req))?;
        let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
        if let Some(cache) = &self.cache {
            cache
                .put(req, &reply, latency_ms)
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        Ok(ChatResponse {
            request_hash: hash,
            text: reply.text,
            finish_reason: reply.finish_reason,
            latency_ms,
            from_cache: false,
            retries,
        })
    }

    /// Completes every request with at most `max_in_flight` outstanding at
    /// once. Results are in request order; failures stay per-request.
    pub fn complete_batch(
        &self,
        reqs: &[ChatRequest],
        max_in_flight: usize,
    ) -> Vec<Result<ChatResponse, GatewayError>> {
        let workers = max_in_flight.max(1).min(reqs.len());
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<ChatResponse, GatewayError>>>> =
            Mutex::new((0..reqs.len()).map(|_| None).collect());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= reqs.len() {
                        break;
                    }
                    let result = self.complete(&reqs[i]);
                    slots.lock().expect("result slots poisoned")[i] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .expect("result slots poisoned")
            .into_iter()
            .map(|r| r.expect("every request index is claimed by a worker"))
            .collect()
    }

    /// Uploads `training`, creates a job with `hp` and polls until the job
    /// reaches a terminal status. A failed job is returned, not raised.
    pub fn run_finetune(
        &self,
        training: &[u8],
        base_model: &str,
        hp: &FineTuneHyperparams,
        poll: PollOptions,
    ) -> Result<FineTuneJob, GatewayError> {
        validate_training_bytes(training)?;
        let file = match self.with_retries(|| self.backend.upload_training_file(training)) {
            Ok((f, _)) => f,
            Err(GatewayError::Endpoint { message, .. }) => return Err(GatewayError::UploadRejected(message)),
            Err(e) => return Err(e),
        };
        let (mut job, _) = self.with_retries(|| self.backend.create_finetune_job(&file, base_model, hp))?;
        let started = Instant::now();
        while !job.status.is_terminal() {
            if started.elapsed() >= poll.timeout {
                return Err(GatewayError::PollTimeout {
                    job_id: job.job_id,
                    waited: started.elapsed(),
                });
            }
            thread::sleep(poll.interval);
            let id = job.job_id.clone();
            job = self.with_retries(|| self.backend.finetune_job(&id))?.0;
        }
        if job.status != JobStatus::Succeeded {
            job.result_model = None;
        }
        Ok(job)
    }
}

fn validate_training_bytes(training: &[u8]) -> Result<(), GatewayError> {
    if training.is_empty() {
        return Err(GatewayError::InvalidRequest("training file is empty".into()));
    }
    let text = std::str::from_utf8(training)
        .map_err(|e| GatewayError::InvalidRequest(format!("training file is not UTF-8: {e}")))?;
    for (i, line) in text.lines().enumerate() {
        parse_finetune_line(line)
            .map_err(|e| GatewayError::InvalidRequest(format!("training file line {}: {e}", i + 1)))?;
    }
    Ok(())
}
