//! OpenAI-compatible HTTP backend (hosted providers and local servers alike).

use std::time::Duration;

use reqwest::blocking::{multipart, Client, RequestBuilder, Response};
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    Backend, BackendError, BackendReply, ChatRequest, FineTuneHyperparams, FineTuneJob, FinishReason, JobStatus,
};
use crate::baselines::features::{LogprobSource, TokenLogprob};

pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    client: Client,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| BackendError::Fatal {
                status: None,
                message: format!("building HTTP client: {e}"),
            })?;
        Ok(HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            client,
        })
    }

    /// Reads the bearer token from `auth_env_var`; an empty variable name
    /// means the endpoint needs no authentication.
    pub fn from_env(base_url: impl Into<String>, auth_env_var: &str) -> Result<Self, BackendError> {
        let key = if auth_env_var.is_empty() {
            None
        } else {
            Some(
                std::env::var(auth_env_var)
                    .map_err(|_| BackendError::Auth(format!("environment variable {auth_env_var} is not set")))?,
            )
        };
        Self::new(base_url, key)
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url, path.trim_start_matches('/'))
    }

    fn authed(&self, rb: RequestBuilder) -> RequestBuilder {
        match &self.api_key {
            Some(k) => rb.bearer_auth(k),
            None => rb,
        }
    }

    fn send(&self, rb: RequestBuilder) -> Result<Value, BackendError> {
        let resp = self.authed(rb).send().map_err(|e| BackendError::Transient {
            status: None,
            message: e.to_string(),
        })?;
        read_json(resp)
    }
}

fn read_json(resp: Response) -> Result<Value, BackendError> {
    let status = resp.status();
    let body = resp.text().unwrap_or_default();
    if status.is_success() {
        return serde_json::from_str(&body).map_err(|e| BackendError::Fatal {
            status: Some(status.as_u16()),
            message: format!("malformed response body: {e}"),
        });
    }
    let message = serde_json::from_str::<Value>(&body)
        .ok()
        .and_then(|v| v["error"]["message"].as_str().map(str::to_string))
        .unwrap_or(body);
    Err(classify(status, message))
}

fn classify(status: StatusCode, message: String) -> BackendError {
    let code = status.as_u16();
    match code {
        401 | 403 => BackendError::Auth(message),
        408 | 409 | 429 => BackendError::Transient {
            status: Some(code),
            message,
        },
        _ if status.is_server_error() => BackendError::Transient {
            status: Some(code),
            message,
        },
        _ => BackendError::Fatal {
            status: Some(code),
            message,
        },
    }
}

#[derive(Deserialize)]
struct WireJob {
    id: String,
    model: Option<String>,
    training_file: Option<String>,
    status: String,
    fine_tuned_model: Option<String>,
    hyperparameters: Option<Value>,
    error: Option<Value>,
}

fn job_from_wire(v: Value, fallback_hp: &FineTuneHyperparams) -> Result<FineTuneJob, BackendError> {
    let w: WireJob = serde_json::from_value(v).map_err(|e| BackendError::Fatal {
        status: None,
        message: format!("malformed fine-tuning job: {e}"),
    })?;
    let status = match w.status.as_str() {
        "validating_files" | "queued" => JobStatus::Queued,
        "running" => JobStatus::Running,
        "succeeded" => JobStatus::Succeeded,
        _ => JobStatus::Failed,
    };
    let hp = w
        .hyperparameters
        .as_ref()
        .map(|h| FineTuneHyperparams {
            epochs: h["n_epochs"].as_u64().map_or(fallback_hp.epochs, |x| x as u32),
            batch_size: h["batch_size"].as_u64().map_or(fallback_hp.batch_size, |x| x as u32),
            learning_rate_multiplier: h["learning_rate_multiplier"]
                .as_f64()
                .unwrap_or(fallback_hp.learning_rate_multiplier),
        })
        .unwrap_or(*fallback_hp);
    let error = w.error.as_ref().and_then(|e| e["message"].as_str()).map(str::to_string);
    Ok(FineTuneJob {
        job_id: w.id,
        base_model: w.model.unwrap_or_default(),
        training_file_ref: w.training_file.unwrap_or_default(),
        hyperparams: hp,
        status,
        result_model: if status == JobStatus::Succeeded {
            w.fine_tuned_model
        } else {
            None
        },
        error: if status == JobStatus::Failed {
            Some(error.unwrap_or_else(|| format!("job ended with status {}", w.status)))
        } else {
            None
        },
    })
}

impl Backend for HttpBackend {
    fn chat(&self, req: &ChatRequest) -> Result<BackendReply, BackendError> {
        let body = json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        });
        let v = self.send(self.client.post(self.url("chat/completions")).json(&body))?;
        let choice = &v["choices"][0];
        let text = choice["message"]["content"]
            .as_str()
            .ok_or_else(|| BackendError::Fatal {
                status: None,
                message: "response has no choices[0].message.content".into(),
            })?;
        Ok(BackendReply {
            text: text.to_string(),
            finish_reason: FinishReason::from_wire(choice["finish_reason"].as_str()),
        })
    }

    fn upload_training_file(&self, bytes: &[u8]) -> Result<String, BackendError> {
        let form = multipart::Form::new().text("purpose", "fine-tune").part(
            "file",
            multipart::Part::bytes(bytes.to_vec()).file_name("training.jsonl"),
        );
        let v = self.send(self.client.post(self.url("files")).multipart(form))?;
        v["id"].as_str().map(str::to_string).ok_or_else(|| BackendError::Fatal {
            status: None,
            message: "upload response has no file id".into(),
        })
    }

    fn create_finetune_job(
        &self,
        training_file: &str,
        base_model: &str,
        hp: &FineTuneHyperparams,
    ) -> Result<FineTuneJob, BackendError> {
        let body = json!({
            "training_file": training_file,
            "model": base_model,
            "hyperparameters": {
                "n_epochs": hp.epochs,
                "batch_size": hp.batch_size,
                "learning_rate_multiplier": hp.learning_rate_multiplier,
            },
        });
        let v = self.send(self.client.post(self.url("fine_tuning/jobs")).json(&body))?;
        job_from_wire(v, hp)
    }

    fn finetune_job(&self, job_id: &str) -> Result<FineTuneJob, BackendError> {
        let v = self.send(self.client.get(self.url(&format!("fine_tuning/jobs/{job_id}"))))?;
        job_from_wire(v, &FineTuneHyperparams::default())
    }
}

impl LogprobSource for HttpBackend {
    /// Scores `text` through the legacy completions endpoint with `echo`.
    fn token_logprobs(&self, model: &str, text: &str) -> Result<Vec<TokenLogprob>, BackendError> {
        let body = json!({
            "model": model,
            "prompt": text,
            "echo": true,
            "logprobs": 0,
            "max_tokens": 0,
            "temperature": 0,
        });
        let v = self.send(self.client.post(self.url("completions")).json(&body))?;
        let lp = &v["choices"][0]["logprobs"];
        let (Some(tokens), Some(values), Some(offsets)) = (
            lp["tokens"].as_array(),
            lp["token_logprobs"].as_array(),
            lp["text_offset"].as_array(),
        ) else {
            return Err(BackendError::Fatal {
                status: None,
                message: "response lacks echoed token log-probabilities".into(),
            });
        };
        Ok(tokens
            .iter()
            .zip(values)
            .zip(offsets)
            .map(|((t, l), o)| TokenLogprob {
                token: t.as_str().unwrap_or_default().to_string(),
                logprob: l.as_f64(),
                offset: o.as_u64().unwrap_or(0) as usize,
            })
            .collect())
    }
}
