//! Deterministic offline backend.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    Backend, BackendError, BackendReply, ChatRequest, FineTuneHyperparams, FineTuneJob, FinishReason, JobStatus,
};
use crate::parse::format_duration_map;
use crate::prompting::{PromptKind, PromptTemplate};

/// Models whose id starts with this prefix answer as the ground-truth oracle.
pub const TUNED_MODEL_PREFIX: &str = "mock-tuned:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockPersonality {
    /// Answers with the formatted ground truth registered for the prompt.
    Oracle,
    /// `0.50` for ratings; every word at 200 ms for duration maps.
    Constant,
    /// Unusable prose with no numbers or braces.
    Garbage,
}

impl FromStr for MockPersonality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(MockPersonality::Oracle),
            "constant" => Ok(MockPersonality::Constant),
            "garbage" => Ok(MockPersonality::Garbage),
            _ => Err(format!(
                "unknown mock personality `{s}` (expected oracle, constant or garbage)"
            )),
        }
    }
}

impl fmt::Display for MockPersonality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MockPersonality::Oracle => "oracle",
            MockPersonality::Constant => "constant",
            MockPersonality::Garbage => "garbage",
        })
    }
}

/// A pure function of the final user message, plus an in-memory fine-tuning
/// provider whose jobs succeed immediately.
pub struct MockBackend {
    personality: MockPersonality,
    answers: HashMap<String, String>,
    log: Mutex<Vec<ChatRequest>>,
    jobs: Mutex<HashMap<String, FineTuneJob>>,
}

impl MockBackend {
    pub fn new(personality: MockPersonality) -> Self {
        MockBackend {
            personality,
            answers: HashMap::new(),
            log: Mutex::new(Vec::new()),
            jobs: Mutex::new(HashMap::new()),
        }
    }

    /// Registers ground-truth answers keyed by the rendered item prompt.
    pub fn with_answers(mut self, answers: impl IntoIterator<Item = (String, String)>) -> Self {
        self.answers.extend(answers);
        self
    }

    pub fn personality(&self) -> MockPersonality {
        self.personality
    }

    /// Every chat request received, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn oracle(&self, prompt: &str) -> String {
        self.answers
            .get(prompt)
            .cloned()
            .unwrap_or_else(|| "I do not know this item.".to_string())
    }

    fn constant(prompt: &str) -> String {
        let rt = PromptTemplate::for_kind(PromptKind::Rt);
        match prompt.strip_prefix(rt.prefix()) {
            Some(sentence) => {
                let words: Vec<&str> = sentence.split_whitespace().collect();
                format_duration_map(words.iter().map(|w| (*w, "200")))
            }
            None => "0.50".to_string(),
        }
    }

    fn garbage(hash: &str) -> String {
        const SYLLABLES: [&str; 16] = [
            "ka", "lo", "mi", "ren", "tu", "sa", "vex", "qui", "do", "ple", "nor", "zi", "fa", "gu", "he", "wyn",
        ];
        let words: Vec<String> = hash
            .as_bytes()
            .chunks(4)
            .take(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|b| SYLLABLES[(*b as usize) % SYLLABLES.len()])
                    .collect::<String>()
            })
            .collect();
        format!(
            "As a language model I would rather discuss {} instead.",
            words.join(" ")
        )
    }
}

impl Backend for MockBackend {
    fn chat(&self, req: &ChatRequest) -> Result<BackendReply, BackendError> {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).push(req.clone());
        let prompt = req.messages.last().map(|m| m.content.as_str()).unwrap_or_default();
        let text = if req.model.starts_with(TUNED_MODEL_PREFIX) {
            self.oracle(prompt)
        } else {
            match self.personality {
                MockPersonality::Oracle => self.oracle(prompt),
                MockPersonality::Constant => Self::constant(prompt),
                MockPersonality::Garbage => Self::garbage(&req.request_hash()),
            }
        };
        Ok(BackendReply {
            text,
            finish_reason: FinishReason::Stop,
        })
    }

    fn upload_training_file(&self, bytes: &[u8]) -> Result<String, BackendError> {
        Ok(format!("mock-file-{}", &crate::sha256_hex(bytes)[..12]))
    }

    fn create_finetune_job(
        &self,
        training_file: &str,
        base_model: &str,
        hp: &FineTuneHyperparams,
    ) -> Result<FineTuneJob, BackendError> {
        let tag = training_file.trim_start_matches("mock-file-");
        let job = FineTuneJob {
            job_id: format!("mock-job-{tag}"),
            base_model: base_model.to_string(),
            training_file_ref: training_file.to_string(),
            hyperparams: *hp,
            status: JobStatus::Succeeded,
            result_model: Some(format!("{TUNED_MODEL_PREFIX}{base_model}:{tag}")),
            error: None,
        };
        self.jobs
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(job.job_id.clone(), job.clone());
        Ok(job)
    }

    fn finetune_job(&self, job_id: &str) -> Result<FineTuneJob, BackendError> {
        self.jobs
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get(job_id)
            .cloned()
            .ok_or_else(|| BackendError::Fatal {
                status: Some(404),
                message: format!("no such job {job_id}"),
            })
    }
}
