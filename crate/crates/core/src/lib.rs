//! Elicits psycholinguistic norms (word and sentence memorability, word
//! reading times) from chat-completion language models under zero-shot,
//! few-shot and fine-tuned regimes, and scores them against human data and
//! interpretable regression baselines.

pub mod align;
pub mod baselines;
pub mod config;
pub mod corpus;
pub mod error;
pub mod gateway;
pub mod metrics;
pub mod parse;
pub mod pipeline;
pub mod prompting;
pub mod report;
pub mod seeded;

pub use error::{Error, NumericError, Result};

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
