//! Word-level predictors: length, log frequency and surprisal.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use crate::align::normalize_word;
use crate::corpus::{token_key, RtSentence};
use crate::error::{Error, NumericError, Result, RowError};
use crate::gateway::BackendError;

/// Number of Unicode scalar values, punctuation included.
pub fn word_length(word: &str) -> usize {
    word.chars().count()
}

pub const DEFAULT_FREQUENCY_FLOOR: f64 = 1e-3;

/// Occurrences per million, keyed by normalized word.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    per_million: HashMap<String, f64>,
    /// Value used for out-of-vocabulary words.
    pub floor: f64,
}

impl FrequencyTable {
    pub fn from_pairs<S: AsRef<str>>(pairs: impl IntoIterator<Item = (S, f64)>, floor: f64) -> Self {
        let mut per_million = HashMap::new();
        for (w, v) in pairs {
            *per_million.entry(normalize_word(w.as_ref())).or_insert(0.0) += v;
        }
        FrequencyTable { per_million, floor }
    }

    /// Loads a `word`, `per_million` TSV. Rows whose words normalize to the
    /// same key are summed.
    pub fn load(path: impl AsRef<Path>, floor: f64) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .quoting(false)
            .flexible(true)
            .from_reader(file);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Format {
                path: path.into(),
                message: e.to_string(),
            })?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Format {
                    path: path.into(),
                    message: format!("missing required column `{name}`"),
                })
        };
        let (wc, fc) = (col("word")?, col("per_million")?);
        let mut pairs = Vec::new();
        let mut errors = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| Error::Format {
                path: path.into(),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            match (row.get(wc), row.get(fc).and_then(|v| v.trim().parse::<f64>().ok())) {
                (Some(w), Some(v)) if v >= 0.0 && v.is_finite() => pairs.push((w.to_string(), v)),
                _ => errors.push(RowError {
                    line,
                    message: "expected a word and a non-negative per-million value".into(),
                }),
            }
        }
        if !errors.is_empty() {
            return Err(Error::InvalidRows {
                path: path.into(),
                rows: errors,
            });
        }
        Ok(Self::from_pairs(pairs, floor))
    }

    pub fn per_million(&self, word: &str) -> Option<f64> {
        self.per_million.get(&normalize_word(word)).copied()
    }
}

/// Base-10 log of the per-million frequency, with the table floor for
/// unknown (or zero-count) words.
pub fn log_frequency(word: &str, table: &FrequencyTable) -> f64 {
    let v = table.per_million(word).filter(|v| *v > 0.0).unwrap_or(table.floor);
    v.log10()
}

/// Surprisal of a word as the sum of its subword surprisals.
pub fn word_surprisal(subword_surprisals: &[f64]) -> Result<f64, NumericError> {
    if subword_surprisals.is_empty() {
        return Err(NumericError::InvalidInput("a word needs at least one subword".into()));
    }
    if let Some(bad) = subword_surprisals.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(NumericError::InvalidInput(format!(
            "subword surprisal {bad} is negative or not finite"
        )));
    }
    Ok(subword_surprisals.iter().sum())
}

/// Per-token surprisal in bits, keyed by [`token_key`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurprisalTable {
    pub bits: HashMap<String, f64>,
}

impl SurprisalTable {
    /// Loads `sentence_id`, `position`, and `surprisal_bits` or
    /// `surprisal_nats` (converted to bits).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .quoting(false)
            .flexible(true)
            .from_reader(file);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Format {
                path: path.into(),
                message: e.to_string(),
            })?
            .clone();
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (Some(sc), Some(pc)) = (find("sentence_id"), find("position")) else {
            return Err(Error::Format {
                path: path.into(),
                message: "missing `sentence_id` or `position` column".into(),
            });
        };
        let (vc, scale) = match (find("surprisal_bits"), find("surprisal_nats")) {
            (Some(c), _) => (c, 1.0),
            (None, Some(c)) => (c, 1.0 / std::f64::consts::LN_2),
            (None, None) => {
                return Err(Error::Format {
                    path: path.into(),
                    message: "surprisal column must be named `surprisal_bits` or `surprisal_nats`".into(),
                })
            }
        };
        let mut bits = HashMap::new();
        let mut errors = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| Error::Format {
                path: path.into(),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let pos = row.get(pc).and_then(|p| p.trim().parse::<usize>().ok());
            let val = row.get(vc).and_then(|v| v.trim().parse::<f64>().ok());
            match (row.get(sc), pos, val) {
                (Some(s), Some(p), Some(v)) if v >= 0.0 && v.is_finite() => {
                    bits.insert(token_key(s.trim(), p), v * scale);
                }
                _ => errors.push(RowError {
                    line,
                    message: "expected sentence id, integer position and non-negative surprisal".into(),
                }),
            }
        }
        if !errors.is_empty() {
            return Err(Error::InvalidRows {
                path: path.into(),
                rows: errors,
            });
        }
        Ok(SurprisalTable { bits })
    }

    pub fn get(&self, sentence_id: &str, position: usize) -> Option<f64> {
        self.bits.get(&token_key(sentence_id, position)).copied()
    }

    /// Writes the table for `sentences` in the canonical surprisal format.
    pub fn write(&self, sentences: &[RtSentence], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("sentence_id\tposition\tsurprisal_bits\n");
        for s in sentences {
            for t in &s.tokens {
                if let Some(v) = self.get(&s.id, t.position) {
                    out.push_str(&format!("{}\t{}\t{}\n", s.id, t.position, v));
                }
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// One scored token of a language-model pass over a text.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenLogprob {
    pub token: String,
    /// Natural-log probability; absent for the first token of some APIs.
    pub logprob: Option<f64>,
    /// Byte offset of the token in the scored text.
    pub offset: usize,
}

/// Anything that can score every token of a text.
pub trait LogprobSource {
    fn token_logprobs(&self, model: &str, text: &str) -> Result<Vec<TokenLogprob>, BackendError>;
}

/// Groups subword tokens into words (a token starting with whitespace, `Ġ`
/// or `▁` opens a new word) and sums each word's surprisal in bits.
pub fn group_subword_surprisals(tokens: &[TokenLogprob]) -> Result<Vec<f64>, NumericError> {
    let mut words: Vec<Vec<f64>> = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        let opens = i == 0 || t.token.starts_with(char::is_whitespace) || t.token.starts_with(['Ġ', '▁']);
        let Some(lp) = t.logprob else {
            return Err(NumericError::InvalidInput(format!(
                "token `{}` has no log-probability",
                t.token
            )));
        };
        let s = -lp / std::f64::consts::LN_2;
        if opens || words.is_empty() {
            words.push(vec![s.max(0.0)]);
        } else {
            words.last_mut().expect("non-empty").push(s.max(0.0));
        }
    }
    words.iter().map(|w| word_surprisal(w)).collect()
}

/// Scores each sentence with `source`, using `context` as a prefix whose
/// tokens are discarded (so the first word is conditioned on something).
pub fn surprisal_from_source(
    source: &dyn LogprobSource,
    model: &str,
    sentences: &[RtSentence],
    context: &str,
) -> Result<SurprisalTable> {
    let mut table = SurprisalTable::default();
    for s in sentences {
        let text = format!("{context}{}", s.text());
        let tokens = source
            .token_logprobs(model, &text)
            .map_err(|e| Error::Data(format!("scoring sentence `{}`: {e}", s.id)))?;
        let kept: Vec<TokenLogprob> = tokens.into_iter().filter(|t| t.offset >= context.len()).collect();
        let per_word = group_subword_surprisals(&kept)?;
        if per_word.len() != s.tokens.len() {
            return Err(Error::Data(format!(
                "sentence `{}`: {} scored words for {} tokens",
                s.id,
                per_word.len(),
                s.tokens.len()
            )));
        }
        for (t, v) in s.tokens.iter().zip(per_word) {
            table.bits.insert(token_key(&s.id, t.position), v);
        }
    }
    Ok(table)
}
