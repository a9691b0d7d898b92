//! Prompt templates, zero/few-shot rendering and fine-tuning examples.
//!
//! The template bodies live in `fixtures/prompts/*.txt` and are embedded
//! verbatim. The fine-tuning file is line-delimited JSON, one record per
//! example, each exactly
//!
//! ```text
//! {"messages":[{"role":"user","content":"..."},{"role":"assistant","content":"..."}]}\n
//! ```
//!
//! with no insignificant whitespace, keys in that order, JSON string escaping
//! limited to `"`, `\` and control characters (`\n`, `\t`, `\r`, `\b`, `\f`,
//! otherwise `\u00XX` lowercase hex), and all other characters written as raw
//! UTF-8. Every record, including the last, ends with a single `\n`.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, DatasetKind, Item};
use crate::error::{Error, Result};
use crate::parse::format_duration_map;
use crate::seeded::SplitMix64;

const WORD_MEM_TEMPLATE: &str = include_str!("../fixtures/prompts/word_mem.txt");
const SENT_MEM_TEMPLATE: &str = include_str!("../fixtures/prompts/sent_mem.txt");
const RT_TEMPLATE: &str = include_str!("../fixtures/prompts/rt.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    WordMem,
    SentMem,
    Rt,
}

impl PromptKind {
    pub fn is_scalar(self) -> bool {
        !matches!(self, PromptKind::Rt)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::WordMem => "word_mem",
            PromptKind::SentMem => "sent_mem",
            PromptKind::Rt => "rt",
        }
    }
}

impl From<DatasetKind> for PromptKind {
    fn from(kind: DatasetKind) -> Self {
        match kind {
            DatasetKind::WordMem => PromptKind::WordMem,
            DatasetKind::SentMem => PromptKind::SentMem,
            DatasetKind::RtSpr | DatasetKind::RtEt => PromptKind::Rt,
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub body: &'static str,
}

impl PromptTemplate {
    pub fn for_kind(kind: PromptKind) -> Self {
        let body = match kind {
            PromptKind::WordMem => WORD_MEM_TEMPLATE,
            PromptKind::SentMem => SENT_MEM_TEMPLATE,
            PromptKind::Rt => RT_TEMPLATE,
        };
        PromptTemplate { kind, body }
    }

    pub fn placeholder(&self) -> &'static str {
        match self.kind {
            PromptKind::WordMem => "{word}",
            PromptKind::SentMem | PromptKind::Rt => "{sentence}",
        }
    }

    /// Text before the placeholder. Every rendered prompt starts with it.
    pub fn prefix(&self) -> &'static str {
        let at = self
            .body
            .find(self.placeholder())
            .expect("template carries its placeholder");
        &self.body[..at]
    }

    pub fn render(&self, text: &str) -> String {
        self.body.replacen(self.placeholder(), text, 1)
    }

    /// SHA-256 of the template bytes, hex encoded.
    pub fn fingerprint(&self) -> String {
        crate::sha256_hex(self.body.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub item_id: String,
    pub messages: Vec<Message>,
}

impl RenderedPrompt {
    /// Prepends a system message. Templates are sent as a single user
    /// message unless a caller opts into this.
    pub fn with_system_message(mut self, content: impl Into<String>) -> Self {
        self.messages.insert(0, Message::system(content));
        self
    }

    pub fn final_user_content(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or_default()
    }
}

pub fn render_zero_shot(kind: PromptKind, item: Item<'_>) -> Result<RenderedPrompt> {
    check_item_kind(kind, item)?;
    let text = item.text();
    if text.trim().is_empty() {
        return Err(Error::Data(format!("item `{}` has empty text", item.id())));
    }
    Ok(RenderedPrompt {
        item_id: item.id().to_string(),
        messages: vec![Message::user(PromptTemplate::for_kind(kind).render(&text))],
    })
}

fn check_item_kind(kind: PromptKind, item: Item<'_>) -> Result<()> {
    match (kind, item) {
        (PromptKind::Rt, Item::Sentence(_)) | (PromptKind::WordMem | PromptKind::SentMem, Item::Norm(_)) => Ok(()),
        _ => Err(Error::Data(format!(
            "item `{}` does not match prompt kind {kind}",
            item.id()
        ))),
    }
}

/// Seeded selection of `k` items from the train side: sorted ids, seeded
/// shuffle, first `k`.
pub fn select_few_shot_examples(train: &Dataset, k: usize, seed: u64) -> Result<Vec<Item<'_>>> {
    if train.len() < k {
        return Err(Error::Data(format!(
            "few-shot selection needs {k} train items, only {} available",
            train.len()
        )));
    }
    let items = train.items();
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[a].id().cmp(items[b].id()));
    SplitMix64::new(seed).shuffle(&mut order);
    Ok(order.into_iter().take(k).map(|i| items[i]).collect())
}

pub fn render_few_shot(kind: PromptKind, item: Item<'_>, examples: &[Item<'_>]) -> Result<RenderedPrompt> {
    let mut messages = Vec::with_capacity(examples.len() * 2 + 1);
    for ex in examples {
        if ex.id() == item.id() {
            return Err(Error::Data(format!(
                "few-shot example `{}` is the query item itself",
                ex.id()
            )));
        }
        let shown = render_zero_shot(kind, *ex)?;
        messages.extend(shown.messages);
        messages.push(Message::assistant(format_target(kind, *ex)?));
    }
    let query = render_zero_shot(kind, item)?;
    messages.extend(query.messages);
    Ok(RenderedPrompt {
        item_id: query.item_id,
        messages,
    })
}

/// The supervised answer for an item: two-decimal score for memorability,
/// integer-millisecond duration map for reading times.
pub fn format_target(kind: PromptKind, item: Item<'_>) -> Result<String> {
    check_item_kind(kind, item)?;
    Ok(match item {
        Item::Norm(r) => format_scalar_target(r.score),
        Item::Sentence(s) => {
            let pairs: Vec<(String, String)> = s
                .tokens
                .iter()
                .map(|t| (t.surface.clone(), round_half_up(t.rt_ms, 0)))
                .collect();
            format_duration_map(pairs.iter().map(|(w, v)| (w.as_str(), v.as_str())))
        }
    })
}

pub fn format_scalar_target(score: f64) -> String {
    round_half_up(score, 2)
}

/// Rounds the shortest decimal representation of `x` half away from zero
/// to `places` fractional digits.
pub fn round_half_up(x: f64, places: usize) -> String {
    assert!(x.is_finite(), "cannot round non-finite value {x}");
    let repr = format!("{}", x.abs());
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((&repr, ""));
    let mut digits: Vec<u8> = int_part.bytes().map(|b| b - b'0').collect();
    let frac: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    digits.extend((0..places).map(|i| frac.get(i).copied().unwrap_or(0)));
    if frac.get(places).copied().unwrap_or(0) >= 5 {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - places;
    let mut out = String::new();
    if x < 0.0 && digits.iter().any(|&d| d != 0) {
        out.push('-');
    }
    out.extend(digits[..split].iter().map(|d| char::from(b'0' + d)));
    if places > 0 {
        out.push('.');
        out.extend(digits[split..].iter().map(|d| char::from(b'0' + d)));
    }
    out
}

fn scalar_target_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(0\.\d{2}|1\.00)$").expect("valid regex"))
}

/// A supervised (prompt, answer) conversation for remote fine-tuning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneExample {
    pub messages: Vec<Message>,
}

impl FineTuneExample {
    pub fn target(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or_default()
    }

    /// Checks the example ends with a non-empty assistant answer that
    /// follows the answer grammar of `kind`.
    pub fn validate(&self, kind: PromptKind) -> Result<()> {
        let Some(last) = self.messages.last() else {
            return Err(Error::Data("fine-tuning example has no messages".into()));
        };
        if last.role != Role::Assistant || last.content.is_empty() {
            return Err(Error::Data(
                "fine-tuning example must end with a non-empty assistant message".into(),
            ));
        }
        let ok = if kind.is_scalar() {
            scalar_target_re().is_match(&last.content)
        } else {
            let parsed = crate::parse::parse_duration_map(&last.content);
            parsed.status == crate::parse::MapStatus::Ok && !parsed.pairs.is_empty()
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Data(format!(
                "fine-tuning target `{}` does not match the {kind} answer grammar",
                last.content
            )))
        }
    }
}

pub fn make_finetune_example(kind: PromptKind, item: Item<'_>) -> Result<FineTuneExample> {
    let mut messages = render_zero_shot(kind, item)?.messages;
    messages.push(Message::assistant(format_target(kind, item)?));
    let ex = FineTuneExample { messages };
    ex.validate(kind)?;
    Ok(ex)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializedFile {
    pub bytes: Vec<u8>,
    pub records: usize,
    pub warning: Option<String>,
}

pub fn serialize_finetune_file(examples: &[FineTuneExample]) -> SerializedFile {
    let mut bytes = Vec::new();
    for ex in examples {
        serde_json::to_writer(&mut bytes, ex).expect("in-memory JSON encoding cannot fail");
        bytes.push(b'\n');
    }
    let warning = examples
        .is_empty()
        .then(|| "fine-tuning file has no examples".to_string());
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    SerializedFile {
        bytes,
        records: examples.len(),
        warning,
    }
}

pub fn parse_finetune_line(line: &str) -> Result<FineTuneExample> {
    serde_json::from_str(line).map_err(|e| Error::Data(format!("bad fine-tuning record: {e}")))
}

/// Ids shared by two item lists; used to assert train/eval disjointness.
pub fn overlapping_ids<'a>(a: &[Item<'a>], b: &[Item<'a>]) -> Vec<String> {
    let left: HashSet<&str> = a.iter().map(|i| i.id()).collect();
    b.iter()
        .filter(|i| left.contains(i.id()))
        .map(|i| i.id().to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{NormRecord, RtSentence};
    use std::collections::BTreeMap;

    fn record(id: &str, text: &str, score: f64) -> NormRecord {
        NormRecord {
            id: id.into(),
            text: text.into(),
            score,
            features: BTreeMap::new(),
            embedding: None,
        }
    }

    #[test]
    fn templates_have_one_placeholder() {
        for kind in [PromptKind::WordMem, PromptKind::SentMem, PromptKind::Rt] {
            let t = PromptTemplate::for_kind(kind);
            assert_eq!(t.body.matches(t.placeholder()).count(), 1, "{kind}");
            assert!(t.body.starts_with("You are an expert in psycholinguistics."));
        }
    }

    #[test]
    fn zero_shot_word() {
        let r = record("w1", "dog", 0.5);
        let p = render_zero_shot(PromptKind::WordMem, Item::Norm(&r)).unwrap();
        assert_eq!(p.messages.len(), 1);
        assert_eq!(p.messages[0].role, Role::User);
        assert!(p.messages[0].content.ends_with("The word is dog"));
    }

    #[test]
    fn zero_shot_rt_and_sentence() {
        let s = RtSentence::from_pairs("s1", [("I", 100.0), ("like", 200.0), ("cats", 200.0)]);
        let p = render_zero_shot(PromptKind::Rt, Item::Sentence(&s)).unwrap();
        let c = &p.messages[0].content;
        assert!(c.contains("Include duplicate keys if there are duplicate words"));
        assert!(c.ends_with("The sentence is: I like cats"));

        let r = record("s1", "We want to make it better.", 0.56);
        let p = render_zero_shot(PromptKind::SentMem, Item::Norm(&r)).unwrap();
        let c = &p.messages[0].content;
        assert!(c.contains("memorability of English sentences"));
        assert!(!c.contains(" word"));
        assert!(c.ends_with("The sentence is We want to make it better."));
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let r = record("w1", "dog", 0.5);
        assert!(render_zero_shot(PromptKind::Rt, Item::Norm(&r)).is_err());
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(0.785, 2), "0.79");
        assert_eq!(round_half_up(0.53, 2), "0.53");
        assert_eq!(round_half_up(0.125, 2), "0.13");
        assert_eq!(round_half_up(1.005, 2), "1.01");
        assert_eq!(round_half_up(0.995, 2), "1.00");
        assert_eq!(round_half_up(1.0, 2), "1.00");
        assert_eq!(round_half_up(0.0, 2), "0.00");
        assert_eq!(round_half_up(0.004, 2), "0.00");
        assert_eq!(round_half_up(210.4, 0), "210");
        assert_eq!(round_half_up(99.6, 0), "100");
        assert_eq!(round_half_up(100.5, 0), "101");
        assert_eq!(round_half_up(999.5, 0), "1000");
        assert_eq!(round_half_up(-2.5, 0), "-3");
        assert_eq!(round_half_up(1e-7, 2), "0.00");
    }

    #[test]
    fn finetune_targets() {
        let r = record("w1", "dog", 0.53);
        let ex = make_finetune_example(PromptKind::WordMem, Item::Norm(&r)).unwrap();
        assert_eq!(ex.target(), "0.53");

        let s = RtSentence::from_pairs("s1", [("I", 200.0), ("like", 200.0), ("cats", 200.0)]);
        let ex = make_finetune_example(PromptKind::Rt, Item::Sentence(&s)).unwrap();
        assert_eq!(ex.target(), "{'I':200, 'like': 200, 'cats': 200}");

        let s = RtSentence::from_pairs(
            "s2",
            [
                ("the", 180.0),
                ("cat", 210.0),
                ("saw", 190.0),
                ("the", 170.0),
                ("dog", 220.0),
            ],
        );
        let ex = make_finetune_example(PromptKind::Rt, Item::Sentence(&s)).unwrap();
        let t = ex.target();
        let first = t.find("'the'").unwrap();
        let second = t[first + 1..].find("'the'").unwrap() + first + 1;
        assert!(t[first..second].contains("'cat'"));
        assert!(t[second..].contains("'dog'"));
    }

    #[test]
    fn few_shot_layout() {
        let train: Vec<NormRecord> = (0..5)
            .map(|i| record(&format!("t{i}"), &format!("w{i}"), 0.785))
            .collect();
        let d = Dataset::norms(DatasetKind::WordMem, train).unwrap();
        let ex = select_few_shot_examples(&d, 3, 1).unwrap();
        let q = record("q", "dog", 0.1);
        let p = render_few_shot(PromptKind::WordMem, Item::Norm(&q), &ex).unwrap();
        assert_eq!(p.messages.len(), 7);
        let roles: Vec<Role> = p.messages.iter().map(|m| m.role).collect();
        assert_eq!(
            roles,
            [
                Role::User,
                Role::Assistant,
                Role::User,
                Role::Assistant,
                Role::User,
                Role::Assistant,
                Role::User
            ]
        );
        assert_eq!(p.messages[1].content, "0.79");

        let none = render_few_shot(PromptKind::WordMem, Item::Norm(&q), &[]).unwrap();
        assert_eq!(none, render_zero_shot(PromptKind::WordMem, Item::Norm(&q)).unwrap());
        assert!(select_few_shot_examples(&d, 0, 1).unwrap().is_empty());
        assert!(select_few_shot_examples(&d, 6, 1).is_err());
    }

    #[test]
    fn few_shot_rejects_query_as_example() {
        let a = record("a", "dog", 0.5);
        let err = render_few_shot(PromptKind::WordMem, Item::Norm(&a), &[Item::Norm(&a)]).unwrap_err();
        assert!(err.to_string().contains("query item"));
    }

    #[test]
    fn rt_few_shot_target_rounds_to_ms() {
        let ex = RtSentence::from_pairs("e", [("Hi", 210.4), ("there", 99.6)]);
        let q = RtSentence::from_pairs("q", [("Go", 100.0)]);
        let p = render_few_shot(PromptKind::Rt, Item::Sentence(&q), &[Item::Sentence(&ex)]).unwrap();
        assert_eq!(p.messages[1].content, "{'Hi':210, 'there': 100}");
    }

    #[test]
    fn finetune_file_bytes() {
        let r = record("w1", "caf\u{e9}", 0.5);
        let ex = make_finetune_example(PromptKind::WordMem, Item::Norm(&r)).unwrap();
        let file = serialize_finetune_file(std::slice::from_ref(&ex));
        let text = String::from_utf8(file.bytes).unwrap();
        assert!(text.starts_with("{\"messages\":[{\"role\":\"user\",\"content\":\"You are"));
        assert!(text.ends_with("The word is caf\u{e9}\"},{\"role\":\"assistant\",\"content\":\"0.50\"}]}\n"));
        assert_eq!(parse_finetune_line(text.trim_end()).unwrap(), ex);

        let empty = serialize_finetune_file(&[]);
        assert!(empty.bytes.is_empty());
        assert!(empty.warning.is_some());
    }
}
