//! Extraction of ratings and word/duration maps from free-form model text.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarStatus {
    Ok,
    Clamped,
    NoNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedScalar {
    pub value: Option<f64>,
    pub status: ScalarStatus,
    pub raw: String,
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?(?:\d+(?:\.\d+)?|\.\d+)").expect("valid regex"))
}

/// Reads the first decimal numeral in `text` as a rating in [0,1].
/// Out-of-range numerals are clamped and flagged.
pub fn parse_scalar_rating(text: &str) -> ParsedScalar {
    let raw = text.to_string();
    let value = number_re()
        .find(text)
        .and_then(|m| m.as_str().parse::<f64>().ok())
        .filter(|v| v.is_finite());
    match value {
        Some(v) if (0.0..=1.0).contains(&v) => ParsedScalar {
            value: Some(v),
            status: ScalarStatus::Ok,
            raw,
        },
        Some(v) => ParsedScalar {
            value: Some(v.clamp(0.0, 1.0)),
            status: ScalarStatus::Clamped,
            raw,
        },
        None => ParsedScalar {
            value: None,
            status: ScalarStatus::NoNumber,
            raw,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapStatus {
    /// A brace block parsed cleanly.
    Ok,
    /// Pairs were salvaged from damaged output.
    Recovered,
    Unparseable,
}

/// Ordered word/duration pairs as written by the model. Duplicate words are
/// kept in place and surfaces are not normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationMap {
    pub pairs: Vec<(String, f64)>,
    pub status: MapStatus,
}

impl DurationMap {
    pub fn unparseable() -> Self {
        DurationMap {
            pairs: Vec::new(),
            status: MapStatus::Unparseable,
        }
    }

    pub fn words(&self) -> Vec<&str> {
        self.pairs.iter().map(|(w, _)| w.as_str()).collect()
    }

    /// Single-quoted map text, values in shortest decimal form.
    pub fn to_text(&self) -> String {
        let values: Vec<String> = self.pairs.iter().map(|(_, v)| v.to_string()).collect();
        format_duration_map(
            self.pairs
                .iter()
                .zip(&values)
                .map(|((w, _), v)| (w.as_str(), v.as_str())),
        )
    }
}

/// Writes pairs in the style taught by the prompt:
/// `{'I':200, 'like': 200, 'cats': 200}`.
pub fn format_duration_map<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut out = String::from("{");
    for (i, (word, value)) in pairs.into_iter().enumerate() {
        if i == 0 {
            out.push_str(&format!("'{word}':{value}"));
        } else {
            out.push_str(&format!(", '{word}': {value}"));
        }
    }
    out.push('}');
    out
}

const QUOTES: [char; 6] = ['\'', '"', '\u{2018}', '\u{2019}', '\u{201c}', '\u{201d}'];

fn is_quote(c: char) -> bool {
    QUOTES.contains(&c)
}

struct BlockResult {
    pairs: Vec<(String, f64)>,
    clean: bool,
    closed: bool,
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    /// Skips past the next `,` (consumed) or up to the next `}` (not consumed).
    fn skip_to_separator(&mut self) {
        while let Some(c) = self.peek() {
            match c {
                ',' | ';' | '\n' => {
                    self.bump();
                    return;
                }
                '}' => return,
                _ => {
                    self.bump();
                }
            }
        }
    }
}

fn unescape(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    let mut chars = key.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some(n @ ('"' | '\'' | '\\')) => out.push(n),
                Some(n) => {
                    out.push('\\');
                    out.push(n);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn swallowed_value_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r":\s*[-+]?\d").expect("valid regex"))
}

/// Reads a key up to and including its `:` separator. Returns the key and
/// whether it was well formed.
fn read_key(cur: &mut Cursor<'_>) -> Option<(String, bool)> {
    let first = cur.peek()?;
    if is_quote(first) {
        cur.bump();
        let body_start = cur.pos;
        let rest = cur.rest();
        // the closing quote is the first quote followed by optional whitespace and ':'
        for (off, c) in rest.char_indices() {
            if !is_quote(c) || (off > 0 && rest[..off].ends_with('\\') && c != '\'') {
                continue;
            }
            let after = rest[off + c.len_utf8()..].trim_start();
            if after.starts_with(':') {
                let key = &rest[..off];
                if swallowed_value_re().is_match(key) {
                    break;
                }
                let consumed = off + c.len_utf8() + (rest[off + c.len_utf8()..].len() - after.len()) + 1;
                cur.pos = body_start + consumed;
                return Some((unescape(key), true));
            }
        }
        // unterminated quote: fall back to reading a bare key after it
        let (key, _) = read_bare_key(cur)?;
        let key = key.trim_end_matches(is_quote).to_string();
        return (!key.is_empty()).then_some((key, false));
    }
    read_bare_key(cur)
}

fn read_bare_key(cur: &mut Cursor<'_>) -> Option<(String, bool)> {
    let rest = cur.rest();
    for (off, c) in rest.char_indices() {
        match c {
            ':' => {
                let key = rest[..off].trim();
                cur.pos += off + 1;
                return (!key.is_empty()).then(|| (key.to_string(), true));
            }
            ',' | '}' | '\n' | '{' => {
                cur.pos += off;
                return None;
            }
            _ => {}
        }
    }
    cur.pos = cur.s.len();
    None
}

fn value_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"^(?:["'\u{2018}\u{2019}\u{201c}\u{201d}]\s*(?P<q>[-+]?(?:\d+(?:\.\d+)?|\.\d+))\s*(?:ms|milliseconds)?\s*["'\u{2018}\u{2019}\u{201c}\u{201d}]|(?P<b>[-+]?(?:\d+(?:\.\d+)?|\.\d+))\s*(?:ms|milliseconds)?)"#,
        )
            .expect("valid regex")
    })
}

fn parse_block(cur: &mut Cursor<'_>, depth: usize) -> BlockResult {
    let mut result = BlockResult {
        pairs: Vec::new(),
        clean: true,
        closed: false,
    };
    loop {
        while let Some(c) = cur.peek().filter(|c| c.is_whitespace() || matches!(c, ',' | ';')) {
            result.clean &= c != ';';
            cur.bump();
        }
        match cur.peek() {
            None => return result,
            Some('}') => {
                cur.bump();
                result.closed = true;
                return result;
            }
            Some(_) => {}
        }
        let Some((key, key_clean)) = read_key(cur) else {
            result.clean = false;
            if cur.peek() == Some('{') {
                cur.bump();
            }
            cur.skip_to_separator();
            continue;
        };
        result.clean &= key_clean;
        cur.skip_ws();
        if cur.peek() == Some('{') && depth == 0 && result.pairs.is_empty() {
            // a wrapper object such as {"durations": {...}}
            cur.bump();
            let mut inner = parse_block(cur, depth + 1);
            inner.clean = false;
            return inner;
        }
        let Some(m) = value_re().captures(cur.rest()) else {
            result.clean = false;
            cur.skip_to_separator();
            continue;
        };
        let whole = m.get(0).expect("match").end();
        let number: f64 = m
            .name("q")
            .or_else(|| m.name("b"))
            .expect("one alternative matched")
            .as_str()
            .parse()
            .expect("regex admits only numerals");
        cur.pos += whole;
        cur.skip_ws();
        match cur.peek() {
            Some(',' | '}') | None => {}
            Some(';') => result.clean = false,
            Some(c) if is_quote(c) => result.clean = false, // missing comma
            Some(_) => {
                result.clean = false;
                cur.skip_to_separator();
            }
        }
        if number < 0.0 {
            result.clean = false;
            continue;
        }
        result.pairs.push((key, number));
    }
}

fn line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"^\s*(?:[-*\u{2022}]\s+|\d+[.)]\s+)?["'\u{2018}\u{2019}\u{201c}\u{201d}]?(?P<w>[^\s:=][^:=]*?)["'\u{2018}\u{2019}\u{201c}\u{201d}]?\s*[:=]\s*["']?(?P<v>[-+]?\d+(?:\.\d+)?)\s*(?:ms|milliseconds)?["']?\s*,?\s*$"#,
        )
        .expect("valid regex")
    })
}

fn parse_lines(text: &str) -> Vec<(String, f64)> {
    text.lines()
        .filter_map(|line| {
            let c = line_re().captures(line)?;
            let v: f64 = c["v"].parse().ok()?;
            (v >= 0.0).then(|| (c["w"].to_string(), v))
        })
        .collect()
}

/// Parses a word/duration map from model output.
///
/// The first brace block that yields at least one pair is used; text outside
/// it is ignored. Without a usable block, `word: number` lines are salvaged.
pub fn parse_duration_map(text: &str) -> DurationMap {
    let mut search_from = 0;
    while let Some(off) = text[search_from..].find('{') {
        let start = search_from + off + 1;
        let mut cur = Cursor { s: text, pos: start };
        let block = parse_block(&mut cur, 0);
        if !block.pairs.is_empty() {
            let status = if block.clean && block.closed {
                MapStatus::Ok
            } else {
                MapStatus::Recovered
            };
            return DurationMap {
                pairs: block.pairs,
                status,
            };
        }
        search_from = start;
    }
    let pairs = parse_lines(text);
    if pairs.is_empty() {
        DurationMap::unparseable()
    } else {
        DurationMap {
            pairs,
            status: MapStatus::Recovered,
        }
    }
}
