//! Dataset ingestion, canonical TSV formats and seeded splitting.
//!
//! Canonical formats (UTF-8, tab-separated, header row, no quoting):
//!
//! * norm table: `id`, `text`, `score`, then zero or more numeric feature
//!   columns. An empty, `NA` or `nan` feature cell means the feature is absent.
//! * RT table: `sentence_id`, `position`, `surface`, `rt_ms`. Rows of one
//!   sentence are contiguous and position-sorted starting at 0.
//! * embedding sidecar: `id` then `d` numeric columns for norm datasets, or
//!   `sentence_id`, `position` then `d` numeric columns for RT datasets.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowError};
use crate::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    WordMem,
    SentMem,
    RtSpr,
    RtEt,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::WordMem,
        DatasetKind::SentMem,
        DatasetKind::RtSpr,
        DatasetKind::RtEt,
    ];

    pub fn is_rt(self) -> bool {
        matches!(self, DatasetKind::RtSpr | DatasetKind::RtEt)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::WordMem => "word_mem",
            DatasetKind::SentMem => "sent_mem",
            DatasetKind::RtSpr => "rt_spr",
            DatasetKind::RtEt => "rt_et",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown dataset kind `{s}` (expected word_mem, sent_mem, rt_spr or rt_et)"))
    }
}

/// One word or sentence with its human memorability score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub id: String,
    pub text: String,
    pub score: f64,
    pub features: BTreeMap<String, f64>,
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtToken {
    pub surface: String,
    pub rt_ms: f64,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtSentence {
    pub id: String,
    pub tokens: Vec<RtToken>,
}

impl RtSentence {
    /// Builds a sentence from `(surface, rt_ms)` pairs, numbering positions from 0.
    pub fn from_pairs<S: Into<String>>(id: impl Into<String>, pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        RtSentence {
            id: id.into(),
            tokens: pairs
                .into_iter()
                .enumerate()
                .map(|(position, (surface, rt_ms))| RtToken {
                    surface: surface.into(),
                    rt_ms,
                    position,
                })
                .collect(),
        }
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    /// The token surfaces joined by single spaces.
    pub fn text(&self) -> String {
        self.words().join(" ")
    }
}

/// Key of one RT token in row-id based tables.
pub fn token_key(sentence_id: &str, position: usize) -> String {
    format!("{sentence_id}:{position}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Items {
    Norms(Vec<NormRecord>),
    Rt(Vec<RtSentence>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub items: Items,
}

/// A borrowed view of one stimulus, whatever the dataset kind.
#[derive(Debug, Clone, Copy)]
pub enum Item<'a> {
    Norm(&'a NormRecord),
    Sentence(&'a RtSentence),
}

impl<'a> Item<'a> {
    pub fn id(&self) -> &'a str {
        match self {
            Item::Norm(r) => &r.id,
            Item::Sentence(s) => &s.id,
        }
    }

    /// The text substituted into a prompt.
    pub fn text(&self) -> String {
        match self {
            Item::Norm(r) => r.text.clone(),
            Item::Sentence(s) => s.text(),
        }
    }
}

impl Dataset {
    pub fn norms(kind: DatasetKind, records: Vec<NormRecord>) -> Result<Self> {
        if kind.is_rt() {
            return Err(Error::Data(format!(
                "{kind} datasets hold RT sentences, not norm records"
            )));
        }
        validate_norm_records(&records)?;
        Ok(Dataset {
            kind,
            items: Items::Norms(records),
        })
    }

    pub fn rt(kind: DatasetKind, sentences: Vec<RtSentence>) -> Result<Self> {
        if !kind.is_rt() {
            return Err(Error::Data(format!(
                "{kind} datasets hold norm records, not RT sentences"
            )));
        }
        validate_rt_sentences(&sentences)?;
        Ok(Dataset {
            kind,
            items: Items::Rt(sentences),
        })
    }

    pub fn len(&self) -> usize {
        match &self.items {
            Items::Norms(r) => r.len(),
            Items::Rt(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn token_count(&self) -> usize {
        match &self.items {
            Items::Norms(r) => r.len(),
            Items::Rt(s) => s.iter().map(|s| s.tokens.len()).sum(),
        }
    }

    pub fn items(&self) -> Vec<Item<'_>> {
        match &self.items {
            Items::Norms(r) => r.iter().map(Item::Norm).collect(),
            Items::Rt(s) => s.iter().map(Item::Sentence).collect(),
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.items().iter().map(|i| i.id().to_string()).collect()
    }

    pub fn norm_records(&self) -> Option<&[NormRecord]> {
        match &self.items {
            Items::Norms(r) => Some(r),
            Items::Rt(_) => None,
        }
    }

    pub fn rt_sentences(&self) -> Option<&[RtSentence]> {
        match &self.items {
            Items::Rt(s) => Some(s),
            Items::Norms(_) => None,
        }
    }

    /// Keeps the items whose id is in `ids`, preserving dataset order.
    pub fn subset(&self, ids: &HashSet<&str>) -> Dataset {
        let items = match &self.items {
            Items::Norms(r) => Items::Norms(r.iter().filter(|x| ids.contains(x.id.as_str())).cloned().collect()),
            Items::Rt(s) => Items::Rt(s.iter().filter(|x| ids.contains(x.id.as_str())).cloned().collect()),
        };
        Dataset { kind: self.kind, items }
    }
}

fn validate_norm_records(records: &[NormRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    let mut dim = None;
    for r in records {
        if r.text.trim().is_empty() {
            return Err(Error::Data(format!("record `{}` has empty text", r.id)));
        }
        if !(0.0..=1.0).contains(&r.score) {
            return Err(Error::Data(format!(
                "record `{}` score {} outside [0,1]",
                r.id, r.score
            )));
        }
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Data(format!("duplicate id `{}`", r.id)));
        }
        if let Some(e) = &r.embedding {
            match dim {
                None => dim = Some(e.len()),
                Some(d) if d != e.len() => {
                    return Err(Error::Data(format!(
                        "record `{}` embedding has dimension {}, expected {d}",
                        r.id,
                        e.len()
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

fn validate_rt_sentences(sentences: &[RtSentence]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in sentences {
        if s.tokens.is_empty() {
            return Err(Error::Data(format!("sentence `{}` has no tokens", s.id)));
        }
        if !seen.insert(s.id.as_str()) {
            return Err(Error::Data(format!("duplicate sentence id `{}`", s.id)));
        }
        for (i, t) in s.tokens.iter().enumerate() {
            if t.position != i {
                return Err(Error::Data(format!(
                    "sentence `{}`: expected position {i}, found {}",
                    s.id, t.position
                )));
            }
            if !(t.rt_ms > 0.0 && t.rt_ms.is_finite()) {
                return Err(Error::Data(format!(
                    "sentence `{}` position {}: rt_ms must be positive, got {}",
                    s.id, t.position, t.rt_ms
                )));
            }
            if t.surface.is_empty() || t.surface.chars().any(char::is_whitespace) {
                return Err(Error::Data(format!(
                    "sentence `{}` position {}: surface `{}` must be non-empty without whitespace",
                    s.id, t.position, t.surface
                )));
            }
        }
    }
    Ok(())
}

fn tsv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .has_headers(true)
        .from_reader(file))
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| format_err(path, format!("missing required column `{name}`")))
}

fn is_absent(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
}

fn parse_f64(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads a norm table. Every invalid row is reported, not just the first.
pub fn load_norms(path: impl AsRef<Path>, kind: DatasetKind) -> Result<Dataset> {
    let path = path.as_ref();
    if kind.is_rt() {
        return Err(Error::Data(format!("{kind} is an RT dataset; use load_rt_corpus")));
    }
    let mut rdr = tsv_reader(path)?;
    let headers = rdr.headers().map_err(|e| format_err(path, e.to_string()))?.clone();
    let id_col = column(&headers, "id", path)?;
    let text_col = column(&headers, "text", path)?;
    let score_col = column(&headers, "score", path)?;
    let feature_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| ![id_col, text_col, score_col].contains(i))
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| format_err(path, e.to_string()))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.len() != headers.len() {
            errors.push(RowError {
                line,
                message: format!("expected {} columns, found {}", headers.len(), row.len()),
            });
            continue;
        }
        let mut problems = Vec::new();
        let id = row[id_col].trim().to_string();
        if id.is_empty() {
            problems.push("empty id".to_string());
        } else if let Some(prev) = seen.get(&id) {
            problems.push(format!("duplicate id `{id}` (first seen on line {prev})"));
        }
        let text = row[text_col].trim().to_string();
        if text.is_empty() {
            problems.push("empty text".to_string());
        }
        let score = match parse_f64(&row[score_col]) {
            Some(s) if (0.0..=1.0).contains(&s) => s,
            Some(s) => {
                problems.push(format!("score {s} outside [0,1]"));
                f64::NAN
            }
            None => {
                problems.push(format!("score `{}` is not a number", &row[score_col]));
                f64::NAN
            }
        };
        let mut features = BTreeMap::new();
        for (col, name) in &feature_cols {
            let cell = &row[*col];
            if is_absent(cell) {
                continue;
            }
            match parse_f64(cell) {
                Some(v) => {
                    features.insert(name.clone(), v);
                }
                None => problems.push(format!("feature `{name}` value `{cell}` is not a number")),
            }
        }
        if !id.is_empty() {
            seen.entry(id.clone()).or_insert(line);
        }
        if problems.is_empty() {
            records.push(NormRecord {
                id,
                text,
                score,
                features,
                embedding: None,
            });
        } else {
            errors.push(RowError {
                line,
                message: problems.join("; "),
            });
        }
    }
    if !errors.is_empty() {
        return Err(Error::InvalidRows {
            path: path.to_path_buf(),
            rows: errors,
        });
    }
    Dataset::norms(kind, records)
}

/// Loads a per-token RT table into sentences.
pub fn load_rt_corpus(path: impl AsRef<Path>, kind: DatasetKind) -> Result<Dataset> {
    let path = path.as_ref();
    if !kind.is_rt() {
        return Err(Error::Data(format!("{kind} is a norm dataset; use load_norms")));
    }
    let mut rdr = tsv_reader(path)?;
    let headers = rdr.headers().map_err(|e| format_err(path, e.to_string()))?.clone();
    let sid_col = column(&headers, "sentence_id", path)?;
    let pos_col = column(&headers, "position", path)?;
    let surface_col = column(&headers, "surface", path)?;
    let rt_col = column(&headers, "rt_ms", path)?;

    let mut sentences: Vec<RtSentence> = Vec::new();
    let mut closed: HashSet<String> = HashSet::new();
    let mut errors = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| format_err(path, e.to_string()))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.len() != headers.len() {
            errors.push(RowError {
                line,
                message: format!("expected {} columns, found {}", headers.len(), row.len()),
            });
            continue;
        }
        let sid = row[sid_col].trim().to_string();
        let surface = row[surface_col].trim().to_string();
        let mut problems = Vec::new();
        if sid.is_empty() {
            problems.push("empty sentence_id".to_string());
        }
        let position = match row[pos_col].trim().parse::<usize>() {
            Ok(p) => Some(p),
            Err(_) => {
                problems.push(format!("position `{}` is not a non-negative integer", &row[pos_col]));
                None
            }
        };
        let pos_label = position.map_or_else(|| row[pos_col].to_string(), |p| p.to_string());
        match parse_f64(&row[rt_col]) {
            Some(v) if v > 0.0 => {}
            Some(v) => problems.push(format!(
                "sentence `{sid}` position {pos_label}: rt_ms must be positive, got {v}"
            )),
            None => problems.push(format!(
                "sentence `{sid}` position {pos_label}: rt_ms `{}` is not a number",
                &row[rt_col]
            )),
        }
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            problems.push(format!(
                "sentence `{sid}` position {pos_label}: surface must be non-empty without whitespace"
            ));
        }

        let continuing = sentences.last().is_some_and(|s| s.id == sid);
        if !continuing && closed.contains(&sid) {
            problems.push(format!("rows of sentence `{sid}` are not contiguous"));
        }
        let expected = if continuing {
            sentences.last().map_or(0, |s| s.tokens.len())
        } else {
            0
        };
        if let Some(p) = position {
            if p != expected {
                problems.push(format!(
                    "sentence `{sid}`: gap in positions, expected {expected}, found {p}"
                ));
            }
        }

        if !problems.is_empty() {
            errors.push(RowError {
                line,
                message: problems.join("; "),
            });
        }
        if !continuing {
            if let Some(prev) = sentences.last() {
                closed.insert(prev.id.clone());
            }
            sentences.push(RtSentence {
                id: sid.clone(),
                tokens: Vec::new(),
            });
        }
        let current = sentences.last_mut().expect("pushed above");
        current.tokens.push(RtToken {
            surface,
            rt_ms: parse_f64(&row[rt_col]).unwrap_or(f64::NAN),
            position: expected,
        });
    }
    if !errors.is_empty() {
        return Err(Error::InvalidRows {
            path: path.to_path_buf(),
            rows: errors,
        });
    }
    Dataset::rt(kind, sentences)
}

/// Per-id embedding vectors with one fixed dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

/// Loads an embedding sidecar. RT sidecars (`sentence_id`, `position` first)
/// are keyed by [`token_key`].
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let mut rdr = tsv_reader(path)?;
    let headers = rdr.headers().map_err(|e| format_err(path, e.to_string()))?.clone();
    let key_cols = match (headers.get(0).map(str::trim), headers.get(1).map(str::trim)) {
        (Some("id"), _) => 1,
        (Some("sentence_id"), Some("position")) => 2,
        _ => {
            return Err(format_err(
                path,
                "embedding sidecar must start with `id` or `sentence_id`, `position`",
            ))
        }
    };
    let dim = headers.len() - key_cols;
    if dim == 0 {
        return Err(format_err(path, "embedding sidecar has no value columns"));
    }
    let mut table = EmbeddingTable {
        dim,
        vectors: HashMap::new(),
    };
    let mut errors = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| format_err(path, e.to_string()))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.len() != headers.len() {
            errors.push(RowError {
                line,
                message: format!(
                    "inconsistent embedding dimension: expected {dim} values, found {}",
                    row.len().saturating_sub(key_cols)
                ),
            });
            continue;
        }
        let key = if key_cols == 1 {
            row[0].trim().to_string()
        } else {
            match row[1].trim().parse::<usize>() {
                Ok(p) => token_key(row[0].trim(), p),
                Err(_) => {
                    errors.push(RowError {
                        line,
                        message: format!("position `{}` is not an integer", &row[1]),
                    });
                    continue;
                }
            }
        };
        let values: Option<Vec<f64>> = row.iter().skip(key_cols).map(parse_f64).collect();
        match values {
            Some(v) => {
                if table.vectors.insert(key.clone(), v).is_some() {
                    errors.push(RowError {
                        line,
                        message: format!("duplicate id `{key}`"),
                    });
                }
            }
            None => errors.push(RowError {
                line,
                message: "non-numeric embedding value".to_string(),
            }),
        }
    }
    if !errors.is_empty() {
        return Err(Error::InvalidRows {
            path: path.to_path_buf(),
            rows: errors,
        });
    }
    Ok(table)
}

/// Attaches sidecar vectors to the records of a norm dataset. Returns the
/// number of records left without an embedding.
pub fn attach_embeddings(dataset: &mut Dataset, table: &EmbeddingTable) -> Result<usize> {
    let Items::Norms(records) = &mut dataset.items else {
        return Err(Error::Data(
            "RT embeddings are looked up per token; they are not attached to the dataset".into(),
        ));
    };
    let mut missing = 0;
    for r in records.iter_mut() {
        r.embedding = table.vectors.get(&r.id).cloned();
        if r.embedding.is_none() {
            missing += 1;
        }
    }
    Ok(missing)
}

fn tsv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(file))
}

fn write_err(path: &Path, e: impl fmt::Display) -> Error {
    format_err(path, format!("write failed: {e}"))
}

/// Files written by [`write_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFiles {
    pub table: PathBuf,
    pub embeddings: Option<PathBuf>,
}

/// Writes the dataset in canonical form to `dir` as `<kind>.tsv` (plus
/// `<kind>.embeddings.tsv` when any norm record carries an embedding).
pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<CanonicalFiles> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let table = dir.join(format!("{}.tsv", dataset.kind));
    let mut embeddings = None;
    match &dataset.items {
        Items::Norms(records) => {
            let feature_names: BTreeSet<&str> = records
                .iter()
                .flat_map(|r| r.features.keys().map(String::as_str))
                .collect();
            let mut w = tsv_writer(&table)?;
            let mut header = vec!["id", "text", "score"];
            header.extend(feature_names.iter().copied());
            w.write_record(&header).map_err(|e| write_err(&table, e))?;
            for r in records {
                let mut row = vec![r.id.clone(), r.text.clone(), r.score.to_string()];
                row.extend(
                    feature_names
                        .iter()
                        .map(|f| r.features.get(*f).map(|v| v.to_string()).unwrap_or_default()),
                );
                w.write_record(&row).map_err(|e| write_err(&table, e))?;
            }
            w.flush()
                .map_err(|e| Error::io(format!("writing {}", table.display()), e))?;

            if let Some(dim) = records.iter().find_map(|r| r.embedding.as_ref().map(Vec::len)) {
                let path = dir.join(format!("{}.embeddings.tsv", dataset.kind));
                let mut w = tsv_writer(&path)?;
                let mut header = vec!["id".to_string()];
                header.extend((0..dim).map(|i| format!("e{i}")));
                w.write_record(&header).map_err(|e| write_err(&path, e))?;
                for r in records {
                    if let Some(e) = &r.embedding {
                        let mut row = vec![r.id.clone()];
                        row.extend(e.iter().map(f64::to_string));
                        w.write_record(&row).map_err(|e| write_err(&path, e))?;
                    }
                }
                w.flush()
                    .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
                embeddings = Some(path);
            }
        }
        Items::Rt(sentences) => {
            let mut w = tsv_writer(&table)?;
            w.write_record(["sentence_id", "position", "surface", "rt_ms"])
                .map_err(|e| write_err(&table, e))?;
            for s in sentences {
                for t in &s.tokens {
                    w.write_record([s.id.as_str(), &t.position.to_string(), &t.surface, &t.rt_ms.to_string()])
                        .map_err(|e| write_err(&table, e))?;
                }
            }
            w.flush()
                .map_err(|e| Error::io(format!("writing {}", table.display()), e))?;
        }
    }
    Ok(CanonicalFiles { table, embeddings })
}

/// Loads whatever [`write_dataset`] produced.
pub fn load_canonical(files: &CanonicalFiles, kind: DatasetKind) -> Result<Dataset> {
    if kind.is_rt() {
        return load_rt_corpus(&files.table, kind);
    }
    let mut d = load_norms(&files.table, kind)?;
    if let Some(e) = &files.embeddings {
        attach_embeddings(&mut d, &load_embeddings(e)?)?;
    }
    Ok(d)
}

/// Partitions a dataset into (train, eval). The train side is the first
/// `floor(train_fraction * n)` ids of the seeded order of the sorted ids, so
/// the result does not depend on row order. RT datasets split by sentence.
pub fn split_dataset(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Data(format!(
            "train fraction {train_fraction} must lie in (0,1)"
        )));
    }
    let n = dataset.len();
    let n_train = seeded::floor_fraction(train_fraction, n);
    if n_train == 0 || n_train == n {
        return Err(Error::Data(format!(
            "train fraction {train_fraction} over {n} items leaves one side empty"
        )));
    }
    let order = seeded::seeded_order(&dataset.ids(), seed);
    let train_ids: HashSet<&str> = order[..n_train].iter().map(String::as_str).collect();
    let eval_ids: HashSet<&str> = order[n_train..].iter().map(String::as_str).collect();
    Ok((dataset.subset(&train_ids), dataset.subset(&eval_ids)))
}

/// Writes a short human-readable summary of a dataset.
pub fn describe(dataset: &Dataset, mut out: impl Write) -> std::io::Result<()> {
    match &dataset.items {
        Items::Norms(r) => {
            let features: BTreeSet<&str> = r.iter().flat_map(|x| x.features.keys().map(String::as_str)).collect();
            let with_emb = r.iter().filter(|x| x.embedding.is_some()).count();
            writeln!(out, "kind: {}", dataset.kind)?;
            writeln!(out, "records: {}", r.len())?;
            writeln!(out, "features: {}", features.into_iter().collect::<Vec<_>>().join(", "))?;
            writeln!(out, "records with embedding: {with_emb}")
        }
        Items::Rt(s) => {
            writeln!(out, "kind: {}", dataset.kind)?;
            writeln!(out, "sentences: {}", s.len())?;
            writeln!(out, "tokens: {}", dataset.token_count())
        }
    }
}
