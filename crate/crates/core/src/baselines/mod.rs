//! Interpretable baselines: design matrices from scalar features or
//! embeddings, evaluated by repeated random train/test splits.

pub mod features;
pub mod ols;
pub mod splits;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corpus::{token_key, Dataset, EmbeddingTable, Items, NormRecord, RtSentence};
use crate::error::{Error, NumericError, Result};
use features::{log_frequency, word_length, FrequencyTable, SurprisalTable};
pub use ols::{fit_ols, fit_with, r2_holdout, FitOptions, RegressionFit};
pub use splits::{evaluate_splits, SplitEvaluation};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    /// Split unit of each row; equal to the row id unless rows are grouped.
    pub group_ids: Vec<String>,
    pub columns: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Rows dropped upstream because a predictor was missing.
    pub dropped: usize,
}

impl FeatureMatrix {
    pub fn new(
        row_ids: Vec<String>,
        group_ids: Option<Vec<String>>,
        columns: Vec<String>,
        x: DMatrix<f64>,
        y: DVector<f64>,
    ) -> Result<Self, NumericError> {
        let group_ids = group_ids.unwrap_or_else(|| row_ids.clone());
        if x.nrows() != row_ids.len() || y.len() != row_ids.len() || group_ids.len() != row_ids.len() {
            return Err(NumericError::Shape(format!(
                "{} row ids, {} groups, {} matrix rows, {} targets",
                row_ids.len(),
                group_ids.len(),
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() != columns.len() {
            return Err(NumericError::Shape(format!(
                "{} column names for {} matrix columns",
                columns.len(),
                x.ncols()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(NumericError::InvalidInput(
                "feature matrix has non-finite entries".into(),
            ));
        }
        Ok(FeatureMatrix {
            row_ids,
            group_ids,
            columns,
            x,
            y,
            dropped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    fn from_rows(rows: Vec<(String, String, Vec<f64>, f64)>, columns: Vec<String>, dropped: usize) -> Result<Self> {
        let n = rows.len();
        let p = columns.len();
        let mut data = Vec::with_capacity(n * p);
        for r in &rows {
            data.extend_from_slice(&r.2);
        }
        let x = DMatrix::from_row_slice(n, p, &data);
        let y = DVector::from_iterator(n, rows.iter().map(|r| r.3));
        let (ids, groups) = rows.into_iter().map(|r| (r.0, r.1)).unzip();
        let mut fm = FeatureMatrix::new(ids, Some(groups), columns, x, y)?;
        fm.dropped = dropped;
        Ok(fm)
    }
}

/// Scalar features of norm records; records lacking any requested feature
/// are dropped and counted.
pub fn norm_feature_matrix(records: &[NormRecord], columns: &[String]) -> Result<FeatureMatrix> {
    let mut rows = Vec::new();
    let mut dropped = 0;
    for r in records {
        let vals: Option<Vec<f64>> = columns.iter().map(|c| r.features.get(c).copied()).collect();
        match vals {
            Some(v) => rows.push((r.id.clone(), r.id.clone(), v, r.score)),
            None => dropped += 1,
        }
    }
    FeatureMatrix::from_rows(rows, columns.to_vec(), dropped)
}

pub fn norm_embedding_matrix(records: &[NormRecord]) -> Result<FeatureMatrix> {
    let dim = records
        .iter()
        .find_map(|r| r.embedding.as_ref().map(Vec::len))
        .ok_or_else(|| Error::Data("no record carries an embedding".into()))?;
    let mut rows = Vec::new();
    let mut dropped = 0;
    for r in records {
        match &r.embedding {
            Some(e) => rows.push((r.id.clone(), r.id.clone(), e.clone(), r.score)),
            None => dropped += 1,
        }
    }
    FeatureMatrix::from_rows(rows, embedding_columns(dim), dropped)
}

fn embedding_columns(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("e{i}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RtFeature {
    Length,
    Frequency,
    Surprisal,
}

impl RtFeature {
    pub fn as_str(self) -> &'static str {
        match self {
            RtFeature::Length => "length",
            RtFeature::Frequency => "frequency",
            RtFeature::Surprisal => "surprisal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyTransform {
    Log10,
    Raw,
}

/// Lookup tables backing the reading-time predictors.
#[derive(Debug, Clone, Copy)]
pub struct RtSources<'a> {
    pub frequency: Option<&'a FrequencyTable>,
    pub surprisal: Option<&'a SurprisalTable>,
    pub frequency_transform: FrequencyTransform,
}

impl RtSources<'_> {
    pub fn available(&self) -> Vec<RtFeature> {
        let mut out = vec![RtFeature::Length];
        if self.frequency.is_some() {
            out.push(RtFeature::Frequency);
        }
        if self.surprisal.is_some() {
            out.push(RtFeature::Surprisal);
        }
        out
    }

    fn value(&self, f: RtFeature, sentence: &str, position: usize, surface: &str) -> Option<f64> {
        match f {
            RtFeature::Length => Some(word_length(surface) as f64),
            RtFeature::Frequency => self.frequency.map(|t| match self.frequency_transform {
                FrequencyTransform::Log10 => log_frequency(surface, t),
                FrequencyTransform::Raw => t.per_million(surface).unwrap_or(t.floor),
            }),
            RtFeature::Surprisal => self.surprisal.and_then(|t| t.get(sentence, position)),
        }
    }
}

/// One row per token (grouped by sentence for splitting), target = RT.
pub fn rt_feature_matrix(
    sentences: &[RtSentence],
    features: &[RtFeature],
    sources: &RtSources,
) -> Result<FeatureMatrix> {
    let mut rows = Vec::new();
    let mut dropped = 0;
    for s in sentences {
        for t in &s.tokens {
            let vals: Option<Vec<f64>> = features
                .iter()
                .map(|f| sources.value(*f, &s.id, t.position, &t.surface))
                .collect();
            match vals {
                Some(v) => rows.push((token_key(&s.id, t.position), s.id.clone(), v, t.rt_ms)),
                None => dropped += 1,
            }
        }
    }
    let columns = features.iter().map(|f| f.as_str().to_string()).collect();
    FeatureMatrix::from_rows(rows, columns, dropped)
}

pub fn rt_embedding_matrix(sentences: &[RtSentence], table: &EmbeddingTable) -> Result<FeatureMatrix> {
    let mut rows = Vec::new();
    let mut dropped = 0;
    for s in sentences {
        for t in &s.tokens {
            let key = token_key(&s.id, t.position);
            match table.vectors.get(&key) {
                Some(e) => rows.push((key, s.id.clone(), e.clone(), t.rt_ms)),
                None => dropped += 1,
            }
        }
    }
    FeatureMatrix::from_rows(rows, embedding_columns(table.dim), dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub n_splits: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            n_splits: 100,
            train_fraction: 0.75,
            seed: 0,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub predictor: String,
    pub columns: Vec<String>,
    pub rows: usize,
    pub dropped: usize,
    pub evaluation: Option<SplitEvaluation>,
    pub error: Option<String>,
}

/// Inputs for [`run_baselines`] beyond the dataset itself.
#[derive(Debug, Clone, Copy)]
pub struct BaselineInputs<'a> {
    pub rt: RtSources<'a>,
    /// Per-token vectors for RT datasets (norm records carry their own).
    pub rt_embeddings: Option<&'a EmbeddingTable>,
}

fn evaluate(predictor: &str, fm: Result<FeatureMatrix>, opts: &BaselineOptions) -> BaselineResult {
    match fm {
        Ok(fm) => {
            let ev = evaluate_splits(&fm, opts.n_splits, opts.train_fraction, opts.seed, opts.fit);
            BaselineResult {
                predictor: predictor.to_string(),
                columns: if predictor == "embedding" {
                    vec![format!("{} dimensions", fm.columns.len())]
                } else {
                    fm.columns.clone()
                },
                rows: fm.len(),
                dropped: fm.dropped,
                error: ev.as_ref().err().map(|e| e.to_string()),
                evaluation: ev.ok(),
            }
        }
        Err(e) => BaselineResult {
            predictor: predictor.to_string(),
            columns: Vec::new(),
            rows: 0,
            dropped: 0,
            evaluation: None,
            error: Some(e.to_string()),
        },
    }
}

/// Each scalar predictor alone, all scalar predictors combined (when there
/// is more than one), and the embedding regression when vectors exist.
/// Norm datasets use every feature column they carry.
pub fn run_baselines(dataset: &Dataset, inputs: &BaselineInputs, opts: &BaselineOptions) -> Vec<BaselineResult> {
    let mut out = Vec::new();
    match &dataset.items {
        Items::Norms(records) => {
            let names: Vec<String> = records
                .iter()
                .flat_map(|r| r.features.keys().cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for name in &names {
                out.push(evaluate(
                    name,
                    norm_feature_matrix(records, std::slice::from_ref(name)),
                    opts,
                ));
            }
            if names.len() > 1 {
                out.push(evaluate("combined_scalar", norm_feature_matrix(records, &names), opts));
            }
            if records.iter().any(|r| r.embedding.is_some()) {
                out.push(evaluate("embedding", norm_embedding_matrix(records), opts));
            }
        }
        Items::Rt(sentences) => {
            let feats = inputs.rt.available();
            for f in &feats {
                out.push(evaluate(
                    f.as_str(),
                    rt_feature_matrix(sentences, &[*f], &inputs.rt),
                    opts,
                ));
            }
            if feats.len() > 1 {
                out.push(evaluate(
                    "combined_scalar",
                    rt_feature_matrix(sentences, &feats, &inputs.rt),
                    opts,
                ));
            }
            if let Some(table) = inputs.rt_embeddings {
                out.push(evaluate("embedding", rt_embedding_matrix(sentences, table), opts));
            }
        }
    }
    out
}
