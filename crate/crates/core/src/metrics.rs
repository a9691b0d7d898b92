//! Correlation, R² and per-position curves over prediction/truth pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::align::AlignedPrediction;
use crate::corpus::{token_key, RtSentence};
use crate::error::NumericError;

/// Prediction/truth pairs with the count of pairs excluded for lack of a
/// prediction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PairedSeries {
    pub ids: Vec<String>,
    pub predicted: Vec<f64>,
    pub truth: Vec<f64>,
    pub excluded: usize,
}

impl PairedSeries {
    pub fn new(ids: Vec<String>, predicted: Vec<f64>, truth: Vec<f64>) -> Result<Self, NumericError> {
        if ids.len() != predicted.len() || predicted.len() != truth.len() {
            return Err(NumericError::Shape(format!(
                "{} ids, {} predictions, {} truths",
                ids.len(),
                predicted.len(),
                truth.len()
            )));
        }
        Ok(PairedSeries {
            ids,
            predicted,
            truth,
            excluded: 0,
        })
    }

    /// Keeps the pairs whose prediction is present and counts the rest.
    pub fn from_optional<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, Option<f64>, f64)>,
        S: Into<String>,
    {
        let mut s = PairedSeries::default();
        for (id, p, t) in pairs {
            match p {
                Some(p) => {
                    s.ids.push(id.into());
                    s.predicted.push(p);
                    s.truth.push(t);
                }
                None => s.excluded += 1,
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    pub fn total(&self) -> usize {
        self.len() + self.excluded
    }

    pub fn exclusion_rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.excluded as f64 / self.total() as f64
        }
    }

    pub fn extend(&mut self, other: PairedSeries) {
        self.ids.extend(other.ids);
        self.predicted.extend(other.predicted);
        self.truth.extend(other.truth);
        self.excluded += other.excluded;
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson correlation. Constant input is an error, never 0.
pub fn pearson(s: &PairedSeries) -> Result<f64, NumericError> {
    if s.len() < 2 {
        return Err(NumericError::TooFewPairs(s.len()));
    }
    let (mx, my) = (mean(&s.predicted), mean(&s.truth));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in s.predicted.iter().zip(&s.truth) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(NumericError::ZeroVariance("predicted"));
    }
    if syy == 0.0 {
        return Err(NumericError::ZeroVariance("truth"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum R2Mode {
    /// Square of the Pearson correlation; blind to the predictions' scale.
    #[default]
    SquaredPearson,
    /// `1 - SS_res / SS_tot` of the raw predictions against the truth mean.
    Agreement,
}

pub fn r2_of_predictions(s: &PairedSeries, mode: R2Mode) -> Result<f64, NumericError> {
    match mode {
        R2Mode::SquaredPearson => pearson(s).map(|r| r * r),
        R2Mode::Agreement => {
            if s.len() < 2 {
                return Err(NumericError::TooFewPairs(s.len()));
            }
            let m = mean(&s.truth);
            let ss_tot: f64 = s.truth.iter().map(|t| (t - m).powi(2)).sum();
            if ss_tot == 0.0 {
                return Err(NumericError::ZeroVariance("truth"));
            }
            let ss_res: f64 = s.predicted.iter().zip(&s.truth).map(|(p, t)| (t - p).powi(2)).sum();
            Ok(1.0 - ss_res / ss_tot)
        }
    }
}

/// Every metric of a series; undefined values are `None` with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub excluded: usize,
    pub exclusion_rate: f64,
    pub pearson: Option<f64>,
    pub r2_squared_pearson: Option<f64>,
    pub r2_agreement: Option<f64>,
    pub undefined_reason: Option<String>,
}

pub fn summarize(s: &PairedSeries) -> MetricSummary {
    let r = pearson(s);
    let agreement = r2_of_predictions(s, R2Mode::Agreement);
    MetricSummary {
        n: s.len(),
        excluded: s.excluded,
        exclusion_rate: s.exclusion_rate(),
        pearson: r.as_ref().ok().copied(),
        r2_squared_pearson: r.as_ref().ok().map(|r| r * r),
        r2_agreement: agreement.ok(),
        undefined_reason: r.err().map(|e| e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionEntry {
    pub position: usize,
    pub n: usize,
    /// `None` when undefined at this position (e.g. constant predictions).
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PositionCurve {
    pub entries: Vec<PositionEntry>,
}

/// Groups `(position, prediction, truth)` triples by position and scores
/// every position holding at least `min_n` pairs, in increasing order.
pub fn position_curve(
    triples: impl IntoIterator<Item = (usize, Option<f64>, f64)>,
    min_n: usize,
    mode: R2Mode,
) -> PositionCurve {
    let mut groups: BTreeMap<usize, PairedSeries> = BTreeMap::new();
    for (pos, p, t) in triples {
        let g = groups.entry(pos).or_default();
        match p {
            Some(p) => {
                g.ids.push(pos.to_string());
                g.predicted.push(p);
                g.truth.push(t);
            }
            None => g.excluded += 1,
        }
    }
    PositionCurve {
        entries: groups
            .into_iter()
            .filter(|(_, g)| g.len() >= min_n.max(1))
            .map(|(position, g)| PositionEntry {
                position,
                n: g.len(),
                r2: r2_of_predictions(&g, mode).ok(),
            })
            .collect(),
    }
}

/// Joins aligned predictions to their sentences by id; sentences without a
/// prediction contribute only exclusions.
pub fn aligned_triples<'a>(
    preds: &'a [AlignedPrediction],
    sentences: &'a [RtSentence],
) -> impl Iterator<Item = (String, usize, Option<f64>, f64)> + 'a {
    let by_id: BTreeMap<&str, &AlignedPrediction> = preds.iter().map(|p| (p.sentence_id.as_str(), p)).collect();
    sentences.iter().flat_map(move |s| {
        let p = by_id.get(s.id.as_str()).copied();
        s.tokens.iter().enumerate().map(move |(i, t)| {
            let v = p.and_then(|p| p.values.get(i).copied().flatten());
            (token_key(&s.id, t.position), t.position, v, t.rt_ms)
        })
    })
}

/// Corpus-level series over every token of `sentences` (no per-sentence
/// averaging).
pub fn rt_series(preds: &[AlignedPrediction], sentences: &[RtSentence]) -> PairedSeries {
    PairedSeries::from_optional(aligned_triples(preds, sentences).map(|(id, _, p, t)| (id, p, t)))
}

pub fn rt_position_curve(
    preds: &[AlignedPrediction],
    sentences: &[RtSentence],
    min_n: usize,
    mode: R2Mode,
) -> PositionCurve {
    position_curve(
        aligned_triples(preds, sentences).map(|(_, pos, p, t)| (pos, p, t)),
        min_n,
        mode,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(p: &[f64], t: &[f64]) -> PairedSeries {
        PairedSeries::new((0..p.len()).map(|i| i.to_string()).collect(), p.to_vec(), t.to_vec()).unwrap()
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&series(&x, &x)).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&series(&neg, &x)).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&series(&x, &[2.0, 1.0, 4.0, 3.0])).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_an_error() {
        let s = series(&[0.5, 0.5, 0.5], &[0.1, 0.2, 0.3]);
        assert_eq!(pearson(&s), Err(NumericError::ZeroVariance("predicted")));
        assert!(summarize(&s).r2_squared_pearson.is_none());
    }

    #[test]
    fn r2_modes() {
        let t = [0.2, 0.4, 0.5, 0.9];
        let same = series(&t, &t);
        assert_eq!(r2_of_predictions(&same, R2Mode::SquaredPearson).unwrap(), 1.0);
        assert_eq!(r2_of_predictions(&same, R2Mode::Agreement).unwrap(), 1.0);
        let doubled: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
        let d = series(&doubled, &t);
        assert!((r2_of_predictions(&d, R2Mode::SquaredPearson).unwrap() - 1.0).abs() < 1e-12);
        assert!(r2_of_predictions(&d, R2Mode::Agreement).unwrap() < 1.0);
        let six = series(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]);
        assert!((r2_of_predictions(&six, R2Mode::SquaredPearson).unwrap() - 0.36).abs() < 1e-12);
    }

    #[test]
    fn exclusions_counted() {
        let s = PairedSeries::from_optional([("a", Some(1.0), 1.0), ("b", None, 2.0), ("c", Some(3.0), 3.0)]);
        assert_eq!(s.len(), 2);
        assert_eq!(s.excluded, 1);
        assert!((s.exclusion_rate() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn curve_filters_small_groups() {
        let triples: Vec<(usize, Option<f64>, f64)> = (0..30)
            .flat_map(|i| {
                let t = (i % 7) as f64;
                let mut v = vec![(0, Some(t), t), (1, Some(t), t)];
                if i < 10 {
                    v.push((2, Some(t), t));
                }
                v
            })
            .collect();
        let c = position_curve(triples.clone(), 20, R2Mode::SquaredPearson);
        assert_eq!(c.entries.iter().map(|e| e.position).collect::<Vec<_>>(), [0, 1]);
        assert!(c.entries.iter().all(|e| e.r2 == Some(1.0)));
        assert!(position_curve(triples, 100, R2Mode::SquaredPearson).entries.is_empty());
    }
}
