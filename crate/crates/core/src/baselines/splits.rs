use std::collections::{BTreeSet, HashSet};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ols::{fit_with, r2_holdout, FitOptions};
use super::FeatureMatrix;
use crate::error::NumericError;
use crate::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEvaluation {
    pub r2_values: Vec<f64>,
    pub mean_r2: f64,
    /// Sample standard deviation (n - 1); zero for a single split.
    pub sd_r2: f64,
    pub n_splits: usize,
    pub train_fraction: f64,
}

impl SplitEvaluation {
    pub fn from_values(r2_values: Vec<f64>, train_fraction: f64) -> Self {
        let n = r2_values.len();
        let mean_r2 = r2_values.iter().sum::<f64>() / n as f64;
        let sd_r2 = if n > 1 {
            (r2_values.iter().map(|v| (v - mean_r2).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        SplitEvaluation {
            r2_values,
            mean_r2,
            sd_r2,
            n_splits: n,
            train_fraction,
        }
    }
}

fn gather(fm: &FeatureMatrix, rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(rows.len(), fm.x.ncols(), |i, j| fm.x[(rows[i], j)]);
    let y = DVector::from_fn(rows.len(), |i, _| fm.y[rows[i]]);
    (x, y)
}

/// Fits on a seeded train side and scores held-out R² on the rest, once per
/// split. Splits are drawn over the matrix's groups (one group per row for
/// norm data, one per sentence for RT data), and rows are visited in
/// row-id order, so the result does not depend on the matrix's row order.
pub fn evaluate_splits(
    fm: &FeatureMatrix,
    n_splits: usize,
    train_fraction: f64,
    seed: u64,
    opts: FitOptions,
) -> Result<SplitEvaluation, NumericError> {
    if n_splits == 0 {
        return Err(NumericError::InvalidInput("need at least one split".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(NumericError::InvalidInput(format!(
            "train fraction {train_fraction} must lie in (0,1)"
        )));
    }
    let groups: Vec<String> = fm
        .group_ids
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_train_groups = seeded::floor_fraction(train_fraction, groups.len());
    if n_train_groups == 0 || n_train_groups == groups.len() {
        return Err(NumericError::TooFewRows {
            rows: fm.len(),
            columns: fm.columns.len(),
            needed: fm.columns.len() + 1,
        });
    }
    let mut rows: Vec<usize> = (0..fm.len()).collect();
    rows.sort_by(|&a, &b| fm.row_ids[a].cmp(&fm.row_ids[b]));

    let seeds = seeded::derive_seeds(seed, n_splits);
    let values: Vec<Result<f64, NumericError>> = seeds
        .par_iter()
        .map(|&s| {
            let order = seeded::seeded_order(&groups, s);
            let train: HashSet<&str> = order[..n_train_groups].iter().map(String::as_str).collect();
            let (tr, te): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| train.contains(fm.group_ids[i].as_str()));
            let (xtr, ytr) = gather(fm, &tr);
            let (xte, yte) = gather(fm, &te);
            let fit = fit_with(&xtr, &ytr, opts)?;
            r2_holdout(&fit, &xte, &yte)
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>, _>>()?;
    Ok(SplitEvaluation::from_values(values, train_fraction))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize, f: impl Fn(usize) -> (f64, f64)) -> FeatureMatrix {
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n).map(f).unzip();
        FeatureMatrix::new(
            (0..n).map(|i| format!("r{i:05}")).collect(),
            None,
            vec!["x".into()],
            DMatrix::from_column_slice(n, 1, &xs),
            DVector::from_vec(ys),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_data_scores_one_everywhere() {
        let fm = matrix(40, |i| (i as f64, 3.0 * i as f64 - 1.0));
        let ev = evaluate_splits(&fm, 100, 0.75, 7, FitOptions::default()).unwrap();
        assert_eq!(ev.n_splits, 100);
        assert!(ev.r2_values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn deterministic_given_seed() {
        let fm = matrix(60, |i| (i as f64, ((i * 37) % 11) as f64));
        let a = evaluate_splits(&fm, 20, 0.75, 3, FitOptions::default()).unwrap();
        let b = evaluate_splits(&fm, 20, 0.75, 3, FitOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = evaluate_splits(&fm, 20, 0.75, 4, FitOptions::default()).unwrap();
        assert_ne!(a.r2_values, c.r2_values);
    }

    #[test]
    fn summary_statistics() {
        let ev = SplitEvaluation::from_values(vec![0.1, 0.2, 0.3], 0.75);
        assert!((ev.mean_r2 - 0.2).abs() < 1e-15);
        assert!((ev.sd_r2 - 0.1).abs() < 1e-12);
    }
}
