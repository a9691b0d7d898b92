//! Least squares with intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::NumericError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Numerical rank of the centered design matrix.
    pub rank: usize,
}

impl RegressionFit {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.coefficients.len()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, NumericError> {
        if x.ncols() != self.coefficients.len() {
            return Err(NumericError::Shape(format!(
                "fit has {} coefficients, matrix has {} columns",
                self.coefficients.len(),
                x.ncols()
            )));
        }
        let w = DVector::from_column_slice(&self.coefficients);
        Ok(x * w + DVector::from_element(x.nrows(), self.intercept))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    /// Fixed ridge penalty on the coefficients (never on the intercept).
    pub ridge: Option<f64>,
}

pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<RegressionFit, NumericError> {
    fit_with(x, y, FitOptions::default())
}

/// Centers the columns and the target, solves for the coefficients (minimum
/// norm when rank deficient) and recovers the intercept from the means.
pub fn fit_with(x: &DMatrix<f64>, y: &DVector<f64>, opts: FitOptions) -> Result<RegressionFit, NumericError> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(NumericError::Shape(format!("{n} rows but {} targets", y.len())));
    }
    if n < p + 1 {
        return Err(NumericError::TooFewRows {
            rows: n,
            columns: p,
            needed: p + 1,
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(NumericError::InvalidInput(
            "design matrix or target has non-finite values".into(),
        ));
    }
    let col_means: DVector<f64> = DVector::from_iterator(p, x.column_iter().map(|c| c.mean()));
    let y_mean = y.mean();
    if p == 0 {
        return Ok(RegressionFit {
            coefficients: Vec::new(),
            intercept: y_mean,
            rank: 0,
        });
    }
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-col_means[j]);
    }
    let yc = y.add_scalar(-y_mean);

    let (w, rank) = match opts.ridge {
        Some(lambda) if lambda > 0.0 => {
            let gram = xc.transpose() * &xc + DMatrix::<f64>::identity(p, p) * lambda;
            let rhs = xc.transpose() * &yc;
            let chol = gram
                .cholesky()
                .ok_or_else(|| NumericError::InvalidInput("ridge system is not positive definite".into()))?;
            (chol.solve(&rhs), p)
        }
        _ => min_norm_least_squares(&xc, &yc),
    };
    if rank < p {
        log::warn!("design matrix is rank deficient (rank {rank} of {p}); using the minimum-norm solution");
    }
    let intercept = y_mean - col_means.dot(&w);
    Ok(RegressionFit {
        coefficients: w.iter().copied().collect(),
        intercept,
        rank,
    })
}

/// Minimum-norm least squares through a complete orthogonal decomposition:
/// a column-pivoted QR reveals the rank `k`, and a QR of the transposed
/// leading `k` rows of R gives the minimum-norm solution of the reduced
/// system.
fn min_norm_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, usize) {
    let (n, p) = x.shape();
    let cp = x.clone().col_piv_qr();
    let r = cp.r();
    let mut perm = DMatrix::<f64>::identity(p, p);
    cp.p().permute_columns(&mut perm);
    let qty = cp.q().transpose() * y;

    let lead = r[(0, 0)].abs();
    let tol = (n.max(p) as f64) * f64::EPSILON * lead;
    let k = (0..r.nrows().min(p)).take_while(|&i| r[(i, i)].abs() > tol).count();
    if k == 0 {
        return (DVector::zeros(p), 0);
    }

    // R[..k, :]^T = Z T, so R[..k, :] z = c has minimum-norm solution Z T^-T c
    let top = r.rows(0, k).transpose();
    let qr = top.qr();
    let t = qr.r();
    let c = qty.rows(0, k).into_owned();
    let u = t
        .transpose()
        .solve_lower_triangular(&c)
        .expect("diagonal of T is nonzero for k independent rows");
    let z = qr.q() * u;
    (perm * z, k)
}

/// `1 - SS_res / SS_tot` on held-out data, with `SS_tot` centered on the
/// held-out mean. Negative when the fit is worse than that mean.
pub fn r2_holdout(fit: &RegressionFit, x_test: &DMatrix<f64>, y_test: &DVector<f64>) -> Result<f64, NumericError> {
    if x_test.nrows() != y_test.len() {
        return Err(NumericError::Shape(format!(
            "{} test rows but {} targets",
            x_test.nrows(),
            y_test.len()
        )));
    }
    let pred = fit.predict(x_test)?;
    r2_against(&pred, y_test)
}

pub(crate) fn r2_against(pred: &DVector<f64>, truth: &DVector<f64>) -> Result<f64, NumericError> {
    if truth.is_empty() || truth.iter().all(|v| *v == truth[0]) {
        return Err(NumericError::ConstantTarget);
    }
    let mean = truth.mean();
    let ss_tot: f64 = truth.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(pred.iter()).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
