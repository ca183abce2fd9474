use serde::{Deserialize, Serialize};

use crate::dist::student_t_two_sided_p;
use crate::linalg::{back_substitute, householder_qr, inverse_gram_diagonal, Matrix};
use crate::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub residual_ss: f64,
    pub df_residual: usize,
    pub n: usize,
}

impl RegressionReport {
    pub fn estimates(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.std_error).collect()
    }
}

/// Ordinary least squares with classical (homoskedastic) standard errors.
///
/// `x` must already contain the intercept column. `names` labels the
/// columns; missing names default to `x0, x1, ...`.
pub fn ols_regress(x: &Matrix, y: &[f64], names: &[&str]) -> Result<RegressionReport, StatsError> {
    let (n, k) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(StatsError::LengthMismatch(n, y.len()));
    }
    if n <= k {
        return Err(StatsError::TooFewObservations { need: k + 1, got: n });
    }
    if y.iter().any(|v| !v.is_finite()) || (0..n).any(|r| x.row(r).iter().any(|v| !v.is_finite())) {
        return Err(StatsError::NonFinite);
    }

    let qr = householder_qr(x, y)?;
    let beta = back_substitute(&qr.r, &qr.qty);
    let df_residual = n - k;
    let sigma_sq = qr.residual_ss / df_residual as f64;
    let gram_diag = inverse_gram_diagonal(&qr.r);

    let coefficients = beta
        .iter()
        .zip(&gram_diag)
        .enumerate()
        .map(|(j, (&estimate, &g))| {
            let std_error = (sigma_sq * g).sqrt();
            let t_value = estimate / std_error;
            Coefficient {
                name: names.get(j).map_or_else(|| format!("x{j}"), |s| s.to_string()),
                estimate,
                std_error,
                t_value,
                p_value: student_t_two_sided_p(t_value, df_residual as f64),
            }
        })
        .collect();

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let total_ss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r_squared = 1.0 - qr.residual_ss / total_ss;
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / df_residual as f64;

    Ok(RegressionReport {
        coefficients,
        r_squared,
        adj_r_squared,
        residual_ss: qr.residual_ss,
        df_residual,
        n,
    })
}
