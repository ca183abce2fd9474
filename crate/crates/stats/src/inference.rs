use serde::{Deserialize, Serialize};

use crate::dist::student_t_two_sided_p;
use crate::StatsError;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (`n - 1` denominator).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Pearson product-moment correlation with a two-sided p-value from
/// `t = r sqrt((n - 2) / (1 - r²))` on `n - 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationReport, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations { need: 3, got: n });
    }
    check_finite(x)?;
    check_finite(y)?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateInput("constant input has no correlation"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        student_t_two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(CorrelationReport { r, p_value, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleReport {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Welch's unequal-variance t-test of `mean(a) - mean(b)`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TwoSampleReport, StatsError> {
    for sample in [a, b] {
        if sample.len() < 2 {
            return Err(StatsError::TooFewObservations {
                need: 2,
                got: sample.len(),
            });
        }
        check_finite(sample)?;
    }
    let (va, vb) = (sample_variance(a), sample_variance(b));
    if va == 0.0 || vb == 0.0 {
        return Err(StatsError::DegenerateInput("a group has zero variance"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let (mean_a, mean_b) = (mean(a), mean(b));
    let t = (mean_a - mean_b) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TwoSampleReport {
        t,
        df,
        p_value: student_t_two_sided_p(t, df),
        mean_a,
        mean_b,
        n_a: a.len(),
        n_b: b.len(),
    })
}
