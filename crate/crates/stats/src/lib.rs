//! Statistics used to judge whether peer ratings track ground truth:
//! Pearson correlation, classical OLS with standard errors, Welch's
//! two-sample t-test and fixed-bin histograms. All p-values are two-sided.

mod dist;
mod histogram;
mod inference;
mod linalg;
mod ols;

pub use dist::{ln_gamma, regularized_incomplete_beta, student_t_cdf, student_t_two_sided_p};
pub use histogram::Histogram;
pub use inference::{mean, pearson, sample_variance, welch_t, CorrelationReport, TwoSampleReport};
pub use linalg::Matrix;
pub use ols::{ols_regress, Coefficient, RegressionReport};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("design matrix is rank deficient")]
    SingularDesign,
    #[error("non-finite value in input")]
    NonFinite,
}
