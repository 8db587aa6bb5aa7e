//! Penalized least squares (lasso, MCP) by coordinate descent, and tuning rules.

mod cd;
mod tuning;

use ndarray::ArrayView1;

pub use cd::{
    lasso, lasso_kkt_violation, mcp, soft_threshold, CdProblem, PenalizedFit, Penalty, DEFAULT_MAX_SWEEPS, DEFAULT_TOL,
};
pub use tuning::{
    cross_validate, lambda_grid, select_lambda, theoretical_lambda, CvCurve, LambdaKind, LambdaRule, CV_GRID_RATIO,
    CV_GRID_SIZE, CV_MAX_DEV_RATIO, CV_MIN_DEV_CHANGE, CV_PATH_TOL, DEFAULT_FOLDS,
};

/// `{j : |b_j| > tau}`; `tau = 0` gives the support.
pub fn threshold_support(coefficients: ArrayView1<f64>, tau: f64) -> Vec<usize> {
    coefficients
        .iter()
        .enumerate()
        .filter(|(_, &b)| b.abs() > tau)
        .map(|(j, _)| j)
        .collect()
}
