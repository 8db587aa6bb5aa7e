//! Random streams, distribution utilities and projection primitives.

mod dist;
mod linalg;
mod rng;

pub use dist::{
    chi2_cdf, chi2_quantile, ln_gamma, mean_inverse_noncentral_chi2, normal_quantile, sample_noncentral_chi2,
    McEstimate,
};
pub use linalg::{cholesky, orthonormal_basis, spd_inverse, NestedBasis, OrthoBasis, RANK_TOL};
pub use rng::RngStream;

/// `(1 - alpha)` empirical quantile, using the order statistic at `ceil((1 - alpha) m)`.
pub fn upper_quantile(values: &mut [f64], alpha: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len();
    let idx = ((1.0 - alpha) * m as f64).ceil() as usize;
    values[idx.clamp(1, m) - 1]
}
