use ndarray::ArrayView1;

use crate::confset::BallCS;
use crate::dataset::Dataset;
use crate::error::{ensure_finite, Error, Result};
use crate::numkit::{normal_quantile, RngStream};
use crate::solvers::{lasso, select_lambda, LambdaRule, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};

/// The sample-splitting ball centered at the held-out lasso fit.
#[derive(Clone, Debug)]
pub struct AdaptiveSet {
    pub ball: BallCS,
    /// `||y - X beta_hat||^2 / n - sigma2`.
    pub r_n: f64,
    /// True when the boundary quadratic has no non-negative solution.
    pub empty: bool,
}

impl AdaptiveSet {
    pub fn contains(&self, mu: ArrayView1<f64>) -> Result<bool> {
        Ok(!self.empty && self.ball.contains(mu)?)
    }
}

/// Studentized loss statistic `(R_n - d) / tau(d)` at squared normalized distance `d`.
pub fn adaptive_statistic(r_n: f64, d: f64, sigma2: f64, n: usize) -> f64 {
    let nf = n as f64;
    let tau = (2.0 * sigma2 * sigma2 / nf + 4.0 * sigma2 * d / nf).sqrt();
    (r_n - d) / tau
}

/// Larger root of the boundary quadratic in `d`, or `None` when no `d >= 0` qualifies.
pub fn adaptive_radius_sq(r_n: f64, sigma2: f64, n: usize, z: f64) -> Option<f64> {
    let nf = n as f64;
    let shift = r_n + 2.0 * z * z * sigma2 / nf;
    let disc = shift * shift - r_n * r_n + 2.0 * z * z * sigma2 * sigma2 / nf;
    if disc < 0.0 {
        return None;
    }
    let root = shift + disc.sqrt();
    (root >= 0.0).then_some(root)
}

/// Ball around `X beta_hat` on the evaluation half, for a `beta_hat` fit on the other half.
pub fn adaptive_from_fit(eval: &Dataset, beta_hat: ArrayView1<f64>, alpha: f64) -> Result<AdaptiveSet> {
    if beta_hat.len() != eval.p() {
        return Err(Error::DimensionMismatch {
            expected: eval.p(),
            got: beta_hat.len(),
        });
    }
    ensure_finite(beta_hat.iter().copied(), "beta_hat")?;
    let n = eval.n();
    let center = eval.x.dot(&beta_hat);
    let resid = &eval.y - &center;
    let r_n = resid.dot(&resid) / n as f64 - eval.sigma2;
    let z = normal_quantile(1.0 - alpha)?;
    let (radius_sq, empty) = match adaptive_radius_sq(r_n, eval.sigma2, n, z) {
        Some(r2) => (r2, false),
        None => (0.0, true),
    };
    Ok(AdaptiveSet {
        ball: BallCS::new(center, radius_sq.sqrt())?,
        r_n,
        empty,
    })
}

/// Selects `lambda` on the fit half, fits the lasso there, and builds the ball on `eval`.
pub fn adaptive_cs(fit_half: &Dataset, eval: &Dataset, rule: LambdaRule, alpha: f64, rng: &mut RngStream) -> Result<AdaptiveSet> {
    let lambda = select_lambda(fit_half.x.view(), fit_half.y.view(), fit_half.sigma(), rule, rng)?;
    let fit = lasso(fit_half.x.view(), fit_half.y.view(), lambda, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
    adaptive_from_fit(eval, fit.coefficients.view(), alpha)
}
