use std::collections::HashMap;
use std::sync::Mutex;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::upper_quantile;
use crate::solvers::{CdProblem, Penalty, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};

/// Smallest simulation size accepted by the lasso calibrations.
pub const MIN_CALIB_SIMS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstantKind {
    #[serde(rename = "c_l")]
    Cl,
    #[serde(rename = "c_o")]
    Co,
}

impl ConstantKind {
    pub fn name(self) -> &'static str {
        match self {
            ConstantKind::Cl => "c_l",
            ConstantKind::Co => "c_o",
        }
    }
}

/// Whether `lambda_sim` in the c_l / c_o calibration scales with sigma^2 or sigma.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSimScale {
    Sigma2,
    Sigma,
}

/// `nu * K * sigma^2 * sqrt(ln p / n)` (or with `sigma` in place of `sigma^2`).
pub fn lambda_sim(nu: f64, k_const: f64, sigma2: f64, p: usize, n: usize, scale: LambdaSimScale) -> f64 {
    let s = match scale {
        LambdaSimScale::Sigma2 => sigma2,
        LambdaSimScale::Sigma => sigma2.sqrt(),
    };
    nu * k_const * s * ((p as f64).ln() / n as f64).sqrt()
}

/// A simulated lasso prediction-error quantile together with its context.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibratedConstant {
    pub kind: ConstantKind,
    pub alpha: f64,
    pub value: f64,
    pub n_sim: usize,
    pub digest: u64,
    pub lambda: f64,
    pub sparsity: usize,
}

/// FNV-1a digest of a matrix's shape and entry bits.
pub fn design_digest(x: ArrayView2<f64>) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(x.nrows() as u64);
    eat(x.ncols() as u64);
    for v in x.iter() {
        eat(v.to_bits());
    }
    h
}

/// `max_i |X_i^T y| / ||X_i||^2`, a rough bound on `||beta||_inf` from the held-out half.
pub fn response_bound(x_prime: ArrayView2<f64>, y_prime: ArrayView1<f64>) -> Result<f64> {
    if x_prime.nrows() != y_prime.len() {
        return Err(Error::DimensionMismatch {
            expected: x_prime.nrows(),
            got: y_prime.len(),
        });
    }
    let b = x_prime
        .columns()
        .into_iter()
        .filter_map(|c| {
            let sq = c.dot(&c);
            (sq > 0.0).then(|| c.dot(&y_prime).abs() / sq)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Calibration(format!("coefficient bound b = {b} must be positive")));
    }
    Ok(b)
}

/// Draws of `||X (gamma_hat - gamma)||^2 / (sigma2 * sparsity * ln p)` for random
/// `sparsity`-sparse `gamma` with entries `U(-b, b)`.
#[allow(clippy::too_many_arguments)]
pub fn lasso_error_draws<R: Rng + ?Sized>(
    x: ArrayView2<f64>,
    lambda: f64,
    sparsity: usize,
    b: f64,
    sigma2: f64,
    n_sim: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    draws_with_noise(x, lambda, sparsity, b, sigma2, 1.0, n_sim, rng)
}

// `noise_scale` multiplies the simulated noise only, leaving the normalization alone
#[allow(clippy::too_many_arguments)]
fn draws_with_noise<R: Rng + ?Sized>(
    x: ArrayView2<f64>,
    lambda: f64,
    sparsity: usize,
    b: f64,
    sigma2: f64,
    noise_scale: f64,
    n_sim: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (n, p) = x.dim();
    if n_sim < MIN_CALIB_SIMS {
        return Err(Error::Calibration(format!("n_sim = {n_sim} is below {MIN_CALIB_SIMS}")));
    }
    if sparsity == 0 || sparsity > p {
        return Err(Error::Degenerate(format!("sparsity {sparsity} outside 1..={p}")));
    }
    if p < 2 {
        return Err(Error::Degenerate("need at least two columns (ln p > 0)".into()));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Calibration(format!("coefficient bound b = {b} must be positive")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 = {sigma2} must be positive")));
    }
    let sigma = noise_scale * sigma2.sqrt();
    let denom = sigma2 * sparsity as f64 * (p as f64).ln();
    let mut problem = CdProblem::new(x, Array1::zeros(n).view())?;
    let mut out = Vec::with_capacity(n_sim);
    for _ in 0..n_sim {
        let mut gamma = Array1::zeros(p);
        for j in sample(rng, p, sparsity) {
            gamma[j] = rng.random_range(-b..b);
        }
        let mean = problem.predict(gamma.view());
        let y = mean.mapv(|m| m + sigma * rng.sample::<f64, _>(StandardNormal));
        problem.set_response(y.view())?;
        let fit = problem.solve(Penalty::Lasso { lambda }, None, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
        let err = &problem.predict(fit.coefficients.view()) - &mean;
        out.push(err.dot(&err) / denom);
    }
    Ok(out)
}

fn constant_from_draws(kind: ConstantKind, mut draws: Vec<f64>, alpha: f64, x: ArrayView2<f64>, lambda: f64, sparsity: usize) -> Result<CalibratedConstant> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let n_sim = draws.len();
    Ok(CalibratedConstant {
        kind,
        alpha,
        value: upper_quantile(&mut draws, alpha),
        n_sim,
        digest: design_digest(x),
        lambda,
        sparsity,
    })
}

/// `c_o(alpha)` for the oracle lasso ball at penalty `lambda`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_c_o<R: Rng + ?Sized>(
    x: ArrayView2<f64>,
    lambda: f64,
    s_beta: usize,
    alpha: f64,
    b: f64,
    sigma2: f64,
    n_sim: usize,
    rng: &mut R,
) -> Result<CalibratedConstant> {
    let draws = lasso_error_draws(x, lambda, s_beta, b, sigma2, n_sim, rng)?;
    constant_from_draws(ConstantKind::Co, draws, alpha, x, lambda, s_beta)
}

/// `c_l(alpha)` for the second step of the two-step lasso.
///
/// `x_step2` is the projected design of the columns outside the candidate;
/// the bound `b` comes from `(x_prime, y_prime)` only.
#[allow(clippy::too_many_arguments)]
pub fn estimate_cl<R: Rng + ?Sized>(
    x_step2: ArrayView2<f64>,
    x_prime: ArrayView2<f64>,
    y_prime: ArrayView1<f64>,
    sparsity: usize,
    lambda_sim: f64,
    alpha: f64,
    sigma2: f64,
    n_sim: usize,
    rng: &mut R,
) -> Result<CalibratedConstant> {
    let b = response_bound(x_prime, y_prime)?;
    let draws = lasso_error_draws(x_step2, lambda_sim, sparsity, b, sigma2, n_sim, rng)?;
    constant_from_draws(ConstantKind::Cl, draws, alpha, x_step2, lambda_sim, sparsity)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    kind: ConstantKind,
    digest: u64,
    sparsity: usize,
    columns: usize,
    alpha: u64,
}

/// Synchronized memo of calibrated constants keyed by `(kind, digest, sparsity, columns, alpha)`.
#[derive(Debug, Default)]
pub struct ConstantCache {
    entries: Mutex<HashMap<CacheKey, CalibratedConstant>>,
}

impl ConstantCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_try_insert<F>(&self, kind: ConstantKind, digest: u64, sparsity: usize, columns: usize, alpha: f64, make: F) -> Result<CalibratedConstant>
    where
        F: FnOnce() -> Result<CalibratedConstant>,
    {
        let key = CacheKey {
            kind,
            digest,
            sparsity,
            columns,
            alpha: alpha.to_bits(),
        };
        if let Some(c) = self.entries.lock().expect("constant cache poisoned").get(&key) {
            return Ok(*c);
        }
        let c = make()?;
        self.entries.lock().expect("constant cache poisoned").entry(key).or_insert(c);
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("constant cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;
    use ndarray::{array, Array2};

    fn orthogonal(n: usize, p: usize) -> Array2<f64> {
        let scale = (n as f64).sqrt();
        Array2::from_shape_fn((n, p), |(i, j)| if i == j { scale } else { 0.0 })
    }

    #[test]
    fn noiseless_limit_drives_constant_to_zero() {
        let x = orthogonal(30, 20);
        let mut rng = RngStream::new(5, 1);
        let draws = draws_with_noise(x.view(), 1e-9, 3, 1.0, 1.0, 0.0, 200, &mut rng).unwrap();
        let c = constant_from_draws(ConstantKind::Co, draws, 0.05, x.view(), 1e-9, 3).unwrap();
        assert!(c.value < 1e-12, "{}", c.value);
    }

    #[test]
    fn quantile_monotone_in_alpha() {
        let x = orthogonal(40, 30);
        let mut rng = RngStream::new(6, 1);
        let draws = lasso_error_draws(x.view(), 0.2, 4, 2.0, 1.0, 300, &mut rng).unwrap();
        let at = |a| constant_from_draws(ConstantKind::Cl, draws.clone(), a, x.view(), 0.2, 4).unwrap().value;
        assert!(at(0.025) >= at(0.05));
        assert!(at(0.05) >= at(0.5));
    }

    #[test]
    fn calibration_errors() {
        let x = orthogonal(10, 5);
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(
            lasso_error_draws(x.view(), 0.1, 2, 1.0, 1.0, 99, &mut rng),
            Err(Error::Calibration(_))
        ));
        assert!(response_bound(x.view(), Array1::zeros(10).view()).is_err());
        let mut y = Array1::zeros(10);
        y[1] = 2.0;
        let b = response_bound(x.view(), y.view()).unwrap();
        assert!((b - 2.0 / 10f64.sqrt()).abs() < 1e-12);
        let b = response_bound(x.view(), (-&y).view()).unwrap();
        assert!((b - 2.0 / 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn digest_sensitive_to_entries() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let mut b = a.clone();
        assert_eq!(design_digest(a.view()), design_digest(b.view()));
        b[[1, 1]] = 4.0000001;
        assert_ne!(design_digest(a.view()), design_digest(b.view()));
    }

    #[test]
    fn cache_calls_maker_once() {
        let cache = ConstantCache::new();
        let mut calls = 0;
        for _ in 0..3 {
            cache
                .get_or_try_insert(ConstantKind::Cl, 7, 3, 10, 0.025, || {
                    calls += 1;
                    Ok(CalibratedConstant {
                        kind: ConstantKind::Cl,
                        alpha: 0.025,
                        value: 1.0,
                        n_sim: 100,
                        digest: 7,
                        lambda: 0.1,
                        sparsity: 3,
                    })
                })
                .unwrap();
        }
        assert_eq!(calls, 1);
        assert_eq!(cache.len(), 1);
    }
}
