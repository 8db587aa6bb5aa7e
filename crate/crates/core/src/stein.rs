//! Stein shrinkage of the complement response, SURE, and the weak-signal radius.

use std::collections::HashMap;
use std::sync::Mutex;

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::ChiSquared;

use crate::error::{ensure_finite, Error, Result};
use crate::numkit::{upper_quantile, RngStream};

/// Smallest simulation size accepted by [`estimate_cs`].
pub const MIN_CS_SIMS: usize = 100;
/// Default simulation size for `c_s`.
pub const DEFAULT_CS_SIMS: usize = 100_000;

/// Whether the risk estimate is clipped at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SureMode {
    Truncated,
    Untruncated,
}

/// Result of shrinking `y_perp` toward zero.
#[derive(Clone, Debug)]
pub struct SteinFit {
    /// Shrinkage factor `df * sigma2 / ||y_perp||^2` (infinite when `y_perp = 0`).
    pub b: f64,
    /// Truncated SURE, `max(0, 1 - B)`.
    pub l_hat: f64,
    pub mu_perp_hat: Array1<f64>,
    pub df: usize,
}

impl SteinFit {
    /// Untruncated SURE `1 - B`; minus infinity in the degenerate zero-response case.
    pub fn sure_raw(&self) -> f64 {
        1.0 - self.b
    }

    pub fn sure(&self, mode: SureMode) -> f64 {
        match mode {
            SureMode::Truncated => self.l_hat,
            SureMode::Untruncated => self.sure_raw(),
        }
    }
}

pub fn stein_shrink(y_perp: ArrayView1<f64>, df: usize, sigma2: f64) -> Result<SteinFit> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!("sigma2 = {sigma2} must be positive")));
    }
    if df == 0 {
        return Err(Error::Domain("shrinkage needs at least one residual degree of freedom".into()));
    }
    ensure_finite(y_perp.iter().copied(), "y_perp")?;
    let norm2 = y_perp.dot(&y_perp);
    if norm2 == 0.0 {
        return Ok(SteinFit {
            b: f64::INFINITY,
            l_hat: 0.0,
            mu_perp_hat: Array1::zeros(y_perp.len()),
            df,
        });
    }
    let b = df as f64 * sigma2 / norm2;
    Ok(SteinFit {
        b,
        l_hat: (1.0 - b).max(0.0),
        mu_perp_hat: y_perp.mapv(|v| (1.0 - b) * v),
        df,
    })
}

/// Monte-Carlo constant `c_s(alpha)` bounding the SURE deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SureConstant {
    pub alpha: f64,
    pub value: f64,
    pub n: usize,
    pub n_sim: usize,
}

/// Deviation statistic `sqrt(n) |(1 - B)_+ - (1 - B)^2 W / n|` for one `W ~ chi2_n` draw.
pub fn sure_deviation(w: f64, n: usize) -> f64 {
    let nf = n as f64;
    let b = nf / w;
    let risk = (1.0 - b).max(0.0);
    let loss = (1.0 - b).powi(2) * w / nf;
    nf.sqrt() * (risk - loss).abs()
}

/// `c_s(alpha)` from an arbitrary source of `chi2_n` draws.
pub fn estimate_cs_with<F>(alpha: f64, n: usize, n_sim: usize, mut draw_w: F) -> Result<SureConstant>
where
    F: FnMut() -> f64,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("c_s needs n >= 2, got {n}")));
    }
    if n_sim < MIN_CS_SIMS {
        return Err(Error::Calibration(format!("n_sim = {n_sim} is below {MIN_CS_SIMS}")));
    }
    let mut stats: Vec<f64> = (0..n_sim).map(|_| sure_deviation(draw_w(), n)).collect();
    Ok(SureConstant {
        alpha,
        value: upper_quantile(&mut stats, alpha),
        n,
        n_sim,
    })
}

pub fn estimate_cs<R: Rng + ?Sized>(alpha: f64, n: usize, n_sim: usize, rng: &mut R) -> Result<SureConstant> {
    let chi = ChiSquared::new(n as f64).map_err(|e| Error::Domain(e.to_string()))?;
    estimate_cs_with(alpha, n, n_sim, || rng.sample(chi))
}

/// Stream used for the `c_s` draws of a given `(n, alpha)`.
pub fn cs_stream(master_seed: u64, n: usize, alpha: f64) -> RngStream {
    RngStream::new(master_seed, 0xC5 << 56).derive(n as u64).derive(alpha.to_bits())
}

/// Process-wide memo of `c_s` values keyed by `(n, alpha, n_sim, seed)`.
#[derive(Debug, Default)]
pub struct CsCache {
    entries: Mutex<HashMap<(usize, u64, usize, u64), SureConstant>>,
}

impl CsCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, alpha: f64, n: usize, n_sim: usize, master_seed: u64) -> Result<SureConstant> {
        let key = (n, alpha.to_bits(), n_sim, master_seed);
        if let Some(c) = self.entries.lock().expect("cs cache poisoned").get(&key) {
            return Ok(*c);
        }
        // computed outside the lock; a racing duplicate computes the same value
        let c = estimate_cs(alpha, n, n_sim, &mut cs_stream(master_seed, n, alpha))?;
        self.entries.lock().expect("cs cache poisoned").insert(key, c);
        Ok(c)
    }

    pub fn insert(&self, master_seed: u64, c: SureConstant) {
        self.entries
            .lock()
            .expect("cs cache poisoned")
            .insert((c.n, c.alpha.to_bits(), c.n_sim, master_seed), c);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cs cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Signed squared weak-signal radius `c2 (n-k)/n sigma2 (L + slack / sqrt(n-k))`.
pub fn radius_perp_sq(l: f64, n: usize, k: usize, sigma2: f64, c2: f64, slack: f64) -> Result<f64> {
    if k >= n {
        return Err(Error::Degenerate(format!("k = {k} leaves no complement in n = {n}")));
    }
    if !(c2 >= 1.0) {
        return Err(Error::Domain(format!("c2 = {c2} must be at least 1")));
    }
    let df = (n - k) as f64;
    let r2 = c2 * df / n as f64 * sigma2 * (l + slack / df.sqrt());
    // c2 may be infinite when the base radius is zero
    Ok(if r2.is_nan() { 0.0 } else { r2 })
}

pub fn radius_perp_single(fit: &SteinFit, n: usize, k: usize, sigma2: f64, c2: f64, cs: &SureConstant) -> Result<f64> {
    Ok(radius_perp_sq(fit.l_hat, n, k, sigma2, c2, cs.value)?.max(0.0).sqrt())
}

pub fn radius_perp_multi(
    fit: &SteinFit,
    n: usize,
    k: usize,
    sigma2: f64,
    c2: f64,
    cm: f64,
    m: usize,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("number of candidates must be at least 1".into()));
    }
    let slack = cm * (m as f64).powf(0.25);
    Ok(radius_perp_sq(fit.l_hat, n, k, sigma2, c2, slack)?.max(0.0).sqrt())
}
