//! Gaussian random designs and sparse coefficient vectors.

use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::config::{BetaMode, SimConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numkit::{cholesky, spd_inverse, RngStream};

pub const TOEPLITZ_RHO: f64 = 0.5;
pub const EXPDECAY_RHO: f64 = 0.4;
pub const EQUICORR_RHO: f64 = 0.8;
pub const MIXED_WEAK_BOUND: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Toeplitz,
    Expdecay,
    Equicorr,
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Design::Toeplitz => "toeplitz",
            Design::Expdecay => "expdecay",
            Design::Equicorr => "equicorr",
        }
    }

    pub const ALL: [Design; 3] = [Design::Toeplitz, Design::Expdecay, Design::Equicorr];
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toeplitz" => Ok(Design::Toeplitz),
            "expdecay" | "exp_decay" => Ok(Design::Expdecay),
            "equicorr" | "equi_corr" => Ok(Design::Equicorr),
            other => Err(Error::Config(format!("unknown design '{other}'"))),
        }
    }
}

fn toeplitz(p: usize, rho: f64) -> Array2<f64> {
    Array2::from_shape_fn((p, p), |(i, j)| rho.powi((i as i32 - j as i32).abs()))
}

/// The population covariance of a design.
pub fn covariance(design: Design, p: usize) -> Result<Array2<f64>> {
    Ok(match design {
        Design::Toeplitz => toeplitz(p, TOEPLITZ_RHO),
        Design::Expdecay => spd_inverse(toeplitz(p, EXPDECAY_RHO).view())?,
        Design::Equicorr => Array2::from_shape_fn((p, p), |(i, j)| if i == j { 1.0 } else { EQUICORR_RHO }),
    })
}

/// Sampling factor `L` with `L L^T = Sigma`.
#[derive(Clone, Debug)]
pub enum CovFactor {
    Lower(Array2<f64>),
    /// `x = sqrt(rho) z 1 + sqrt(1 - rho) w`
    EquiCorr { p: usize, rho: f64 },
}

impl CovFactor {
    pub fn p(&self) -> usize {
        match self {
            CovFactor::Lower(l) => l.nrows(),
            CovFactor::EquiCorr { p, .. } => *p,
        }
    }

    /// `n` i.i.d. rows from `N_p(0, Sigma)`.
    pub fn sample_rows(&self, n: usize, rng: &mut RngStream) -> Array2<f64> {
        let p = self.p();
        match self {
            CovFactor::Lower(l) => {
                let z = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
                z.dot(&l.t())
            }
            CovFactor::EquiCorr { rho, .. } => {
                let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
                let mut x = Array2::zeros((n, p));
                for mut row in x.rows_mut() {
                    let common: f64 = rng.sample(StandardNormal);
                    for v in row.iter_mut() {
                        *v = a * common + b * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                x
            }
        }
    }
}

pub fn build_covariance(design: Design, p: usize) -> Result<CovFactor> {
    if p == 0 {
        return Err(Error::InvalidInput("p must be at least 1".into()));
    }
    Ok(match design {
        Design::Equicorr => CovFactor::EquiCorr { p, rho: EQUICORR_RHO },
        _ => CovFactor::Lower(cholesky(covariance(design, p)?.view())?),
    })
}

/// Rescale every column to squared norm `n`.
pub fn normalize_columns(x: &mut Array2<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.columns_mut() {
        let norm2 = col.dot(&col);
        if norm2 > 0.0 {
            col *= (n / norm2).sqrt();
        }
    }
}

/// Random `s`-sparse coefficient vector.
pub fn sample_beta(p: usize, s: usize, b: f64, mode: BetaMode, rng: &mut RngStream) -> Result<Array1<f64>> {
    if s > p {
        return Err(Error::Config(format!("sparsity {s} exceeds p = {p}")));
    }
    let mut beta = Array1::zeros(p);
    if s == 0 {
        return Ok(beta);
    }
    let strong = Uniform::new(-b, b).map_err(|e| Error::Config(e.to_string()))?;
    let weak = Uniform::new(-MIXED_WEAK_BOUND, MIXED_WEAK_BOUND).map_err(|e| Error::Config(e.to_string()))?;
    let n_strong = match mode {
        BetaMode::Uniform => s,
        BetaMode::Mixed => s.div_ceil(2),
    };
    let support = index::sample(rng, p, s).into_vec();
    for (i, j) in support.into_iter().enumerate() {
        let mut v = if i < n_strong { rng.sample(strong) } else { rng.sample(weak) };
        while v == 0.0 {
            v = if i < n_strong { rng.sample(strong) } else { rng.sample(weak) };
        }
        beta[j] = v;
    }
    Ok(beta)
}

/// Response `X beta + N(0, sigma2 I)`.
pub fn sample_response(x: &Array2<f64>, beta: &Array1<f64>, sigma2: f64, rng: &mut RngStream) -> Array1<f64> {
    let sigma = sigma2.sqrt();
    let mut y = x.dot(beta);
    for v in y.iter_mut() {
        *v += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    y
}

/// Draw `(evaluation half, fit half, beta)` for one replicate.
pub fn sample_dataset(config: &SimConfig, factor: &CovFactor, rng: &mut RngStream) -> Result<(Dataset, Dataset, Array1<f64>)> {
    if factor.p() != config.p {
        return Err(Error::DimensionMismatch {
            expected: config.p,
            got: factor.p(),
        });
    }
    let beta = sample_beta(config.p, config.s, config.b, config.beta_mode, rng)?;
    let mut x = factor.sample_rows(config.n, rng);
    normalize_columns(&mut x);
    let mut x_fit = factor.sample_rows(config.n, rng);
    normalize_columns(&mut x_fit);
    let y = sample_response(&x, &beta, config.sigma2, rng);
    let y_fit = sample_response(&x_fit, &beta, config.sigma2, rng);
    Ok((
        Dataset::new(x, y, config.sigma2)?,
        Dataset::new(x_fit, y_fit, config.sigma2)?,
        beta,
    ))
}
