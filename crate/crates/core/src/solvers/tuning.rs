use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::cd::{CdProblem, Penalty, DEFAULT_MAX_SWEEPS};
use crate::error::{Error, Result};
use crate::numkit::RngStream;

pub const CV_GRID_SIZE: usize = 100;
pub const CV_GRID_RATIO: f64 = 1e-3;
/// Coefficient tolerance used along CV paths.
pub const CV_PATH_TOL: f64 = 1e-3;
/// A fold's path stops once training deviance explained reaches this ratio.
pub const CV_MAX_DEV_RATIO: f64 = 0.999;
/// A fold path also stops once the explained fraction of deviance grows by less than this (relative).
pub const CV_MIN_DEV_CHANGE: f64 = 1e-5;
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaKind {
    Theoretical,
    CvMin,
    #[serde(rename = "cv_1se")]
    Cv1se,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LambdaRule {
    pub kind: LambdaKind,
    pub folds: usize,
}

impl LambdaRule {
    pub fn theoretical() -> Self {
        Self {
            kind: LambdaKind::Theoretical,
            folds: DEFAULT_FOLDS,
        }
    }

    pub fn cv_min(folds: usize) -> Self {
        Self {
            kind: LambdaKind::CvMin,
            folds,
        }
    }

    pub fn cv_1se(folds: usize) -> Self {
        Self {
            kind: LambdaKind::Cv1se,
            folds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != LambdaKind::Theoretical && self.folds < 2 {
            return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {}", self.folds)));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LambdaKind::Theoretical => "val",
            LambdaKind::CvMin => "cv",
            LambdaKind::Cv1se => "1se",
        }
    }
}

impl std::str::FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "val" | "theoretical" => Ok(Self::theoretical()),
            "cv" | "cv_min" => Ok(Self::cv_min(DEFAULT_FOLDS)),
            "1se" | "cv_1se" => Ok(Self::cv_1se(DEFAULT_FOLDS)),
            other => Err(Error::Config(format!("unknown lambda rule '{other}' (expected val, cv or 1se)"))),
        }
    }
}

/// `2 sqrt(2) sigma sqrt(ln p / n)`.
pub fn theoretical_lambda(sigma: f64, n: usize, p: usize) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * sigma * ((p as f64).ln() / n as f64).sqrt()
}

/// Cross-validated prediction error along a decreasing lambda grid.
#[derive(Clone, Debug)]
pub struct CvCurve {
    pub lambdas: Vec<f64>,
    pub mean_error: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl CvCurve {
    pub fn argmin(&self) -> usize {
        self.mean_error
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &e)| if e < best.1 { (i, e) } else { best })
            .0
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambdas[self.argmin()]
    }

    /// Largest grid lambda whose error is within one standard error of the minimum.
    pub fn lambda_1se(&self) -> f64 {
        let i = self.argmin();
        let bound = self.mean_error[i] + self.std_error[i];
        self.lambdas
            .iter()
            .zip(&self.mean_error)
            .filter(|(_, &e)| e <= bound)
            .map(|(&l, _)| l)
            .fold(self.lambdas[i], f64::max)
    }
}

pub fn lambda_grid(lambda_max: f64, size: usize, ratio: f64) -> Vec<f64> {
    if size == 1 {
        return vec![lambda_max];
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * ratio).ln());
    (0..size)
        .map(|i| (hi + (lo - hi) * i as f64 / (size - 1) as f64).exp())
        .collect()
}

/// K-fold cross-validation of the lasso over `lambdas` (decreasing), with fold
/// assignment drawn from `rng`.
pub fn cross_validate(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambdas: &[f64],
    folds: usize,
    rng: &mut RngStream,
) -> Result<CvCurve> {
    let n = x.nrows();
    if folds < 2 || n < folds {
        return Err(Error::Calibration(format!("cannot run {folds}-fold CV with n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    let mut errors = Vec::with_capacity(folds);
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let xt = x.select(Axis(0), &train);
        let yt = y.select(Axis(0), &train);
        let xv = x.select(Axis(0), &test);
        let yv = y.select(Axis(0), &test);
        let problem = CdProblem::new(xt.view(), yt.view())?;
        let null_dev = yt.dot(&yt);
        let mut fold_errors = Vec::with_capacity(lambdas.len());
        let mut warm: Option<Array1<f64>> = None;
        let mut last_ratio = 0.0;
        for &lambda in lambdas {
            let fit = problem.solve(Penalty::Lasso { lambda }, warm.as_ref().map(|w| w.view()), CV_PATH_TOL, DEFAULT_MAX_SWEEPS)?;
            let resid = &yv - &xv.dot(&fit.coefficients);
            fold_errors.push(resid.dot(&resid) / test.len() as f64);
            let train_resid = &yt - &problem.predict(fit.coefficients.view());
            let ratio = 1.0 - train_resid.dot(&train_resid) / null_dev;
            let saturated = ratio >= CV_MAX_DEV_RATIO || (last_ratio > 0.0 && ratio - last_ratio < CV_MIN_DEV_CHANGE * ratio);
            last_ratio = ratio;
            warm = Some(fit.coefficients);
            if saturated {
                break;
            }
        }
        errors.push(fold_errors);
    }

    // Folds that saturate early shorten the curve for every fold.
    let len = errors.iter().map(Vec::len).min().unwrap_or(0);
    let lambdas = &lambdas[..len];
    let k = folds as f64;
    let mut mean_error = Vec::with_capacity(len);
    let mut std_error = Vec::with_capacity(len);
    for l in 0..len {
        let m = errors.iter().map(|e| e[l]).sum::<f64>() / k;
        let var = errors.iter().map(|e| (e[l] - m).powi(2)).sum::<f64>() / (k - 1.0);
        mean_error.push(m);
        std_error.push((var / k).sqrt());
    }
    Ok(CvCurve {
        lambdas: lambdas.to_vec(),
        mean_error,
        std_error,
    })
}

/// Tuning parameter for the lasso on `(x, y)` under `rule`.
pub fn select_lambda(x: ArrayView2<f64>, y: ArrayView1<f64>, sigma: f64, rule: LambdaRule, rng: &mut RngStream) -> Result<f64> {
    rule.validate()?;
    let (n, p) = x.dim();
    if rule.kind == LambdaKind::Theoretical {
        return Ok(theoretical_lambda(sigma, n, p));
    }
    let mean = y.sum() / n as f64;
    if y.iter().all(|&v| (v - mean).abs() == 0.0) {
        return Err(Error::Calibration("response has zero variance".into()));
    }
    let lambda_max = CdProblem::new(x, y)?.lambda_max();
    if !(lambda_max > 0.0) {
        return Err(Error::Calibration("response is orthogonal to every column".into()));
    }
    let grid = lambda_grid(lambda_max, CV_GRID_SIZE, CV_GRID_RATIO);
    let curve = cross_validate(x, y, &grid, rule.folds, rng)?;
    Ok(match rule.kind {
        LambdaKind::CvMin => curve.lambda_min(),
        _ => curve.lambda_1se(),
    })
}
