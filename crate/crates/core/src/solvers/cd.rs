//! Coordinate descent for `(1/2s) ||y - X b||^2 + sum_j pen(b_j)` with an
//! active-set outer loop.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{ensure_finite, Error, Result};

/// Default convergence tolerance on the largest coefficient change in a sweep.
pub const DEFAULT_TOL: f64 = 1e-7;
/// Default cap on the number of sweeps (full and active-set sweeps both count).
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Penalty {
    Lasso { lambda: f64 },
    Mcp { lambda: f64, gamma: f64 },
}

impl Penalty {
    pub fn lambda(&self) -> f64 {
        match *self {
            Penalty::Lasso { lambda } | Penalty::Mcp { lambda, .. } => lambda,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Penalty::Lasso { .. } => None,
            Penalty::Mcp { gamma, .. } => Some(gamma),
        }
    }

    pub fn value(&self, b: f64) -> f64 {
        let t = b.abs();
        match *self {
            Penalty::Lasso { lambda } => lambda * t,
            Penalty::Mcp { lambda, gamma } => {
                if t <= gamma * lambda {
                    lambda * t - t * t / (2.0 * gamma)
                } else {
                    0.5 * gamma * lambda * lambda
                }
            }
        }
    }

    /// Minimizer of `(v/2) b^2 - g b + pen(b)`.
    pub fn coordinate_update(&self, g: f64, v: f64) -> f64 {
        match *self {
            Penalty::Lasso { lambda } => soft_threshold(g, lambda) / v,
            Penalty::Mcp { lambda, gamma } => {
                if v * gamma > 1.0 {
                    if g.abs() <= v * gamma * lambda {
                        soft_threshold(g, lambda) / (v - 1.0 / gamma)
                    } else {
                        g / v
                    }
                } else {
                    // coordinate problem is concave on |b| <= gamma*lambda: the
                    // minimum sits at 0, at the region boundary, or at g/v
                    let f = |b: f64| 0.5 * v * b * b - g * b + self.value(b);
                    let edge = gamma * lambda * g.signum();
                    let mut best = (0.0, f(0.0));
                    for cand in [edge, g / v] {
                        if (cand.abs() >= gamma * lambda || cand == edge) && f(cand) < best.1 {
                            best = (cand, f(cand));
                        }
                    }
                    best.0
                }
            }
        }
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// A penalized least-squares solution.
#[derive(Clone, Debug)]
pub struct PenalizedFit {
    pub coefficients: Array1<f64>,
    pub lambda: f64,
    /// `None` for the lasso.
    pub gamma: Option<f64>,
    pub n_sweeps: usize,
    pub converged: bool,
    /// Objective after each sweep.
    pub objective_trace: Vec<f64>,
}

impl PenalizedFit {
    pub fn support(&self) -> Vec<usize> {
        super::threshold_support(self.coefficients.view(), 0.0)
    }
}

/// Column-major copy of a design plus its response, reusable across penalties
/// and warm starts.
#[derive(Clone, Debug)]
pub struct CdProblem {
    // row j holds column j of X
    cols: Array2<f64>,
    y: Array1<f64>,
    col_sq: Vec<f64>,
    loss_scale: f64,
}

impl CdProblem {
    pub fn new(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::InvalidInput("design has no rows".into()));
        }
        ensure_finite(x.iter().copied(), "X")?;
        ensure_finite(y.iter().copied(), "y")?;
        let cols = x.t().as_standard_layout().into_owned();
        let scale = x.nrows() as f64;
        let col_sq = cols.rows().into_iter().map(|c| c.dot(&c) / scale).collect();
        Ok(Self {
            cols,
            y: y.to_owned(),
            col_sq,
            loss_scale: scale,
        })
    }

    /// Use `s` instead of the row count in the `1/(2s)` loss normalizer.
    pub fn with_loss_scale(mut self, s: f64) -> Self {
        let n = self.loss_scale;
        for v in &mut self.col_sq {
            *v *= n / s;
        }
        self.loss_scale = s;
        self
    }

    /// Swap in a new response of the same length, keeping the design.
    pub fn set_response(&mut self, y: ArrayView1<f64>) -> Result<()> {
        if y.len() != self.y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.y.len(),
                got: y.len(),
            });
        }
        ensure_finite(y.iter().copied(), "y")?;
        self.y.assign(&y);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.cols.nrows()
    }

    pub fn loss_scale(&self) -> f64 {
        self.loss_scale
    }

    /// `||X^T y / s||_inf`: the smallest lasso penalty with an all-zero solution.
    pub fn lambda_max(&self) -> f64 {
        self.cols
            .rows()
            .into_iter()
            .map(|c| (c.dot(&self.y) / self.loss_scale).abs())
            .fold(0.0, f64::max)
    }

    pub fn predict(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.n());
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                out.scaled_add(b, &self.cols.row(j));
            }
        }
        out
    }

    pub fn objective(&self, penalty: &Penalty, beta: ArrayView1<f64>) -> f64 {
        let r = &self.y - &self.predict(beta);
        0.5 * r.dot(&r) / self.loss_scale + beta.iter().map(|&b| penalty.value(b)).sum::<f64>()
    }

    /// `X_j^T (y - X beta) / s` for every j.
    pub fn correlations(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        let r = &self.y - &self.predict(beta);
        self.cols.dot(&r) / self.loss_scale
    }

    pub fn solve(&self, penalty: Penalty, init: Option<ArrayView1<f64>>, tol: f64, max_sweeps: usize) -> Result<PenalizedFit> {
        let lambda = penalty.lambda();
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda = {lambda} must be positive and finite")));
        }
        if let Some(gamma) = penalty.gamma() {
            if !(gamma > 1.0) {
                return Err(Error::Domain(format!("MCP gamma = {gamma} must exceed 1")));
            }
        }
        let p = self.p();
        let mut beta = match init {
            Some(b) if b.len() != p => {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: b.len(),
                })
            }
            Some(b) => b.to_owned(),
            None => Array1::zeros(p),
        };
        let mut resid = &self.y - &self.predict(beta.view());
        let max_sq = self.col_sq.iter().copied().fold(0.0, f64::max);
        let usable: Vec<bool> = self.col_sq.iter().map(|&v| v > 1e-12 * max_sq && v > 0.0).collect();
        for j in 0..p {
            if !usable[j] && beta[j] != 0.0 {
                resid.scaled_add(beta[j], &self.cols.row(j));
                beta[j] = 0.0;
            }
        }

        let sweep = |idx: &mut dyn Iterator<Item = usize>, beta: &mut Array1<f64>, resid: &mut Array1<f64>| {
            let mut max_change = 0.0_f64;
            for j in idx {
                if !usable[j] {
                    continue;
                }
                let col = self.cols.row(j);
                let v = self.col_sq[j];
                let old = beta[j];
                let g = col.dot(resid) / self.loss_scale + v * old;
                let new = penalty.coordinate_update(g, v);
                if new != old {
                    resid.scaled_add(old - new, &col);
                    beta[j] = new;
                    max_change = max_change.max((new - old).abs());
                }
            }
            max_change
        };
        let objective = |beta: &Array1<f64>, resid: &Array1<f64>| {
            0.5 * resid.dot(resid) / self.loss_scale + beta.iter().map(|&b| penalty.value(b)).sum::<f64>()
        };

        let mut trace = Vec::new();
        let mut n_sweeps = 0;
        let mut converged = false;
        'outer: while n_sweeps < max_sweeps {
            let change = sweep(&mut (0..p), &mut beta, &mut resid);
            n_sweeps += 1;
            trace.push(objective(&beta, &resid));
            if change < tol {
                converged = true;
                break;
            }
            let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            loop {
                if n_sweeps >= max_sweeps {
                    break 'outer;
                }
                let change = sweep(&mut active.iter().copied(), &mut beta, &mut resid);
                n_sweeps += 1;
                trace.push(objective(&beta, &resid));
                if change < tol {
                    break;
                }
            }
        }
        Ok(PenalizedFit {
            coefficients: beta,
            lambda,
            gamma: penalty.gamma(),
            n_sweeps,
            converged,
            objective_trace: trace,
        })
    }
}

/// Lasso with the `1/(2n)` squared-error loss.
pub fn lasso(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, tol: f64, max_sweeps: usize) -> Result<PenalizedFit> {
    CdProblem::new(x, y)?.solve(Penalty::Lasso { lambda }, None, tol, max_sweeps)
}

/// MCP-penalized least squares, warm-started from the lasso at the same `lambda`.
pub fn mcp(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    gamma: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<PenalizedFit> {
    if !(gamma > 1.0) {
        return Err(Error::Domain(format!("MCP gamma = {gamma} must exceed 1")));
    }
    let problem = CdProblem::new(x, y)?;
    let warm = problem.solve(Penalty::Lasso { lambda }, None, tol, max_sweeps)?;
    let mut fit = problem.solve(
        Penalty::Mcp { lambda, gamma },
        Some(warm.coefficients.view()),
        tol,
        max_sweeps,
    )?;
    fit.n_sweeps += warm.n_sweeps;
    Ok(fit)
}

/// Largest violation of the lasso optimality conditions.
pub fn lasso_kkt_violation(problem: &CdProblem, fit: &PenalizedFit) -> f64 {
    let grad = problem.correlations(fit.coefficients.view());
    fit.coefficients
        .iter()
        .zip(grad.iter())
        .map(|(&b, &g)| {
            if b != 0.0 {
                (g - fit.lambda * b.signum()).abs()
            } else {
                (g.abs() - fit.lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}
