use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::calibration::{design_digest, estimate_cl, lambda_sim, CalibratedConstant, ConstantCache, ConstantKind, LambdaSimScale};
use crate::confset::{assemble_ellipsoid, generate_candidates, radius_a_single, select_best, CandidateSet, Criterion, EllipsoidCS, Selection, BallCS};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numkit::{OrthoBasis, RngStream};
use crate::solvers::{lasso, CdProblem, Penalty, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};

/// Default `K` in the second-step penalty, just above `2 sqrt(2)`.
pub const DEFAULT_TSL_K: f64 = 2.0 * std::f64::consts::SQRT_2 + 0.01;
/// Default `nu` scaling the calibration penalty.
pub const DEFAULT_TSL_NU: f64 = 0.5;

/// `c_o * sigma2 * s_beta * ln p / n`.
pub fn oracle_radius_sq(c_o: f64, sigma2: f64, s_beta: usize, p: usize, n: usize) -> f64 {
    c_o * sigma2 * s_beta as f64 * (p as f64).ln() / n as f64
}

/// Base weak-signal radius `c_l * sigma2 * (s_beta - k) * ln(p - k) / n` of the two-step lasso.
pub fn tsl_perp_radius_sq(c_l: f64, sigma2: f64, s_beta: usize, k: usize, p_rest: usize, n: usize) -> f64 {
    c_l * sigma2 * s_beta.saturating_sub(k) as f64 * (p_rest as f64).ln() / n as f64
}

/// Ball around the whole-data lasso fit with the oracle sparsity radius.
pub fn oracle_lasso_cs(full: &Dataset, s_beta: usize, lambda: f64, c_o: f64) -> Result<BallCS> {
    if s_beta == 0 {
        return Err(Error::Degenerate("oracle lasso needs s_beta >= 1".into()));
    }
    if !(c_o >= 0.0) || !c_o.is_finite() {
        return Err(Error::Calibration(format!("c_o = {c_o} must be finite and >= 0")));
    }
    let fit = lasso(full.x.view(), full.y.view(), lambda, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
    let center = full.x.dot(&fit.coefficients);
    BallCS::new(center, oracle_radius_sq(c_o, full.sigma2, s_beta, full.p(), full.n()).sqrt())
}

/// The `max_size` entries of `indices` with the largest `|coefficient|`, in ascending index order.
pub fn trim_candidate(coefficients: ArrayView1<f64>, indices: &[usize], max_size: usize) -> Vec<usize> {
    let mut ranked = indices.to_vec();
    ranked.sort_by(|&a, &b| coefficients[b].abs().total_cmp(&coefficients[a].abs()).then(a.cmp(&b)));
    ranked.truncate(max_size);
    ranked.sort_unstable();
    ranked
}

/// Lasso on `(P_perp X_{A^c}, P_perp y)` with the `1/(2n)` loss.
#[derive(Clone, Debug)]
pub struct ProjectedLasso {
    /// Full-length coefficients, zero on `A`.
    pub beta: Array1<f64>,
    /// `P_perp X beta`.
    pub fitted: Array1<f64>,
    pub x_reduced: Array2<f64>,
    pub kept: Vec<usize>,
}

pub fn projected_lasso(x: ArrayView2<f64>, y: ArrayView1<f64>, basis: &OrthoBasis, excluded: &[usize], lambda: f64) -> Result<ProjectedLasso> {
    let p = x.ncols();
    let kept: Vec<usize> = (0..p).filter(|j| !excluded.contains(j)).collect();
    if kept.is_empty() {
        return Err(Error::Degenerate("no columns left outside the candidate".into()));
    }
    let x_reduced = basis.project_perp_matrix(x.select(Axis(1), &kept).view());
    let y_perp = basis.project_perp(y);
    let fit = lasso(x_reduced.view(), y_perp.view(), lambda, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
    let fitted = x_reduced.dot(&fit.coefficients);
    let mut beta = Array1::zeros(p);
    for (&j, &b) in kept.iter().zip(&fit.coefficients) {
        beta[j] = b;
    }
    Ok(ProjectedLasso {
        beta,
        fitted,
        x_reduced,
        kept,
    })
}

/// Solves the second-step lasso on the complement coordinates `V^T X_{A^c}`,
/// keeping the `1/(2n)` normalization of the projected problem.
pub fn projected_lasso_reduced(x: ArrayView2<f64>, y: ArrayView1<f64>, basis: &OrthoBasis, excluded: &[usize], lambda: f64) -> Result<Array1<f64>> {
    let (n, p) = x.dim();
    let kept: Vec<usize> = (0..p).filter(|j| !excluded.contains(j)).collect();
    let v = basis.complement();
    let xr = v.t().dot(&x.select(Axis(1), &kept));
    let yr = v.t().dot(&y);
    let problem = CdProblem::new(xr.view(), yr.view())?.with_loss_scale(n as f64);
    let fit = problem.solve(Penalty::Lasso { lambda }, None, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
    let mut beta = Array1::zeros(p);
    for (&j, &b) in kept.iter().zip(&fit.coefficients) {
        beta[j] = b;
    }
    Ok(beta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TslOptions {
    pub alpha: f64,
    pub criterion: Criterion,
    pub e_bound: f64,
    pub s_beta: usize,
    pub k_const: f64,
    pub nu: f64,
    pub lambda_sim_scale: LambdaSimScale,
    pub calib_sims: usize,
}

/// Two-step lasso set for one candidate, given its calibrated `c_l(alpha/2)`.
pub fn two_step_lasso_set(eval: &Dataset, cand: &CandidateSet, opts: &TslOptions, c_l: f64) -> Result<EllipsoidCS> {
    let (n, p) = (eval.n(), eval.p());
    let k = cand.k();
    if k >= opts.s_beta {
        return Err(Error::Degenerate(format!("candidate rank {k} is not below s_beta = {}", opts.s_beta)));
    }
    let basis = cand.basis();
    let p_rest = p - cand.indices().len();
    let lambda2 = opts.k_const * eval.sigma() * ((p_rest as f64).ln() / n as f64).sqrt();
    let step2 = projected_lasso(eval.x.view(), eval.y.view(), basis, cand.indices(), lambda2)?;
    let mu_a_hat = basis.project(eval.y.view());
    let base_a_sq = radius_a_single(k, n, eval.sigma2, opts.alpha, 1.0)?.powi(2);
    let base_perp_sq = tsl_perp_radius_sq(c_l, eval.sigma2, opts.s_beta, k, p_rest, n);
    assemble_ellipsoid(basis.clone(), mu_a_hat, step2.fitted, base_a_sq, base_perp_sq, opts.criterion, opts.e_bound)
}

/// Builds two-step lasso sets over thresholded, trimmed candidates and keeps the best.
///
/// Candidates come from `beta_prime` (fit on `fit_half` at `lambda`); `c_l` is
/// calibrated once per candidate rank and cached.
#[allow(clippy::too_many_arguments)]
pub fn two_step_lasso_cs(
    eval: &Dataset,
    fit_half: &Dataset,
    beta_prime: ArrayView1<f64>,
    lambda: f64,
    a_grid: &[f64],
    opts: &TslOptions,
    cache: &ConstantCache,
    rng: &RngStream,
) -> Result<Selection> {
    if opts.s_beta == 0 {
        return Err(Error::Degenerate("two-step lasso needs s_beta >= 1".into()));
    }
    let mut index_sets: Vec<Vec<usize>> = Vec::new();
    for set in generate_candidates(beta_prime, lambda, a_grid) {
        let trimmed = trim_candidate(beta_prime, &set, opts.s_beta - 1);
        if !index_sets.contains(&trimmed) {
            index_sets.push(trimmed);
        }
    }
    let digest = design_digest(eval.x.view());
    let n_candidates = index_sets.len();
    let mut sets = Vec::with_capacity(n_candidates);
    for (m, indices) in index_sets.into_iter().enumerate() {
        let cand = CandidateSet::new(eval.x.view(), indices)?;
        let k = cand.k();
        let p_rest = eval.p() - cand.indices().len();
        let sparsity = opts.s_beta - k;
        let c_l = cache.get_or_try_insert(ConstantKind::Cl, digest, sparsity, p_rest, opts.alpha / 2.0, || {
            calibrate_for(eval, fit_half, &cand, sparsity, opts, rng)
        })?;
        let mut set = two_step_lasso_set(eval, &cand, opts, c_l.value)?;
        set.provenance = m;
        sets.push(set);
    }
    let best = select_best(&sets, opts.criterion)?;
    let set = sets.swap_remove(best);
    Ok(Selection {
        m_star: set.provenance,
        set,
        n_candidates,
    })
}

fn calibrate_for(eval: &Dataset, fit_half: &Dataset, cand: &CandidateSet, sparsity: usize, opts: &TslOptions, rng: &RngStream) -> Result<CalibratedConstant> {
    let kept: Vec<usize> = (0..eval.p()).filter(|j| !cand.indices().contains(j)).collect();
    let x_red = cand.basis().project_perp_matrix(eval.x.select(Axis(1), &kept).view());
    let lam = lambda_sim(opts.nu, opts.k_const, eval.sigma2, kept.len(), eval.n(), opts.lambda_sim_scale);
    let mut stream = rng.derive(0xC1_0000 + sparsity as u64);
    estimate_cl(
        x_red.view(),
        fit_half.x.view(),
        fit_half.y.view(),
        sparsity,
        lam,
        opts.alpha / 2.0,
        eval.sigma2,
        opts.calib_sims,
        &mut stream,
    )
}
