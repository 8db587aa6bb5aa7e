//! Regeneration of the frozen constants: `c_s`, `c_o`, `c_l` and the oracle multipliers.

use ndarray::ArrayView1;
use rayon::prelude::*;

use super::config::{BetaMode, Method, SimConfig};
use super::design::{build_covariance, sample_dataset, Design};
use super::golden::{CsRow, GoldenConstant};
use super::runner::{oracle_base_constant, replicate_stream, setting_stream, thread_pool, TAG_LAMBDA_WHOLE, TAG_ORACLE_DATA};
use crate::competitors::{design_digest, estimate_cl, lambda_sim, oracle_radius_sq, DEFAULT_TSL_K, DEFAULT_TSL_NU, LambdaSimScale};
use crate::error::Result;
use crate::solvers::{lasso, select_lambda, LambdaKind, LambdaRule, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use crate::stein::{cs_stream, estimate_cs};

/// Candidate oracle multipliers `0.25, 0.5, ..., 3`.
pub fn eta_grid() -> Vec<f64> {
    (1..=12).map(|i| i as f64 / 4.0).collect()
}

/// `c_s` rows for every `(n, alpha, seed)` combination.
pub fn cs_rows(ns: &[usize], alphas: &[f64], seeds: &[u64], n_sim: usize) -> Result<Vec<CsRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        for &alpha in alphas {
            for &seed in seeds {
                let c = estimate_cs(alpha, n, n_sim, &mut cs_stream(seed, n, alpha))?;
                rows.push(CsRow {
                    n,
                    alpha,
                    n_sim,
                    master_seed: seed,
                    value: c.value,
                });
            }
        }
    }
    Ok(rows)
}

/// `c_o` at the theoretical lambda for the headline setting.
pub fn headline_c_o(seed: u64, n_sim: usize) -> Result<GoldenConstant> {
    let mut cfg = SimConfig::paper_default();
    cfg.master_seed = seed;
    cfg.calib_sims = n_sim;
    let factor = build_covariance(cfg.design, cfg.p)?;
    let value = oracle_base_constant(&cfg, &factor)?;
    let stream = setting_stream(seed, cfg.setting_id);
    let (a, b, _) = sample_dataset(&cfg, &factor, &mut stream.derive(TAG_ORACLE_DATA))?;
    let whole = a.stack(&b)?;
    Ok(GoldenConstant {
        kind: "c_o".into(),
        context: format!("{:016x}", design_digest(whole.x.view())),
        alpha: cfg.alpha,
        seed,
        n_sim,
        value,
    })
}

/// `c_l(alpha / 2)` with an empty candidate on the headline replicate 0.
pub fn headline_c_l(seed: u64, n_sim: usize) -> Result<GoldenConstant> {
    let mut cfg = SimConfig::paper_default();
    cfg.master_seed = seed;
    let factor = build_covariance(cfg.design, cfg.p)?;
    let mut rng = replicate_stream(seed, cfg.setting_id, 0);
    let (eval, fit, _) = sample_dataset(&cfg, &factor, &mut rng)?;
    let lam = lambda_sim(DEFAULT_TSL_NU, DEFAULT_TSL_K, cfg.sigma2, cfg.p, cfg.n, LambdaSimScale::Sigma2);
    let alpha = cfg.alpha / 2.0;
    let c = estimate_cl(
        eval.x.view(),
        fit.x.view(),
        fit.y.view(),
        cfg.s,
        lam,
        alpha,
        cfg.sigma2,
        n_sim,
        &mut rng.derive(0xC1_0000 + cfg.s as u64),
    )?;
    Ok(GoldenConstant {
        kind: "c_l".into(),
        context: format!("{:016x}", c.digest),
        alpha,
        seed,
        n_sim,
        value: c.value,
    })
}

/// Pilot settings for the oracle multiplier: every design and beta mode at a
/// spread of signal bounds above 0.3.
pub fn pilot_settings(rule: LambdaKind, seed: u64, replicates: usize, calib_sims: usize) -> Vec<SimConfig> {
    let mut out = Vec::new();
    for design in Design::ALL {
        for mode in [BetaMode::Uniform, BetaMode::Mixed] {
            for b in [0.5, 1.0, 2.2, 5.0] {
                let mut cfg = SimConfig::paper_default();
                cfg.setting_id = out.len() as u64 + 1;
                cfg.design = design;
                cfg.beta_mode = mode;
                cfg.b = b;
                cfg.lambda_rule = rule;
                cfg.master_seed = seed;
                cfg.replicates = replicates;
                cfg.calib_sims = calib_sims;
                cfg.methods = vec![Method::OracleLasso];
                out.push(cfg);
            }
        }
    }
    out
}

/// Per replicate, the smallest multiplier of the theoretical-lambda `c_o` at
/// which the oracle ball built with `cfg.lambda_rule` covers `X beta`.
pub fn oracle_ratios(cfg: &SimConfig) -> Result<Vec<f64>> {
    let factor = build_covariance(cfg.design, cfg.p)?;
    let c_o = oracle_base_constant(cfg, &factor)?;
    let rule = LambdaRule {
        kind: cfg.lambda_rule,
        folds: cfg.cv_folds,
    };
    let pool = thread_pool()?;
    pool.install(|| {
        (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_stream(cfg.master_seed, cfg.setting_id, r);
                let (a, b, beta) = sample_dataset(cfg, &factor, &mut rng)?;
                let whole = a.stack(&b)?;
                let lambda = select_lambda(whole.x.view(), whole.y.view(), whole.sigma(), rule, &mut rng.derive(TAG_LAMBDA_WHOLE))?;
                let fit = lasso(whole.x.view(), whole.y.view(), lambda, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
                let err = whole.x.dot(&(&fit.coefficients - &beta));
                let dist = err.dot(&err) / whole.n() as f64;
                Ok(dist / oracle_radius_sq(c_o, cfg.sigma2, cfg.s, cfg.p, whole.n()))
            })
            .collect()
    })
}

/// Smallest grid value whose pooled coverage reaches `1 - alpha`, with that coverage;
/// falls back to the largest grid value.
pub fn choose_eta(ratios: ArrayView1<f64>, alpha: f64, grid: &[f64]) -> (f64, f64) {
    let coverage = |eta: f64| ratios.iter().filter(|&&t| t <= eta).count() as f64 / ratios.len().max(1) as f64;
    grid.iter()
        .map(|&eta| (eta, coverage(eta)))
        .find(|&(_, c)| c >= 1.0 - alpha)
        .unwrap_or_else(|| {
            let last = *grid.last().expect("non-empty eta grid");
            (last, coverage(last))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eta_choice() {
        let t = array![0.1, 0.3, 0.6, 0.9, 1.2, 1.4, 1.6, 1.8, 2.6, 9.0];
        assert_eq!(choose_eta(t.view(), 0.2, &eta_grid()), (2.0, 0.8));
        assert_eq!(choose_eta(t.view(), 0.0, &eta_grid()).0, 3.0);
        assert_eq!(eta_grid().len(), 12);
    }
}
