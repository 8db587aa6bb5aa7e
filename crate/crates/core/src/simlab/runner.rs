//! Replicate loop for one setting and per-method aggregation.

use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Method, SimConfig};
use super::design::{build_covariance, sample_dataset, CovFactor};
use super::golden::frozen_eta;
use crate::competitors::{
    adaptive_from_fit, calibrate_c_o, oracle_lasso_cs, response_bound, two_step_lasso_cs, ConstantCache, TslOptions,
};
use crate::confset::{naive_chi2_ball, CandidateSet, nested_candidates, stein_confidence_set, BallCS, Criterion, EllipsoidCS, TwoStepOptions};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numkit::RngStream;
use crate::solvers::{lasso, select_lambda, theoretical_lambda, LambdaKind, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use crate::stein::{CsCache, SureConstant};

/// Environment variable sizing the replicate pool.
pub const THREADS_ENV: &str = "HONESTSETS_THREADS";

// child-stream tags
pub(crate) const TAG_LAMBDA_FIT: u64 = 1;
pub(crate) const TAG_LAMBDA_WHOLE: u64 = 2;
pub(crate) const TAG_TSL: u64 = 3;
pub(crate) const TAG_ORACLE_DATA: u64 = 10;
pub(crate) const TAG_ORACLE_DRAWS: u64 = 11;

/// Outcome of one method on one replicate. Failed runs leave the optional fields empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub setting_id: u64,
    pub replicate: u64,
    pub method: Method,
    pub covered: Option<u8>,
    pub r_bar: Option<f64>,
    #[serde(rename = "r_A")]
    pub r_a: Option<f64>,
    pub r_perp: Option<f64>,
    pub k: Option<usize>,
    pub m_star: Option<usize>,
    pub wall_ms: u64,
}

impl TrialRecord {
    pub fn is_error(&self) -> bool {
        self.covered.is_none()
    }

    fn failed(setting_id: u64, replicate: u64, method: Method) -> Self {
        Self {
            setting_id,
            replicate,
            method,
            covered: None,
            r_bar: None,
            r_a: None,
            r_perp: None,
            k: None,
            m_star: None,
            wall_ms: 0,
        }
    }
}

/// A per-replicate failure kept next to the records.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialError {
    pub setting_id: u64,
    pub replicate: u64,
    pub method: Option<Method>,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct SettingRun {
    pub records: Vec<TrialRecord>,
    pub errors: Vec<TrialError>,
}

/// Stream of replicate `r` in setting `setting_id`.
pub fn replicate_stream(master_seed: u64, setting_id: u64, replicate: u64) -> RngStream {
    RngStream::new(master_seed, setting_id * 1_000_000 + replicate)
}

/// Stream reserved for per-setting calibration; never collides with a replicate stream.
pub fn setting_stream(master_seed: u64, setting_id: u64) -> RngStream {
    RngStream::new(master_seed, setting_id * 1_000_000 + 999_999).derive(0x5E77)
}

/// Thread pool sized by `HONESTSETS_THREADS`, defaulting to the logical core count.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} = '{v}' is not a thread count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

/// `c_o` at the theoretical lambda for this setting, calibrated on a dedicated
/// `2n x p` dataset drawn from the setting's own stream.
pub fn oracle_base_constant(cfg: &SimConfig, factor: &CovFactor) -> Result<f64> {
    let stream = setting_stream(cfg.master_seed, cfg.setting_id);
    let (a, b, _) = sample_dataset(cfg, factor, &mut stream.derive(TAG_ORACLE_DATA))?;
    let whole = a.stack(&b)?;
    let bound = response_bound(whole.x.view(), whole.y.view())?;
    let lambda = theoretical_lambda(whole.sigma(), whole.n(), whole.p());
    let c = calibrate_c_o(
        whole.x.view(),
        lambda,
        cfg.s,
        cfg.alpha,
        bound,
        cfg.sigma2,
        cfg.calib_sims,
        &mut stream.derive(TAG_ORACLE_DRAWS),
    )?;
    Ok(c.value)
}

/// Multiplier on the theoretical-lambda `c_o` for the configured lambda rule.
pub fn oracle_eta(cfg: &SimConfig) -> Result<f64> {
    if cfg.lambda_rule == LambdaKind::Theoretical {
        return Ok(1.0);
    }
    if let Some(eta) = cfg.oracle_eta {
        return Ok(eta);
    }
    frozen_eta(cfg.lambda_rule, cfg.alpha).ok_or_else(|| {
        Error::Calibration(format!(
            "no frozen eta for lambda rule {:?} at alpha = {}; run `honestsets calibrate` or set oracle_eta",
            cfg.lambda_rule, cfg.alpha
        ))
    })
}

/// Constants shared by every replicate of a setting.
struct SettingContext {
    factor: CovFactor,
    cs: SureConstant,
    oracle_c: std::result::Result<f64, String>,
    tsl_cache: ConstantCache,
}

impl SettingContext {
    fn new(cfg: &SimConfig, cs_cache: &CsCache) -> Result<Self> {
        let factor = build_covariance(cfg.design, cfg.p)?;
        let cs = cs_cache.get(cfg.alpha / 2.0, cfg.n, cfg.cs_sims, cfg.master_seed)?;
        let oracle_c = if cfg.methods.contains(&Method::OracleLasso) {
            oracle_base_constant(cfg, &factor)
                .and_then(|c| Ok(c * oracle_eta(cfg)?))
                .map_err(|e| e.to_string())
        } else {
            Err("oracle lasso not requested".into())
        };
        Ok(Self {
            factor,
            cs,
            oracle_c,
            tsl_cache: ConstantCache::new(),
        })
    }
}

/// Radii and selection summary of one constructed set; balls report `r_A = 0`.
struct Built {
    covered: bool,
    r_bar: f64,
    r_a: f64,
    r_perp: f64,
    k: usize,
    m_star: usize,
}

fn from_ellipsoid(set: &EllipsoidCS, m_star: usize, mu: ArrayView1<f64>) -> Result<Built> {
    let g = set.geometry();
    Ok(Built {
        covered: set.contains(mu)?,
        r_bar: g.geo_avg_radius,
        r_a: set.r_a(),
        r_perp: set.r_perp(),
        k: set.k(),
        m_star,
    })
}

fn from_ball(ball: &BallCS, covered: bool) -> Built {
    Built {
        covered,
        r_bar: ball.radius,
        r_a: 0.0,
        r_perp: ball.radius,
        k: 0,
        m_star: 0,
    }
}

/// Everything derived from the fit half, computed at most once per replicate.
struct FitHalf {
    lambda: f64,
    beta: Array1<f64>,
}

struct Replicate<'a> {
    cfg: &'a SimConfig,
    ctx: &'a SettingContext,
    rng: RngStream,
    eval: Dataset,
    fit: Dataset,
    mu: Array1<f64>,
    beta: Array1<f64>,
    fit_half: Option<FitHalf>,
    candidates: Option<Vec<crate::confset::CandidateSet>>,
}

impl Replicate<'_> {
    fn fit_half(&mut self) -> Result<&FitHalf> {
        if self.fit_half.is_none() {
            let mut stream = self.rng.derive(TAG_LAMBDA_FIT);
            let lambda = select_lambda(self.fit.x.view(), self.fit.y.view(), self.fit.sigma(), self.cfg.lambda_rule(), &mut stream)?;
            let beta = lasso(self.fit.x.view(), self.fit.y.view(), lambda, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?.coefficients;
            self.fit_half = Some(FitHalf { lambda, beta });
        }
        Ok(self.fit_half.as_ref().expect("fit half computed above"))
    }

    fn stein(&mut self, criterion: Criterion) -> Result<Built> {
        if self.candidates.is_none() {
            let (lambda, beta) = {
                let f = self.fit_half()?;
                (f.lambda, f.beta.clone())
            };
            let mut candidates = nested_candidates(self.eval.x.view(), beta.view(), lambda, &self.cfg.a_grid)?;
            if self.cfg.include_empty && candidates.iter().all(|c| !c.indices().is_empty()) {
                candidates.push(CandidateSet::empty(self.eval.x.nrows()));
            }
            self.candidates = Some(candidates);
        }
        let candidates = self.candidates.as_deref().expect("candidates computed above");
        let mut opts = TwoStepOptions::new(self.cfg.alpha, criterion);
        opts.e_bound = self.cfg.e_bound;
        let sel = stein_confidence_set(&self.eval, candidates, &opts, self.cfg.strict_multi, &self.ctx.cs)?;
        from_ellipsoid(&sel.set, sel.m_star, self.mu.view())
    }

    fn adaptive(&mut self) -> Result<Built> {
        let beta = self.fit_half()?.beta.clone();
        let set = adaptive_from_fit(&self.eval, beta.view(), self.cfg.alpha)?;
        Ok(from_ball(&set.ball, set.contains(self.mu.view())?))
    }

    fn oracle(&mut self) -> Result<Built> {
        let c_o = self.ctx.oracle_c.clone().map_err(Error::Calibration)?;
        let whole = self.eval.stack(&self.fit)?;
        let mut stream = self.rng.derive(TAG_LAMBDA_WHOLE);
        let lambda = select_lambda(whole.x.view(), whole.y.view(), whole.sigma(), self.cfg.lambda_rule(), &mut stream)?;
        let ball = oracle_lasso_cs(&whole, self.cfg.s, lambda, c_o)?;
        let mu_whole = whole.x.dot(&self.beta);
        Ok(from_ball(&ball, ball.contains(mu_whole.view())?))
    }

    fn tsl(&mut self, criterion: Criterion) -> Result<Built> {
        let (lambda, beta) = {
            let f = self.fit_half()?;
            (f.lambda, f.beta.clone())
        };
        let opts = TslOptions {
            alpha: self.cfg.alpha,
            criterion,
            e_bound: self.cfg.e_bound,
            s_beta: self.cfg.s,
            k_const: self.cfg.tsl_k,
            nu: self.cfg.tsl_nu,
            lambda_sim_scale: self.cfg.lambda_sim_scale,
            calib_sims: self.cfg.calib_sims,
        };
        let stream = self.rng.derive(TAG_TSL);
        let sel = two_step_lasso_cs(&self.eval, &self.fit, beta.view(), lambda, &self.cfg.a_grid, &opts, &self.ctx.tsl_cache, &stream)?;
        from_ellipsoid(&sel.set, sel.m_star, self.mu.view())
    }

    fn naive(&mut self) -> Result<Built> {
        let ball = naive_chi2_ball(self.eval.y.view(), self.cfg.sigma2, self.cfg.alpha)?;
        Ok(from_ball(&ball, ball.contains(self.mu.view())?))
    }

    fn run(&mut self, method: Method) -> Result<Built> {
        match method {
            Method::SteinVol => self.stein(Criterion::Volume),
            Method::SteinDiam => self.stein(Criterion::Diameter),
            Method::Adaptive => self.adaptive(),
            Method::OracleLasso => self.oracle(),
            Method::TslVol => self.tsl(Criterion::Volume),
            Method::TslDiam => self.tsl(Criterion::Diameter),
            Method::Naive => self.naive(),
        }
    }
}

fn methods_in_order(cfg: &SimConfig) -> Vec<Method> {
    let mut methods = cfg.methods.clone();
    methods.sort_unstable();
    methods.dedup();
    methods
}

fn run_replicate(cfg: &SimConfig, ctx: &SettingContext, r: u64) -> (Vec<TrialRecord>, Vec<TrialError>) {
    let methods = methods_in_order(cfg);
    let mut rng = replicate_stream(cfg.master_seed, cfg.setting_id, r);
    let mut errors = Vec::new();
    let (eval, fit, beta) = match sample_dataset(cfg, &ctx.factor, &mut rng) {
        Ok(d) => d,
        Err(e) => {
            errors.push(TrialError {
                setting_id: cfg.setting_id,
                replicate: r,
                method: None,
                message: e.to_string(),
            });
            let records = methods.iter().map(|&m| TrialRecord::failed(cfg.setting_id, r, m)).collect();
            return (records, errors);
        }
    };
    let mu = eval.x.dot(&beta);
    let mut rep = Replicate {
        cfg,
        ctx,
        rng,
        eval,
        fit,
        mu,
        beta,
        fit_half: None,
        candidates: None,
    };
    let mut records = Vec::with_capacity(methods.len());
    for method in methods {
        let start = Instant::now();
        let outcome = rep.run(method);
        let wall_ms = if cfg.record_timing { start.elapsed().as_millis() as u64 } else { 0 };
        let mut rec = TrialRecord::failed(cfg.setting_id, r, method);
        rec.wall_ms = wall_ms;
        match outcome {
            Ok(b) => {
                rec.covered = Some(b.covered as u8);
                rec.r_bar = Some(b.r_bar);
                rec.r_a = Some(b.r_a);
                rec.r_perp = Some(b.r_perp);
                rec.k = Some(b.k);
                rec.m_star = Some(b.m_star);
            }
            Err(e) => errors.push(TrialError {
                setting_id: cfg.setting_id,
                replicate: r,
                method: Some(method),
                message: e.to_string(),
            }),
        }
        records.push(rec);
    }
    (records, errors)
}

/// Runs every replicate of a setting, keeping failures as error rows.
pub fn run_setting_detailed(cfg: &SimConfig, cs_cache: &CsCache) -> Result<SettingRun> {
    cfg.validate()?;
    let ctx = SettingContext::new(cfg, cs_cache)?;
    let pool = thread_pool()?;
    let per_rep: Vec<(Vec<TrialRecord>, Vec<TrialError>)> =
        pool.install(|| (0..cfg.replicates as u64).into_par_iter().map(|r| run_replicate(cfg, &ctx, r)).collect());
    let mut out = SettingRun::default();
    for (records, errors) in per_rep {
        out.records.extend(records);
        out.errors.extend(errors);
    }
    sort_records(&mut out.records);
    Ok(out)
}

pub fn run_setting(cfg: &SimConfig) -> Result<Vec<TrialRecord>> {
    Ok(run_setting_detailed(cfg, &CsCache::new())?.records)
}

/// Deterministic output order: `(setting_id, replicate, method)`.
pub fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| (a.setting_id, a.replicate, a.method).cmp(&(b.setting_id, b.replicate, b.method)));
}

/// Per setting and method: coverage, mean `r_bar` and mean `k` over successful trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting_id: u64,
    pub method: Method,
    pub design: Option<String>,
    pub beta_mode: Option<String>,
    pub lambda_rule: Option<String>,
    pub s: Option<usize>,
    pub b: Option<f64>,
    pub trials: usize,
    pub errors: usize,
    pub coverage: Option<f64>,
    pub mean_r_bar: Option<f64>,
    pub mean_k: Option<f64>,
}

pub fn aggregate(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(u64, Method)> = records.iter().map(|r| (r.setting_id, r.method)).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut acc: std::collections::BTreeMap<(u64, Method), (usize, usize, f64, f64, f64)> =
        keys.into_iter().map(|k| (k, (0, 0, 0.0, 0.0, 0.0))).collect();
    for r in records {
        let e = acc.get_mut(&(r.setting_id, r.method)).expect("key inserted above");
        match (r.covered, r.r_bar, r.k) {
            (Some(c), Some(rb), Some(k)) => {
                e.0 += 1;
                e.2 += c as f64;
                e.3 += rb;
                e.4 += k as f64;
            }
            _ => e.1 += 1,
        }
    }
    acc.into_iter()
        .map(|((setting_id, method), (ok, errors, cov, rb, k))| {
            let mean = |v: f64| (ok > 0).then(|| v / ok as f64);
            SummaryRow {
                setting_id,
                method,
                design: None,
                beta_mode: None,
                lambda_rule: None,
                s: None,
                b: None,
                trials: ok,
                errors,
                coverage: mean(cov),
                mean_r_bar: mean(rb),
                mean_k: mean(k),
            }
        })
        .collect()
}

/// Fills the setting descriptors of summary rows from their configs.
pub fn annotate(summaries: &mut [SummaryRow], configs: &[SimConfig]) {
    for row in summaries {
        if let Some(cfg) = configs.iter().find(|c| c.setting_id == row.setting_id) {
            row.design = Some(cfg.design.name().to_string());
            row.beta_mode = Some(cfg.beta_mode.name().to_string());
            row.lambda_rule = Some(cfg.lambda_rule().name().to_string());
            row.s = Some(cfg.s);
            row.b = Some(cfg.b);
        }
    }
}
