use serde::{Deserialize, Serialize};

use super::design::Design;
pub use crate::competitors::LambdaSimScale;
pub use crate::confset::Criterion;
use crate::error::{Error, Result};
use crate::solvers::{LambdaKind, LambdaRule, DEFAULT_FOLDS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    Uniform,
    Mixed,
}

impl BetaMode {
    pub fn name(&self) -> &'static str {
        match self {
            BetaMode::Uniform => "uniform",
            BetaMode::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for BetaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(BetaMode::Uniform),
            "mixed" => Ok(BetaMode::Mixed),
            other => Err(Error::Config(format!("unknown beta mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SteinVol,
    SteinDiam,
    Adaptive,
    OracleLasso,
    TslVol,
    TslDiam,
    Naive,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::SteinVol,
        Method::SteinDiam,
        Method::Adaptive,
        Method::OracleLasso,
        Method::TslVol,
        Method::TslDiam,
        Method::Naive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::SteinVol => "stein_vol",
            Method::SteinDiam => "stein_diam",
            Method::Adaptive => "adaptive",
            Method::OracleLasso => "oracle_lasso",
            Method::TslVol => "tsl_vol",
            Method::TslDiam => "tsl_diam",
            Method::Naive => "naive",
        }
    }

    /// Parse a method name; bare `stein` / `tsl` take the given criterion.
    pub fn parse_with_criterion(s: &str, criterion: Criterion) -> Result<Self> {
        let m = match (s, criterion) {
            ("stein", Criterion::Volume) => Method::SteinVol,
            ("stein", Criterion::Diameter) => Method::SteinDiam,
            ("tsl", Criterion::Volume) => Method::TslVol,
            ("tsl", Criterion::Diameter) => Method::TslDiam,
            _ => return s.parse(),
        };
        Ok(m)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_sigma2() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.05
}
fn default_folds() -> usize {
    DEFAULT_FOLDS
}
fn default_e_bound() -> f64 {
    10.0
}
fn default_cs_sims() -> usize {
    100_000
}
fn default_calib_sims() -> usize {
    500
}
fn default_tsl_k() -> f64 {
    2.0 * std::f64::consts::SQRT_2 + 0.01
}
fn default_tsl_nu() -> f64 {
    0.5
}
fn default_lambda_sim_scale() -> LambdaSimScale {
    LambdaSimScale::Sigma2
}

fn default_true() -> bool {
    true
}

/// Threshold multipliers `0, 0.05, ..., 4`.
pub fn default_a_grid() -> Vec<f64> {
    (0..=80).map(|i| i as f64 / 20.0).collect()
}

/// One simulation setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub setting_id: u64,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    pub design: Design,
    pub beta_mode: BetaMode,
    pub b: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub lambda_rule: LambdaKind,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    pub methods: Vec<Method>,
    #[serde(default = "default_a_grid")]
    pub a_grid: Vec<f64>,
    /// Append the empty set to the Stein candidates when no threshold reaches it.
    #[serde(default = "default_true")]
    pub include_empty: bool,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub strict_multi: bool,
    #[serde(default = "default_e_bound")]
    pub e_bound: f64,
    #[serde(default = "default_cs_sims")]
    pub cs_sims: usize,
    #[serde(default = "default_calib_sims")]
    pub calib_sims: usize,
    #[serde(default = "default_tsl_k")]
    pub tsl_k: f64,
    #[serde(default = "default_tsl_nu")]
    pub tsl_nu: f64,
    #[serde(default = "default_lambda_sim_scale")]
    pub lambda_sim_scale: LambdaSimScale,
    /// Multiplier on the theoretical-lambda c_o for data-driven lambda rules;
    /// `None` looks it up in the frozen calibration table.
    #[serde(default)]
    pub oracle_eta: Option<f64>,
    #[serde(default)]
    pub record_timing: bool,
}

impl SimConfig {
    /// The headline sparse setting: n = 200, p = 800, s = 10, Toeplitz.
    pub fn paper_default() -> Self {
        Self {
            setting_id: 0,
            n: 200,
            p: 800,
            s: 10,
            sigma2: 1.0,
            design: Design::Toeplitz,
            beta_mode: BetaMode::Uniform,
            b: 2.0,
            alpha: 0.05,
            lambda_rule: LambdaKind::Cv1se,
            cv_folds: DEFAULT_FOLDS,
            methods: vec![Method::SteinVol, Method::Adaptive, Method::OracleLasso],
            a_grid: default_a_grid(),
            include_empty: true,
            replicates: 100,
            master_seed: 42,
            strict_multi: false,
            e_bound: default_e_bound(),
            cs_sims: default_cs_sims(),
            calib_sims: default_calib_sims(),
            tsl_k: default_tsl_k(),
            tsl_nu: default_tsl_nu(),
            lambda_sim_scale: LambdaSimScale::Sigma2,
            oracle_eta: None,
            record_timing: false,
        }
    }

    pub fn lambda_rule(&self) -> LambdaRule {
        LambdaRule {
            kind: self.lambda_rule,
            folds: self.cv_folds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 1 {
            return Err(Error::Config(format!("need n >= 2 and p >= 1, got n = {}, p = {}", self.n, self.p)));
        }
        if self.s > self.p {
            return Err(Error::Config(format!("s = {} exceeds p = {}", self.s, self.p)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !(self.b > 0.0) {
            return Err(Error::Config(format!("signal bound b = {} must be positive", self.b)));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::Config(format!("sigma2 = {} must be positive", self.sigma2)));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.a_grid.is_empty() || self.a_grid.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Config("a_grid must be non-empty and non-negative".into()));
        }
        if !(self.e_bound > 2.0) {
            return Err(Error::Config(format!("E = {} must exceed 2", self.e_bound)));
        }
        if self.cs_sims < 100 || self.calib_sims < 100 {
            return Err(Error::Config("calibration needs at least 100 simulated draws".into()));
        }
        self.lambda_rule().validate()
    }
}
