//! The full simulation grid.

use super::config::{BetaMode, Method, SimConfig};
use super::design::Design;
use crate::solvers::LambdaKind;

/// Signal bounds: ten values in (0, 1] and ten in (1, 5].
pub fn b_grid() -> Vec<f64> {
    let low = (1..=10).map(|i| i as f64 / 10.0);
    let high = (1..=10).map(|i| (10 + 4 * i) as f64 / 10.0);
    low.chain(high).collect()
}

/// Sparse settings (s = 10, every design, both beta modes, all three lambda
/// rules) followed by the dense equicorrelated settings at `lambda_1se`
/// (s = 100 uniform, s = 200 mixed). Setting ids start at 1.
pub fn paper_grid(master_seed: u64, replicates: usize, methods: &[Method]) -> Vec<SimConfig> {
    let mut out = Vec::new();
    let mut push = |design, beta_mode, s, rule, b| {
        let mut cfg = SimConfig::paper_default();
        cfg.setting_id = out.len() as u64 + 1;
        cfg.design = design;
        cfg.beta_mode = beta_mode;
        cfg.s = s;
        cfg.lambda_rule = rule;
        cfg.b = b;
        cfg.replicates = replicates;
        cfg.master_seed = master_seed;
        cfg.methods = methods.to_vec();
        out.push(cfg);
    };
    for rule in [LambdaKind::Theoretical, LambdaKind::CvMin, LambdaKind::Cv1se] {
        for design in Design::ALL {
            for mode in [BetaMode::Uniform, BetaMode::Mixed] {
                for b in b_grid() {
                    push(design, mode, 10, rule, b);
                }
            }
        }
    }
    for (mode, s) in [(BetaMode::Uniform, 100), (BetaMode::Mixed, 200)] {
        for b in b_grid() {
            push(Design::Equicorr, mode, s, LambdaKind::Cv1se, b);
        }
    }
    out
}
