//! Baseline confidence sets: the adaptive ball, the oracle lasso ball and the two-step lasso.

mod adaptive;
mod calibration;
mod lasso_sets;

pub use adaptive::{adaptive_cs, adaptive_from_fit, adaptive_radius_sq, adaptive_statistic, AdaptiveSet};
pub use calibration::{
    calibrate_c_o, design_digest, estimate_cl, lambda_sim, lasso_error_draws, response_bound, CalibratedConstant,
    ConstantCache, ConstantKind, LambdaSimScale, MIN_CALIB_SIMS,
};
pub use lasso_sets::{
    oracle_lasso_cs, oracle_radius_sq, projected_lasso, projected_lasso_reduced, trim_candidate, two_step_lasso_cs,
    two_step_lasso_set, tsl_perp_radius_sq, ProjectedLasso, TslOptions, DEFAULT_TSL_K, DEFAULT_TSL_NU,
};
