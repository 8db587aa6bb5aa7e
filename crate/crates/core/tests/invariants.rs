use ndarray::{Array1, Array2};
use proptest::prelude::*;

use honestsets::competitors::{adaptive_radius_sq, adaptive_statistic, trim_candidate};
use honestsets::confset::{
    build_two_step, choose_constants_diameter, choose_constants_volume, generate_candidates, CandidateSet, Criterion, TwoStepOptions,
};
use honestsets::numkit::{chi2_cdf, chi2_quantile, normal_quantile, orthonormal_basis, upper_quantile, RANK_TOL};
use honestsets::simlab::{Method, SimConfig};
use honestsets::solvers::{lasso, lasso_kkt_violation, soft_threshold, CdProblem, DEFAULT_MAX_SWEEPS};
use honestsets::stein::{stein_shrink, SureConstant};
use honestsets::Dataset;

fn matrix(n: usize, p: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-3.0..3.0f64, n * p).prop_map(move |v| Array2::from_shape_vec((n, p), v).unwrap())
}

fn vector(n: usize) -> impl Strategy<Value = Array1<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_map(Array1::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chi2_quantile_inverts_cdf(df in 1u32..500, p in 0.001..0.999f64) {
        let q = chi2_quantile(df, p).unwrap();
        prop_assert!((chi2_cdf(df as f64, q) - p).abs() < 1e-9);
        prop_assert!(chi2_quantile(df, (p + 0.0005).min(0.9995)).unwrap() >= q);
        prop_assert!(chi2_quantile(df + 1, p).unwrap() > q);
    }

    #[test]
    fn normal_quantile_is_odd(p in 0.0001..0.9999f64) {
        let z = normal_quantile(p).unwrap();
        prop_assert!((z + normal_quantile(1.0 - p).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn soft_threshold_shrinks(z in -10.0..10.0f64, t in 0.0..5.0f64) {
        let s = soft_threshold(z, t);
        prop_assert!(s.abs() <= z.abs());
        prop_assert!(s == 0.0 || s.signum() == z.signum());
        prop_assert!((z - s).abs() <= t + 1e-15);
    }

    #[test]
    fn candidates_are_nested_and_bounded(
        coef in prop::collection::vec(-3.0..3.0f64, 1..40),
        lambda in 0.05..1.0f64,
        mut grid in prop::collection::vec(0.0..5.0f64, 1..30),
    ) {
        grid.sort_by(f64::total_cmp);
        let coef = Array1::from(coef);
        let cands = generate_candidates(coef.view(), lambda, &grid);
        prop_assert!(cands.len() <= grid.len());
        for w in cands.windows(2) {
            prop_assert!(w[0] != w[1]);
            prop_assert!(w[1].iter().all(|j| w[0].contains(j)));
        }
        for c in &cands {
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn trimming_keeps_the_largest(coef in prop::collection::vec(-3.0..3.0f64, 1..30), size in 0usize..30) {
        let coef = Array1::from(coef);
        let all: Vec<usize> = (0..coef.len()).collect();
        let kept = trim_candidate(coef.view(), &all, size);
        prop_assert_eq!(kept.len(), size.min(coef.len()));
        let floor = kept.iter().map(|&j| coef[j].abs()).fold(f64::INFINITY, f64::min);
        for j in all.iter().filter(|j| !kept.contains(j)) {
            prop_assert!(coef[*j].abs() <= floor);
        }
    }

    #[test]
    fn constants_lie_on_the_constraint(k in 1usize..400, extra in 1usize..400, e in 2.1..50.0f64, ra in 0.01..5.0f64, rp in 0.01..5.0f64) {
        let n = k + extra;
        let (c1, c2) = choose_constants_volume(ra, rp, k, n, e).unwrap();
        prop_assert!((1.0 / c1 + 1.0 / c2 - 1.0).abs() < 1e-12);
        let lo = e / (e - 1.0);
        prop_assert!(c1 >= lo - 1e-12 && c1 <= e + 1e-12);
        prop_assert!(c2 >= lo - 1e-12 && c2 <= e + 1e-12);
        let (d1, d2) = choose_constants_diameter(ra, rp).unwrap();
        prop_assert!((1.0 / d1 + 1.0 / d2 - 1.0).abs() < 1e-12);
        prop_assert!((d1 * ra * ra - d2 * rp * rp).abs() < 1e-9 * (1.0 + d1 * ra * ra));
    }

    #[test]
    fn stein_shrinkage_is_bounded(y in vector(30), sigma2 in 0.1..4.0f64) {
        let fit = stein_shrink(y.view(), 30, sigma2).unwrap();
        prop_assert!(fit.l_hat >= 0.0 && fit.l_hat < 1.0);
        let shrunk = fit.mu_perp_hat.dot(&fit.mu_perp_hat).sqrt();
        prop_assert!(shrunk <= y.dot(&y).sqrt() * (1.0 + 1e-12) || fit.b > 2.0);
    }

    #[test]
    fn projections_are_idempotent_and_complementary(x in matrix(12, 4), v in vector(12)) {
        let basis = orthonormal_basis(x.view(), RANK_TOL).unwrap();
        let pv = basis.project(v.view());
        let ppv = basis.project(pv.view());
        let perp = basis.project_perp(v.view());
        for i in 0..12 {
            prop_assert!((pv[i] - ppv[i]).abs() < 1e-9);
            prop_assert!((pv[i] + perp[i] - v[i]).abs() < 1e-9);
        }
        prop_assert!(pv.dot(&perp).abs() < 1e-8 * (1.0 + v.dot(&v)));
    }

    #[test]
    fn two_step_set_contains_its_center(x in matrix(20, 6), y in vector(20), scale in 1.0..3.0f64, diameter in any::<bool>()) {
        let cand = match CandidateSet::new(x.view(), vec![0, 2, 5]) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        let data = Dataset::new(x.clone(), y, 1.0).unwrap();
        let cs = SureConstant { alpha: 0.025, value: 1.9, n: 20, n_sim: 1000 };
        let criterion = if diameter { Criterion::Diameter } else { Criterion::Volume };
        let set = build_two_step(&data, &cand, &TwoStepOptions::new(0.05, criterion), &cs).unwrap();
        prop_assert!(set.contains(set.center().view()).unwrap());
        // membership is monotone in the radii
        let mut bigger = set.clone();
        bigger.r_a_sq *= scale;
        bigger.r_perp_sq *= scale;
        let probe = set.center().mapv(|c| c + 0.3);
        if set.contains(probe.view()).unwrap() {
            prop_assert!(bigger.contains(probe.view()).unwrap());
        }
    }

    #[test]
    fn adaptive_boundary_sits_at_minus_z(r_n in -0.05..3.0f64, sigma2 in 0.2..3.0f64, n in 50usize..2000) {
        let z = normal_quantile(0.95).unwrap();
        if let Some(d) = adaptive_radius_sq(r_n, sigma2, n, z) {
            prop_assert!((adaptive_statistic(r_n, d, sigma2, n) + z).abs() < 1e-7);
            prop_assert!(adaptive_statistic(r_n, d * 0.99, sigma2, n) > -z);
        }
    }

    #[test]
    fn lasso_satisfies_kkt(x in matrix(25, 10), y in vector(25), lambda in 0.05..1.0f64) {
        let fit = lasso(x.view(), y.view(), lambda, 1e-10, DEFAULT_MAX_SWEEPS).unwrap();
        let problem = CdProblem::new(x.view(), y.view()).unwrap();
        prop_assert!(lasso_kkt_violation(&problem, &fit) < 1e-6);
    }

    #[test]
    fn upper_quantile_bounds_the_tail(mut v in prop::collection::vec(-5.0..5.0f64, 10..200), alpha in 0.01..0.5f64) {
        let q = upper_quantile(&mut v, alpha);
        let above = v.iter().filter(|&&x| x > q).count() as f64 / v.len() as f64;
        prop_assert!(above <= alpha + 1e-12);
    }

    #[test]
    fn config_json_round_trip(n in 20usize..500, b in 0.0..5.0f64, reps in 1usize..1000, seed in any::<u64>()) {
        let mut cfg = SimConfig::paper_default();
        cfg.n = n;
        cfg.b = b;
        cfg.replicates = reps;
        cfg.master_seed = seed;
        cfg.methods = Method::ALL.to_vec();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: SimConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
