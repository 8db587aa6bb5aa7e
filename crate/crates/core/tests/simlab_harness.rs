mod common;

use std::collections::HashMap;
use std::path::Path;

use approx::assert_abs_diff_eq;
use rand::Rng;

use common::frequency;
use honestsets::confset::nested_candidates;
use honestsets::numkit::RngStream;
use honestsets::simlab::outputs::write_records;
use honestsets::simlab::runner::{replicate_stream, THREADS_ENV};
use honestsets::simlab::{
    aggregate, build_covariance, emit_outputs, read_records, read_summaries, run_setting, sample_dataset, BetaMode, Design,
    Method, SimConfig, TrialRecord, SUMMARY_COLUMNS, TRIAL_COLUMNS,
};
use honestsets::solvers::{lasso, select_lambda, LambdaKind, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};

fn small_config() -> SimConfig {
    let mut cfg = SimConfig::paper_default();
    cfg.setting_id = 7;
    cfg.n = 60;
    cfg.p = 120;
    cfg.s = 5;
    cfg.lambda_rule = LambdaKind::Theoretical;
    cfg.replicates = 6;
    cfg.calib_sims = 100;
    cfg.cs_sims = 10_000;
    cfg.methods = Method::ALL.to_vec();
    cfg
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn outputs_round_trip_with_fixed_columns() {
    let cfg = small_config();
    let records = run_setting(&cfg).unwrap();
    assert_eq!(records.len(), cfg.replicates * cfg.methods.len());
    let dir = tempfile::tempdir().unwrap();
    let summaries = aggregate(&records);
    emit_outputs(&records, &summaries, dir.path()).unwrap();

    assert_eq!(header(&dir.path().join("trials.csv")), TRIAL_COLUMNS.join(","));
    assert_eq!(header(&dir.path().join("summary.csv")), SUMMARY_COLUMNS.join(","));
    assert_eq!(read_records(&dir.path().join("trials.csv")).unwrap(), records);
    assert_eq!(read_summaries(&dir.path().join("summary.csv")).unwrap(), summaries);
    assert!(dir.path().join("plots.gp").exists());
    for r in &records {
        assert_eq!(r.wall_ms, 0);
        assert!(r.covered.is_some(), "{r:?}");
    }
}

#[test]
fn empty_outputs_still_have_headers() {
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(&[], &[], dir.path()).unwrap();
    let trials = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert_eq!(trials.trim_end(), TRIAL_COLUMNS.join(","));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.trim_end(), SUMMARY_COLUMNS.join(","));
    assert!(read_records(&dir.path().join("trials.csv")).unwrap().is_empty());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for threads in ["1", "3"] {
        std::env::set_var(THREADS_ENV, threads);
        let records = run_setting(&cfg).unwrap();
        let path = dir.path().join(format!("t{threads}.csv"));
        write_records(&path, &records).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    std::env::remove_var(THREADS_ENV);
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn aggregate_matches_streaming_recomputation() {
    let mut rng = RngStream::new(30, 0);
    let records: Vec<TrialRecord> = (0..10_000u64)
        .map(|i| {
            let failed = rng.random_bool(0.05);
            TrialRecord {
                setting_id: rng.random_range(0..7),
                replicate: i,
                method: Method::ALL[rng.random_range(0..7)],
                covered: (!failed).then(|| rng.random_bool(0.9) as u8),
                r_bar: (!failed).then(|| rng.random_range(0.0..3.0)),
                r_a: (!failed).then(|| rng.random_range(0.0..3.0)),
                r_perp: (!failed).then(|| rng.random_range(0.0..3.0)),
                k: (!failed).then(|| rng.random_range(0..40)),
                m_star: (!failed).then(|| rng.random_range(0..80)),
                wall_ms: 0,
            }
        })
        .collect();
    // one pass of running means per key
    let mut running: HashMap<(u64, Method), (usize, usize, f64, f64, f64)> = HashMap::new();
    for r in &records {
        let e = running.entry((r.setting_id, r.method)).or_default();
        match (r.covered, r.r_bar, r.k) {
            (Some(c), Some(rb), Some(k)) => {
                e.0 += 1;
                let w = 1.0 / e.0 as f64;
                e.2 += (c as f64 - e.2) * w;
                e.3 += (rb - e.3) * w;
                e.4 += (k as f64 - e.4) * w;
            }
            _ => e.1 += 1,
        }
    }
    let rows = aggregate(&records);
    assert_eq!(rows.len(), running.len());
    for row in rows {
        let e = running[&(row.setting_id, row.method)];
        assert_eq!((row.trials, row.errors), (e.0, e.1));
        assert_abs_diff_eq!(row.coverage.unwrap(), e.2, epsilon = 1e-12);
        assert_abs_diff_eq!(row.mean_r_bar.unwrap(), e.3, epsilon = 1e-12);
        assert_abs_diff_eq!(row.mean_k.unwrap(), e.4, epsilon = 1e-12);
    }
}

#[test]
fn candidates_ignore_the_evaluation_response() {
    let mut cfg = small_config();
    cfg.b = 3.0;
    let factor = build_covariance(cfg.design, cfg.p).unwrap();
    let mut rng = replicate_stream(cfg.master_seed, cfg.setting_id, 0);
    let (eval, fit, _) = sample_dataset(&cfg, &factor, &mut rng).unwrap();
    let lambda = select_lambda(fit.x.view(), fit.y.view(), fit.sigma(), cfg.lambda_rule(), &mut rng.derive(1)).unwrap();
    let beta = lasso(fit.x.view(), fit.y.view(), lambda, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).unwrap().coefficients;
    let before = nested_candidates(eval.x.view(), beta.view(), lambda, &cfg.a_grid).unwrap();

    // the held-out response never enters candidate construction
    let mut tainted = eval.clone();
    tainted.y.mapv_inplace(|v| v + 100.0);
    let after = nested_candidates(tainted.x.view(), beta.view(), lambda, &cfg.a_grid).unwrap();
    assert_eq!(before.len(), after.len());
    for (a, b) in before.iter().zip(&after) {
        assert_eq!(a.indices(), b.indices());
        assert_eq!(a.basis().q(), b.basis().q());
    }
}

#[test]
fn toeplitz_neighbours_correlate_at_one_half() {
    let mut cfg = small_config();
    cfg.n = 2000;
    cfg.p = 20;
    cfg.design = Design::Toeplitz;
    cfg.beta_mode = BetaMode::Uniform;
    let factor = build_covariance(cfg.design, cfg.p).unwrap();
    let (a, b, _) = sample_dataset(&cfg, &factor, &mut RngStream::new(31, 0)).unwrap();
    let x = ndarray::concatenate(ndarray::Axis(0), &[a.x.view(), b.x.view()]).unwrap();
    for j in 0..cfg.p - 1 {
        let (u, v) = (x.column(j), x.column(j + 1));
        let corr = u.dot(&v) / (u.dot(&u) * v.dot(&v)).sqrt();
        assert!((corr - 0.5).abs() <= 0.1, "column {j}: {corr}");
    }
}

#[test]
fn naive_ball_coverage_in_small_setting() {
    let mut cfg = small_config();
    cfg.methods = vec![Method::Naive];
    cfg.replicates = 1000;
    let records = run_setting(&cfg).unwrap();
    let hits = records.iter().filter(|r| r.covered == Some(1)).count();
    let (f, se) = frequency(hits, records.len());
    assert!((f - 0.95).abs() <= 4.0 * se, "coverage {f}");
}

#[test]
fn golden_replicate_is_reproduced() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("golden/golden_replicate.csv");
    let golden = read_records(&path).unwrap();
    let mut cfg = SimConfig::paper_default();
    cfg.replicates = 1;
    cfg.methods = vec![Method::SteinVol, Method::SteinDiam, Method::Naive];
    let records = run_setting(&cfg).unwrap();
    assert_eq!(records, golden);
    let dir = tempfile::tempdir().unwrap();
    write_records(&dir.path().join("t.csv"), &records).unwrap();
    assert_eq!(std::fs::read(dir.path().join("t.csv")).unwrap(), std::fs::read(&path).unwrap());
}

mod frozen {
    use honestsets::simlab::calibrate::cs_rows;
    use honestsets::simlab::golden::{frozen_eta, parse_rows, CsRow, GoldenConstant, CALIBRATION_CONSTANTS, CS_CONSTANTS};
    use honestsets::solvers::LambdaKind;

    fn spread_ok(values: &[f64], tol: impl Fn(f64) -> f64) -> bool {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.iter().all(|v| (v - mean).abs() <= tol(mean))
    }

    #[test]
    fn cs_constants_are_stable_across_seeds() {
        let rows: Vec<CsRow> = parse_rows(CS_CONSTANTS).unwrap();
        assert_eq!(rows.len(), 12);
        for n in [200, 400] {
            for alpha in [0.05, 0.025] {
                let values: Vec<f64> = rows.iter().filter(|r| r.n == n && r.alpha == alpha).map(|r| r.value).collect();
                assert_eq!(values.len(), 3);
                assert!(spread_ok(&values, |_| 0.01), "n {n} alpha {alpha}: {values:?}");
            }
        }
    }

    #[test]
    fn cs_constant_regenerates_exactly() {
        let rows: Vec<CsRow> = parse_rows(CS_CONSTANTS).unwrap();
        let row = rows.iter().find(|r| r.n == 200 && r.alpha == 0.025).unwrap();
        let fresh = cs_rows(&[200], &[0.025], &[row.master_seed], row.n_sim).unwrap();
        assert_eq!(&fresh[0], row);
    }

    #[test]
    fn lasso_constants_are_stable_across_seeds() {
        let rows: Vec<GoldenConstant> = parse_rows(CALIBRATION_CONSTANTS).unwrap();
        for kind in ["c_o", "c_l"] {
            let values: Vec<f64> = rows.iter().filter(|r| r.kind == kind).map(|r| r.value).collect();
            assert_eq!(values.len(), 3, "{kind}");
            assert!(spread_ok(&values, |m| 0.05 * m), "{kind}: {values:?}");
        }
        assert!(frozen_eta(LambdaKind::CvMin, 0.05).is_some());
        assert!(frozen_eta(LambdaKind::Cv1se, 0.05).is_some());
        assert!(frozen_eta(LambdaKind::Cv1se, 0.1).is_none());
    }
}
