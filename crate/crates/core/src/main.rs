use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use honestsets::error::{Error, Result};
use honestsets::simlab::calibrate::{choose_eta, cs_rows, eta_grid, headline_c_l, headline_c_o, oracle_ratios, pilot_settings};
use honestsets::simlab::golden::{write_rows, GoldenConstant, CONSTANT_COLUMNS, CS_COLUMNS};
use honestsets::simlab::grid::paper_grid;
use honestsets::simlab::outputs::write_records;
use honestsets::simlab::{aggregate, annotate, emit_outputs, run_setting_detailed, BetaMode, Criterion, Design, Method, SimConfig, TrialRecord};
use honestsets::solvers::{LambdaKind, LambdaRule};
use honestsets::stein::CsCache;

#[derive(Parser)]
#[command(name = "honestsets", version, about = "Honest confidence sets for X beta: simulations and calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation setting.
    Run(RunArgs),
    /// Regenerate the frozen constants in the golden directory.
    Calibrate(CalibrateArgs),
    /// Run a whole grid of settings.
    Grid(GridArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON file mirroring SimConfig; other setting flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "toeplitz")]
    design: Design,
    #[arg(long, default_value = "uniform")]
    beta_mode: BetaMode,
    #[arg(long, default_value_t = 2.0)]
    b: f64,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 800)]
    p: usize,
    #[arg(long, default_value_t = 10)]
    s: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// val, cv or 1se
    #[arg(long, default_value = "1se")]
    lambda_rule: LambdaRule,
    /// Comma-separated; bare `stein` and `tsl` take --criterion.
    #[arg(long, default_value = "stein_vol,adaptive,oracle_lasso")]
    methods: String,
    #[arg(long, default_value = "volume")]
    criterion: Criterion,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    setting_id: u64,
    #[arg(long)]
    strict_multi: bool,
    #[arg(long)]
    oracle_eta: Option<f64>,
    #[arg(long)]
    record_timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value = concat!(env!("CARGO_MANIFEST_DIR"), "/golden"))]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    cs_sims: usize,
    #[arg(long, default_value_t = 500)]
    calib_sims: usize,
    /// Replicates per pilot setting for the oracle multipliers.
    #[arg(long, default_value_t = 10)]
    pilot_reps: usize,
}

#[derive(Args)]
struct GridArgs {
    /// The full simulation grid.
    #[arg(long)]
    paper: bool,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "stein_vol,stein_diam,adaptive,oracle_lasso,tsl_vol,tsl_diam,naive")]
    methods: String,
    /// Print the settings without running them.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_methods(list: &str, criterion: Criterion) -> Result<Vec<Method>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Method::parse_with_criterion(s, criterion))
        .collect()
}

fn run_config(args: &RunArgs) -> Result<SimConfig> {
    let cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => {
            let mut cfg = SimConfig::paper_default();
            cfg.setting_id = args.setting_id;
            cfg.design = args.design;
            cfg.beta_mode = args.beta_mode;
            cfg.b = args.b;
            cfg.n = args.n;
            cfg.p = args.p;
            cfg.s = args.s;
            cfg.sigma2 = args.sigma2;
            cfg.alpha = args.alpha;
            cfg.lambda_rule = args.lambda_rule.kind;
            cfg.methods = parse_methods(&args.methods, args.criterion)?;
            cfg.replicates = args.reps;
            cfg.master_seed = args.seed;
            cfg.strict_multi = args.strict_multi;
            cfg.oracle_eta = args.oracle_eta;
            cfg.record_timing = args.record_timing;
            cfg
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run_all(configs: &[SimConfig], out: &Path) -> Result<()> {
    let cs_cache = CsCache::new();
    let mut records: Vec<TrialRecord> = Vec::new();
    let mut n_errors = 0;
    for cfg in configs {
        let run = run_setting_detailed(cfg, &cs_cache)?;
        for e in run.errors.iter().take(5) {
            let method = e.method.map_or("data", |m| m.name());
            eprintln!("setting {} replicate {} {method}: {}", e.setting_id, e.replicate, e.message);
        }
        n_errors += run.errors.len();
        records.extend(run.records);
    }
    let mut summaries = aggregate(&records);
    annotate(&mut summaries, configs);
    emit_outputs(&records, &summaries, out)?;
    for row in &summaries {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "setting {:>4} {:<13} coverage {} mean r_bar {} mean k {} ({} ok, {} errors)",
            row.setting_id,
            row.method.name(),
            fmt(row.coverage),
            fmt(row.mean_r_bar),
            fmt(row.mean_k),
            row.trials,
            row.errors
        );
    }
    if n_errors > 0 {
        eprintln!("{n_errors} trial errors recorded as empty rows");
    }
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    eprintln!("c_s constants ...");
    let cs = cs_rows(&[200, 400], &[0.05, 0.025], &[args.seed, args.seed + 1, args.seed + 2], args.cs_sims)?;
    write_rows(&args.out_dir.join("cs_constants.csv"), &CS_COLUMNS, &cs)?;

    let mut constants: Vec<GoldenConstant> = Vec::new();
    for seed in [args.seed, args.seed + 1, args.seed + 2] {
        eprintln!("c_o / c_l, seed {seed} ...");
        constants.push(headline_c_o(seed, args.calib_sims)?);
        constants.push(headline_c_l(seed, args.calib_sims)?);
    }
    for rule in [LambdaKind::CvMin, LambdaKind::Cv1se] {
        let name = LambdaRule { kind: rule, folds: 0 }.name();
        eprintln!("oracle multiplier pilot for lambda {name} ...");
        let mut ratios = Vec::new();
        for cfg in pilot_settings(rule, args.seed, args.pilot_reps, args.calib_sims) {
            ratios.extend(oracle_ratios(&cfg)?);
        }
        let alpha = SimConfig::paper_default().alpha;
        let (eta, coverage) = choose_eta(ndarray::Array1::from(ratios.clone()).view(), alpha, &eta_grid());
        eprintln!("  eta = {eta} (pilot coverage {coverage:.3} over {} data sets)", ratios.len());
        constants.push(GoldenConstant {
            kind: "eta".into(),
            context: name.into(),
            alpha,
            seed: args.seed,
            n_sim: ratios.len(),
            value: eta,
        });
    }
    write_rows(&args.out_dir.join("calibration_constants.csv"), &CONSTANT_COLUMNS, &constants)?;

    eprintln!("golden replicate ...");
    let mut cfg = SimConfig::paper_default();
    cfg.replicates = 1;
    cfg.master_seed = args.seed;
    cfg.methods = vec![Method::SteinVol, Method::SteinDiam, Method::Naive];
    let run = run_setting_detailed(&cfg, &CsCache::new())?;
    write_records(&args.out_dir.join("golden_replicate.csv"), &run.records)
}

fn grid(args: &GridArgs) -> Result<()> {
    if !args.paper {
        return Err(Error::Config("only the paper grid is available; pass --paper".into()));
    }
    let methods = parse_methods(&args.methods, Criterion::Volume)?;
    let configs = paper_grid(args.seed, args.reps, &methods);
    if args.list {
        for c in &configs {
            println!(
                "{:>4} {:<9} {:<7} s={:<3} lambda={:<3} b={}",
                c.setting_id,
                c.design.name(),
                c.beta_mode.name(),
                c.s,
                c.lambda_rule().name(),
                c.b
            );
        }
        return Ok(());
    }
    let out = args.out.as_ref().ok_or_else(|| Error::Config("--out is required unless --list is given".into()))?;
    run_all(&configs, out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run_config(args).and_then(|cfg| run_all(std::slice::from_ref(&cfg), &args.out)),
        Command::Calibrate(args) => calibrate(args),
        Command::Grid(args) => grid(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
