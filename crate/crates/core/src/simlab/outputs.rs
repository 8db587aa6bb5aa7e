//! CSV outputs and the gnuplot script that renders them.

use std::fmt::Write as _;
use std::path::Path;

use super::config::Method;
use super::golden::{read_rows, write_rows};
use super::runner::{SummaryRow, TrialRecord};
use crate::error::{Error, Result};

pub const TRIAL_COLUMNS: [&str; 10] = ["setting_id", "replicate", "method", "covered", "r_bar", "r_A", "r_perp", "k", "m_star", "wall_ms"];
pub const SUMMARY_COLUMNS: [&str; 12] = [
    "setting_id",
    "method",
    "design",
    "beta_mode",
    "lambda_rule",
    "s",
    "b",
    "trials",
    "errors",
    "coverage",
    "mean_r_bar",
    "mean_k",
];

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    write_rows(path, &TRIAL_COLUMNS, records)
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    read_rows(path)
}

pub fn write_summaries(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_rows(path, &SUMMARY_COLUMNS, rows)
}

pub fn read_summaries(path: &Path) -> Result<Vec<SummaryRow>> {
    read_rows(path)
}

// 1-based column positions in summary.csv
fn col(name: &str) -> usize {
    SUMMARY_COLUMNS.iter().position(|c| *c == name).expect("known column") + 1
}

/// Gnuplot script: radius against `b` per design and beta mode, and coverage box plots per method.
pub fn plot_script(summaries: &[SummaryRow]) -> String {
    let mut methods: Vec<Method> = summaries.iter().map(|r| r.method).collect();
    methods.sort_unstable();
    methods.dedup();
    let mut panels: Vec<(String, String)> = summaries
        .iter()
        .filter_map(|r| Some((r.design.clone()?, r.beta_mode.clone()?)))
        .collect();
    panels.sort();
    panels.dedup();
    let names: Vec<&str> = methods.iter().map(Method::name).collect();
    let (c_method, c_design, c_mode, c_b, c_cov, c_rbar) =
        (col("method"), col("design"), col("beta_mode"), col("b"), col("coverage"), col("mean_r_bar"));

    let mut s = String::new();
    let _ = writeln!(s, "# radius against b and coverage box plots from summary.csv");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 1400,900");
    let _ = writeln!(s, "methods = \"{}\"", names.join(" "));
    let _ = writeln!(s);
    let _ = writeln!(s, "set output 'radius_vs_b.png'");
    let cols = panels.len().clamp(1, 3);
    let rows = panels.len().div_ceil(cols).max(1);
    let _ = writeln!(s, "set multiplot layout {rows},{cols}");
    let _ = writeln!(s, "set xlabel 'b'");
    let _ = writeln!(s, "set ylabel 'geometric average radius'");
    for (design, mode) in &panels {
        let _ = writeln!(s, "set title '{design} / {mode}'");
        let _ = writeln!(
            s,
            "plot for [m in methods] 'summary.csv' every ::1 using {c_b}:((strcol({c_method}) eq m && strcol({c_design}) eq '{design}' && strcol({c_mode}) eq '{mode}') ? ${c_rbar} : 1/0) smooth unique with linespoints title m"
        );
    }
    let _ = writeln!(s, "unset multiplot");
    let _ = writeln!(s);
    let _ = writeln!(s, "set output 'coverage.png'");
    let _ = writeln!(s, "set style data boxplot");
    let _ = writeln!(s, "set title 'coverage across settings'");
    let _ = writeln!(s, "set xlabel ''");
    let _ = writeln!(s, "set ylabel 'coverage'");
    let _ = writeln!(s, "unset key");
    let _ = writeln!(s, "set xtics ({})", names.iter().enumerate().map(|(i, m)| format!("'{m}' {}", i + 1)).collect::<Vec<_>>().join(", "));
    let _ = writeln!(
        s,
        "plot for [i=1:words(methods)] 'summary.csv' every ::1 using (i):(strcol({c_method}) eq word(methods, i) ? ${c_cov} : 1/0)"
    );
    s
}

/// Writes `trials.csv`, `summary.csv` and `plots.gp` into `out_dir`, creating it if needed.
pub fn emit_outputs(records: &[TrialRecord], summaries: &[SummaryRow], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write_records(&out_dir.join("trials.csv"), records)?;
    write_summaries(&out_dir.join("summary.csv"), summaries)?;
    let plots = out_dir.join("plots.gp");
    std::fs::write(&plots, plot_script(summaries)).map_err(|source| Error::Io { path: plots, source })
}
