//! Frozen calibration constants shipped with the crate.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{LambdaKind, LambdaRule};

pub const CALIBRATION_CONSTANTS: &str = include_str!("../../golden/calibration_constants.csv");
pub const CS_CONSTANTS: &str = include_str!("../../golden/cs_constants.csv");

/// One row of `calibration_constants.csv`. `context` is a hex design digest
/// for `c_o` / `c_l`, and the lambda rule name for `eta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenConstant {
    pub kind: String,
    pub context: String,
    pub alpha: f64,
    pub seed: u64,
    pub n_sim: usize,
    pub value: f64,
}

/// One row of `cs_constants.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsRow {
    pub n: usize,
    pub alpha: f64,
    pub n_sim: usize,
    pub master_seed: u64,
    pub value: f64,
}

pub fn parse_rows<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|source| Error::Csv {
            path: "<embedded>".into(),
            source,
        })
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    csv::Reader::from_path(path)
        .map_err(csv_err)?
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_err)
}

/// Writes `rows` under an explicit header, so an empty list still yields a header line.
pub fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub const CONSTANT_COLUMNS: [&str; 6] = ["kind", "context", "alpha", "seed", "n_sim", "value"];
pub const CS_COLUMNS: [&str; 5] = ["n", "alpha", "n_sim", "master_seed", "value"];

/// The oracle-lasso multiplier frozen for a data-driven lambda rule.
pub fn frozen_eta(kind: LambdaKind, alpha: f64) -> Option<f64> {
    let context = LambdaRule { kind, folds: 0 }.name();
    parse_rows::<GoldenConstant>(CALIBRATION_CONSTANTS)
        .ok()?
        .into_iter()
        .find(|c| c.kind == "eta" && c.context == context && c.alpha == alpha)
        .map(|c| c.value)
}
