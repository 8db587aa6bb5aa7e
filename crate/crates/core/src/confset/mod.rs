//! Two-step projection and shrinkage confidence sets for the mean `X beta`.

mod sets;
mod two_step;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use sets::{generate_candidates, naive_chi2_ball, nested_candidates, select_best, BallCS, CandidateSet, EllipsoidCS, Geometry};
pub use two_step::{
    assemble_ellipsoid, build_two_step, choose_constants_diameter, choose_constants_volume, expected_sq_diameter, radius_a_multi,
    radius_a_single, stein_confidence_set, RadiusMode, Selection, TwoStepOptions, DEFAULT_E,
};

/// How `(c1, c2)` are chosen and the best candidate picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Volume,
    Diameter,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "volume" | "vol" => Ok(Criterion::Volume),
            "diameter" | "diam" => Ok(Criterion::Diameter),
            other => Err(Error::Config(format!("unknown criterion '{other}'"))),
        }
    }
}

