pub mod competitors;
pub mod confset;
pub mod dataset;
pub mod error;
pub mod numkit;
pub mod simlab;
pub mod solvers;
pub mod stein;

pub use dataset::Dataset;
pub use error::{Error, Result};
