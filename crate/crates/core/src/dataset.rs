use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Design matrix, response and known noise variance.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub sigma2: f64,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, sigma2: f64) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Domain(format!("noise variance {sigma2} must be positive")));
        }
        Ok(Self { x, y, sigma2 })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Row-wise concatenation of two datasets sharing `p` and `sigma2`.
    pub fn stack(&self, other: &Dataset) -> Result<Dataset> {
        if self.p() != other.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: other.p(),
            });
        }
        let x = ndarray::concatenate(ndarray::Axis(0), &[self.x.view(), other.x.view()])
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let y = ndarray::concatenate(ndarray::Axis(0), &[self.y.view(), other.y.view()])
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Dataset::new(x, y, self.sigma2)
    }
}
