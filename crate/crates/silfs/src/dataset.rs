use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A regression problem: response vector `y` of length `n` and design matrix
/// `x` of shape `n × p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub response: DVector<f64>,
    pub design: DMatrix<f64>,
}

impl Dataset {
    /// Validates dimensions (`n ≥ 2`, `p ≥ 1`) and finiteness of all entries.
    pub fn new(response: DVector<f64>, design: DMatrix<f64>) -> Result<Self> {
        let n = response.len();
        if design.nrows() != n {
            return Err(Error::Data(format!(
                "response has {} rows but design has {}",
                n,
                design.nrows()
            )));
        }
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 samples, got {n}")));
        }
        if design.ncols() < 1 {
            return Err(Error::Data("design matrix has no columns".into()));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite response at row {}", i + 1)));
        }
        for j in 0..design.ncols() {
            for i in 0..design.nrows() {
                if !design[(i, j)].is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite design entry at row {}, column {}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { response, design })
    }

    pub fn num_samples(&self) -> usize {
        self.response.len()
    }

    pub fn num_features(&self) -> usize {
        self.design.ncols()
    }
}
