//! Response/covariate sample container.

use ndarray::{Array1, Array2};

use crate::error::{Result, SimCheckError};

/// A sample of `n` observations: scalar responses `y` and an `n x p`
/// covariate matrix `x`. Construction validates shapes and finiteness; the
/// checks themselves additionally require `p >= 2` so that at least one
/// direction orthogonal to the index exists.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Array1<f64>,
    x: Array2<f64>,
}

impl Dataset {
    /// Build a dataset, rejecting shape mismatches, `n < 2`, `p < 1`, and
    /// any non-finite cell.
    pub fn new(y: Array1<f64>, x: Array2<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(SimCheckError::DimensionMismatch {
                context: "dataset rows",
                expected: y.len(),
                got: x.nrows(),
            });
        }
        if y.len() < 2 {
            return Err(SimCheckError::SampleTooSmall { n: y.len(), min: 2 });
        }
        if x.ncols() == 0 {
            return Err(SimCheckError::DataFormat {
                reason: "covariate matrix has no columns".to_string(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(SimCheckError::NonFinite {
                context: format!("response, observation {}", i + 1),
            });
        }
        for ((i, j), v) in x.indexed_iter() {
            if !v.is_finite() {
                return Err(SimCheckError::NonFinite {
                    context: format!("covariate x{}, observation {}", j + 1, i + 1),
                });
            }
        }
        Ok(Dataset { y, x })
    }

    /// Replace the responses, keeping the covariates (used by the wild
    /// bootstrap). The new responses must be finite and of matching length.
    pub fn with_responses(&self, y: Array1<f64>) -> Result<Self> {
        Dataset::new(y, self.x.clone())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }
}
