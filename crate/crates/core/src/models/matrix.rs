use crate::dataset::FeatureVector;
use crate::error::{Error, Result};

/// Dense row-major feature matrix.
#[derive(Debug, Clone)]
pub(crate) struct Matrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn from_vectors(inputs: &[FeatureVector]) -> Result<Self> {
        let n_cols = inputs.first().map(|v| v.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(inputs.len() * n_cols);
        for v in inputs {
            if v.len() != n_cols {
                return Err(Error::LengthMismatch {
                    expected: n_cols,
                    actual: v.len(),
                });
            }
            data.extend(v.iter().map(|&x| f64::from(x)));
        }
        Ok(Matrix {
            n_rows: inputs.len(),
            n_cols,
            data,
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }
}
