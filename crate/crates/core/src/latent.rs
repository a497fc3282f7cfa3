use crate::error::{Error, Result};

/// Largest allowed deviation of a latent row sum from one.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Row-stochastic `rows x cols` matrix, stored row-major.
///
/// This is both the encoder's normalized latent code and the generator's
/// output: row `t` is the post-selected distribution of sub-generator `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl LatentMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot form a {rows}x{cols} latent matrix",
                data.len()
            )));
        }
        for (i, row) in data.chunks(cols).enumerate() {
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::Domain(format!("latent row {i} has entry {v}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Domain(format!("latent row {i} sums to {sum}")));
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_rows_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row-major flattening, the discriminator's input layout.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}
