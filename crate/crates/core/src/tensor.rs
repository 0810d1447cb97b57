//! Plain serializable matrix container (column-major).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixData {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.rows * self.cols != self.data.len() {
            return Err(Error::Shape(format!(
                "{}x{} matrix needs {} values, found {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_column_slice(self.rows, self.cols, &self.data))
    }

    pub fn to_vector(&self) -> Result<DVector<f64>> {
        if self.cols != 1 || self.data.len() != self.rows {
            return Err(Error::Shape(format!("expected a column vector, found {}x{}", self.rows, self.cols)));
        }
        Ok(DVector::from_column_slice(&self.data))
    }
}

impl From<&DMatrix<f64>> for MatrixData {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }
}

impl From<&DVector<f64>> for MatrixData {
    fn from(v: &DVector<f64>) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.as_slice().to_vec(),
        }
    }
}
