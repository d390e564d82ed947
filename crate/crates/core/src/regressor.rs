use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An `N × n_θ` Toeplitz regressor `Φ(t, k) = u′(t − k)` together with the
/// sequence that generates it.
///
/// The generator holds `u′(t)` for `t = 1 − n_θ, …, N − 1`, so its length is
/// always `N + n_θ − 1` and `generator[i − j + n_θ − 1]` is entry `(i, j)`
/// (zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorMatrix {
    generator: Vec<f64>,
    rows: usize,
    cols: usize,
    matrix: DMatrix<f64>,
}

impl RegressorMatrix {
    pub fn from_generator(generator: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("regressor dimensions must be positive"));
        }
        let needed = rows + cols - 1;
        if generator.len() != needed {
            return Err(Error::invalid(alloc::format!(
                "a {rows}x{cols} Toeplitz regressor needs {needed} generator samples, got {}",
                generator.len()
            )));
        }
        let matrix = DMatrix::from_fn(rows, cols, |i, j| generator[i + cols - 1 - j]);
        Ok(RegressorMatrix {
            generator,
            rows,
            cols,
            matrix,
        })
    }

    /// Builds from Toeplitz diagonal coefficients `c_l`, `l = −N+1, …, n_θ−1`,
    /// where `c_l` sits on the entries `(i, i + l)`.
    pub fn from_diagonals(diagonals: &[f64], rows: usize, cols: usize) -> Result<Self> {
        let needed = rows + cols - 1;
        if diagonals.len() != needed {
            return Err(Error::invalid(alloc::format!(
                "expected {needed} diagonal coefficients, got {}",
                diagonals.len()
            )));
        }
        let generator = diagonals.iter().rev().copied().collect();
        Self::from_generator(generator, rows, cols)
    }

    pub fn generator(&self) -> &[f64] {
        &self.generator
    }

    /// Diagonal coefficients in `l = −N+1, …, n_θ−1` order.
    pub fn diagonals(&self) -> Vec<f64> {
        self.generator.iter().rev().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `ΦᵀΦ`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.matrix.tr_mul(&self.matrix)
    }

    pub fn is_toeplitz(m: &DMatrix<f64>) -> bool {
        let (rows, cols) = m.shape();
        (0..rows.saturating_sub(1))
            .all(|i| (0..cols.saturating_sub(1)).all(|j| m[(i, j)] == m[(i + 1, j + 1)]))
    }
}
