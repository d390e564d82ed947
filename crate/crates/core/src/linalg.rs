//! Small dense helpers shared by the kernels.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// Relative pivot threshold under which a QR diagonal entry marks a dependent column.
pub(crate) const RANK_TOL: f64 = 1e-12;

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub(crate) fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Least-squares solution of `a x ≈ b` through a Householder QR.
///
/// Columns whose pivot falls below `RANK_TOL` times the largest pivot are
/// reported as rank-deficient.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    if rows != b.len() {
        return Err(Error::invalid(alloc::format!(
            "matrix has {rows} rows but right-hand side has length {}",
            b.len()
        )));
    }
    if cols == 0 {
        return Ok(DVector::zeros(0));
    }
    if rows < cols {
        return Err(Error::RankDeficient {
            columns: (rows..cols).collect(),
        });
    }
    let qr = a.clone().qr();
    let r = qr.r();
    check_pivots(&r)?;
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::numeric("triangular solve failed"))
}

fn check_pivots(r: &DMatrix<f64>) -> Result<()> {
    let n = r.ncols();
    let largest = (0..n).fold(0.0f64, |acc, i| acc.max(r[(i, i)].abs()));
    let bad: Vec<usize> = (0..n)
        .filter(|&i| !(r[(i, i)].abs() > RANK_TOL * largest) || largest == 0.0)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient { columns: bad })
    }
}

/// `(aᵀa)⁻¹` computed from the QR factor of `a`.
pub fn gram_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::RankDeficient {
            columns: (rows..cols).collect(),
        });
    }
    let r = a.clone().qr().r();
    check_pivots(&r)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .ok_or_else(|| Error::numeric("triangular inverse failed"))?;
    Ok(&r_inv * r_inv.transpose())
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if !all_finite(m) {
        return f64::INFINITY;
    }
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Scale every column to unit 2-norm. Zero columns are left untouched and reported.
pub fn normalize_columns(m: &mut DMatrix<f64>) -> Vec<usize> {
    let mut zero = Vec::new();
    for j in 0..m.ncols() {
        let norm = m.column(j).norm();
        if norm > 0.0 && norm.is_finite() {
            m.column_mut(j).unscale_mut(norm);
        } else {
            zero.push(j);
        }
    }
    zero
}

/// Column-stacking vectorization.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}
