//! Projection, proximal and factorization kernels used by every design step.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::regressor::RegressorMatrix;

/// A real symmetric matrix. Construction symmetrizes as `(M + Mᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid(alloc::format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let t = m.transpose();
        Ok(SymMatrix((m + t) * 0.5))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// `self + shift·I`, still symmetric.
    pub fn shifted(&self, shift: f64) -> SymMatrix {
        let n = self.dim();
        SymMatrix(&self.0 + DMatrix::identity(n, n) * shift)
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix(&self.0 * factor)
    }
}

/// Eigenvalue floor `ε > 0` of the positive-definite correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PsdFloor(f64);

impl TryFrom<f64> for PsdFloor {
    type Error = Error;

    fn try_from(epsilon: f64) -> Result<Self> {
        PsdFloor::new(epsilon)
    }
}

impl From<PsdFloor> for f64 {
    fn from(floor: PsdFloor) -> f64 {
        floor.0
    }
}

impl PsdFloor {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(PsdFloor(epsilon))
        } else {
            Err(Error::invalid("PSD floor must be a positive finite number"))
        }
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }
}

impl Default for PsdFloor {
    fn default() -> Self {
        PsdFloor(1e-10)
    }
}

/// Euclidean projection of `v` onto the ℓ1 ball `{x : ‖x‖₁ ≤ radius}`.
///
/// Exact sort-and-threshold method: find the soft threshold `τ` whose
/// shrinkage removes exactly the excess ℓ1 mass.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::invalid(
            "l1-ball radius must be finite and non-negative",
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(
            "l1-ball projection input contains non-finite entries",
        ));
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return Ok(v.to_vec());
    }
    if radius == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cumulative += m;
        let candidate = (cumulative - radius) / (j + 1) as f64;
        if m - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    Ok(v.iter()
        .map(|&x| x.signum() * (x.abs() - tau).max(0.0))
        .collect())
}

/// Proximal map of `eta·‖·‖∞`, via the Moreau split `v − P_{‖·‖₁ ≤ eta}(v)`.
pub fn prox_inf_norm(v: &[f64], eta: f64) -> Result<Vec<f64>> {
    let p = project_l1_ball(v, eta)?;
    Ok(v.iter().zip(&p).map(|(a, b)| a - b).collect())
}

/// Nearest (Frobenius) symmetric matrix with every eigenvalue at least `ε`.
///
/// Inputs already above the floor are returned unchanged.
pub fn nearest_psd(m: &SymMatrix, floor: PsdFloor) -> Result<SymMatrix> {
    clip_spectrum(m, floor.epsilon())
}

/// Eigenvalue clipping `E max(floor, L) Eᵀ`; `floor` may be zero here.
pub(crate) fn clip_spectrum(m: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    if !all_finite(m.as_matrix()) {
        return Err(Error::numeric("eigendecomposition of a non-finite matrix"));
    }
    let eig = m.as_matrix().clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("eigendecomposition did not converge"));
    }
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return Ok(m.clone());
    }
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let e = &eig.eigenvectors;
    SymMatrix::new(e * DMatrix::from_diagonal(&clipped) * e.transpose())
}

/// Symmetric square root of a PSD matrix.
///
/// Eigenvalues in `[−1e−8·‖m‖₂, 0)` are treated as rounding noise and set to zero.
pub fn psd_sqrt(m: &SymMatrix) -> Result<DMatrix<f64>> {
    if !all_finite(m.as_matrix()) {
        return Err(Error::numeric("square root of a non-finite matrix"));
    }
    let eig = m.as_matrix().clone().symmetric_eigen();
    let spectral = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let tolerance = 1e-8 * spectral;
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min < -tolerance {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            tolerance,
        });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let e = &eig.eigenvectors;
    let s = e * DMatrix::from_diagonal(&roots) * e.transpose();
    let st = s.transpose();
    Ok((s + st) * 0.5)
}

/// Which side of the product the semi-unitary factor multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Return `X` maximizing `tr(p X)`.
    AsGiven,
    /// Return `X` maximizing `tr(pᵀ X)`.
    Transposed,
}

/// Orthogonal Procrustes factor.
///
/// For `p` of shape `a × b` with `a ≤ b` and SVD `p = Ū Σ Ũᵀ`, `AsGiven`
/// returns the `b × a` matrix `Ũ Ūᵀ`, the semi-unitary maximizer of
/// `tr(p X)`. `Transposed` applies the same kernel to `pᵀ`. The factor is
/// not unique when `p` is rank deficient; any SVD-consistent one is returned.
pub fn orthogonal_factor(p: &DMatrix<f64>, orientation: Orientation) -> Result<DMatrix<f64>> {
    let p = match orientation {
        Orientation::AsGiven => p.clone(),
        Orientation::Transposed => p.transpose(),
    };
    let (a, b) = p.shape();
    if a > b {
        return Err(Error::invalid(alloc::format!(
            "orthogonal factor needs a wide product (rows <= cols), got {a}x{b}"
        )));
    }
    if !all_finite(&p) {
        return Err(Error::numeric("orthogonal factor of a non-finite matrix"));
    }
    let svd = p.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::numeric("SVD failed")),
    };
    Ok(v_t.transpose() * u.transpose())
}

/// Weighted least-squares fit of a Toeplitz matrix to a set of targets.
///
/// Minimizes `Σ w_t ‖Wc − vec(target_t)‖²` over the diagonal coefficients
/// `c_l`, `l = −N+1, …, n_θ−1`. `WᵀW` is diagonal, holding the length of each
/// diagonal, so the minimizer is the weighted mean along every diagonal.
pub fn toeplitz_ls_fit(
    targets: &[(&DMatrix<f64>, f64)],
) -> Result<(DVector<f64>, RegressorMatrix)> {
    let (rows, cols) = match targets.first() {
        Some((m, _)) => m.shape(),
        None => return Err(Error::invalid("toeplitz fit needs at least one target")),
    };
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("toeplitz fit targets must be non-empty"));
    }
    let mut total_weight = 0.0;
    for (m, w) in targets {
        if m.shape() != (rows, cols) {
            return Err(Error::invalid(alloc::format!(
                "toeplitz fit target is {}x{}, expected {rows}x{cols}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !(*w >= 0.0) || !w.is_finite() {
            return Err(Error::invalid(
                "toeplitz fit weights must be finite and non-negative",
            ));
        }
        total_weight += w;
    }
    if !(total_weight > 0.0) {
        return Err(Error::invalid(
            "toeplitz fit needs a target with positive weight",
        ));
    }

    // Index p = l + N − 1 for the diagonal j − i = l.
    let len = rows + cols - 1;
    let mut sums = vec![0.0; len];
    let mut counts = vec![0usize; len];
    for (m, w) in targets {
        for j in 0..cols {
            for i in 0..rows {
                sums[j + rows - 1 - i] += w * m[(i, j)];
            }
        }
    }
    for j in 0..cols {
        for i in 0..rows {
            counts[j + rows - 1 - i] += 1;
        }
    }
    let diagonals: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / (c as f64 * total_weight))
        .collect();
    let regressor = RegressorMatrix::from_diagonals(&diagonals, rows, cols)?;
    Ok((DVector::from_vec(diagonals), regressor))
}
