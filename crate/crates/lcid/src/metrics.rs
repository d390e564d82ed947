//! Performance measures for the model-reference control study.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{LcidError, Result};

/// Noise variance giving `10 log₁₀(‖Φθ₀‖² / (Nσ²)) = snr_db`.
pub fn snr_to_sigma2(snr_db: f64, phi: &DMatrix<f64>, theta0: &DVector<f64>) -> Result<f64> {
    if phi.ncols() != theta0.len() {
        return Err(LcidError::invalid(
            "regressor width and parameter length differ",
        ));
    }
    let power = (phi * theta0).norm_squared();
    if !(power > 0.0) {
        return Err(LcidError::invalid("noise-free output has zero energy"));
    }
    Ok(power / (phi.nrows() as f64 * 10f64.powf(snr_db / 10.0)))
}

/// Desired sensitivity `(1 − e^{−jω}) / (1 − a e^{−jω})`, `a = (1−η)/(1+η)`.
pub fn desired_sensitivity(eta: f64, omega: f64) -> Complex64 {
    let a = (1.0 - eta) / (1.0 + eta);
    let z = Complex64::from_polar(1.0, -omega);
    (1.0 - z) / (1.0 - a * z)
}

/// FIR frequency response `Σ θ_k e^{−j(k+1)ω}`; the first tap acts with one
/// sample of delay, which cancels in every ratio used here.
pub fn frequency_response(theta: &[f64], omega: f64) -> Complex64 {
    let step = Complex64::from_polar(1.0, -omega);
    let mut z = step;
    let mut acc = Complex64::new(0.0, 0.0);
    for &t in theta {
        acc += t * z;
        z *= step;
    }
    acc
}

/// Grid `ω_i = iπ/M`, `i = 1..=M`.
pub fn frequency_grid(grid_size: usize) -> Vec<f64> {
    (1..=grid_size)
        .map(|i| PI * i as f64 / grid_size as f64)
        .collect()
}

/// Model-reference performance degradation `½·(1/π)∫ |(S(Ĝ) − S)/S|² dω`.
///
/// The controller `C = (1−S)/(S Ĝ)` gives `S(Ĝ) = 1/(1 + G₀C)`, so the
/// relative mismatch is `(1−S)(1−ρ)/(S + ρ(1−S))` with `ρ = G₀/Ĝ`; that form
/// is evaluated directly and is exactly zero when `θ̂ = θ₀`. Trapezoidal
/// quadrature over `(0, π]`, skipping `ω = 0` where `S` vanishes.
pub fn v_app(theta_hat: &[f64], theta0: &[f64], eta: f64, grid_size: usize) -> Result<f64> {
    if grid_size < 2 {
        return Err(LcidError::invalid(
            "frequency grid needs at least two points",
        ));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(LcidError::invalid("eta must lie in [0, 1]"));
    }
    let grid = frequency_grid(grid_size);
    let h = PI / grid_size as f64;
    let mut acc = 0.0;
    for (i, &w) in grid.iter().enumerate() {
        let g_hat = frequency_response(theta_hat, w);
        if g_hat.norm() < 1e-12 {
            return Err(LcidError::DegenerateModel {
                omega: w,
                magnitude: g_hat.norm(),
            });
        }
        let s = desired_sensitivity(eta, w);
        let rho = frequency_response(theta0, w) / g_hat;
        let one = Complex64::new(1.0, 0.0);
        let ratio = (one - s) * (one - rho) / (s + rho * (one - s));
        let weight = if i == 0 || i + 1 == grid.len() {
            0.5 * h
        } else {
            h
        };
        acc += weight * ratio.norm_sqr();
    }
    Ok(0.5 * acc / PI)
}

/// `‖θ₀ − θ̂‖ / ‖θ₀‖`.
pub fn nrmse(theta_hat: &DVector<f64>, theta0: &DVector<f64>) -> Result<f64> {
    let denom = theta0.norm();
    if !(denom > 0.0) || theta_hat.len() != theta0.len() {
        return Err(LcidError::invalid(
            "nrmse needs a nonzero reference of matching length",
        ));
    }
    Ok((theta0 - theta_hat).norm() / denom)
}
