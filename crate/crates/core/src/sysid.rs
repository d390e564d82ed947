//! Model structures, regressor construction, coherence and Fisher-information
//! computations, and desired-information construction from an input spectrum.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proxops::{clip_spectrum, SymMatrix};
pub use crate::regressor::RegressorMatrix;

/// Mutual coherence: the largest normalized absolute inner product between
/// two distinct columns.
pub fn mutual_coherence(a: &DMatrix<f64>) -> Result<f64> {
    if a.ncols() < 2 {
        return Err(Error::invalid(
            "mutual coherence needs at least two columns",
        ));
    }
    let mut unit = a.clone();
    for j in 0..unit.ncols() {
        let norm = unit.column(j).norm();
        if !(norm > 0.0) {
            return Err(Error::ZeroColumn(j));
        }
        unit.column_mut(j).unscale_mut(norm);
    }
    let gram = unit.tr_mul(&unit);
    let mut mu = 0.0f64;
    for j in 0..gram.ncols() {
        for i in 0..j {
            mu = mu.max(gram[(i, j)].abs());
        }
    }
    Ok(mu.min(1.0))
}

/// Threshold `1/(3s)` below which ℓ1 recovery of an `s`-sparse vector is stable.
pub fn coherence_bound(s: usize) -> f64 {
    1.0 / (3.0 * s as f64)
}

/// `μ(a) < 1/(3s)`.
pub fn coherence_condition(a: &DMatrix<f64>, s: usize) -> Result<bool> {
    if s == 0 {
        return Err(Error::invalid("sparsity level must be at least 1"));
    }
    Ok(mutual_coherence(a)? < coherence_bound(s))
}

/// All-pole prefilter `F(q) = gain / (1 + a₁q⁻¹ + … + a_P q⁻ᴾ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedDenominatorFilter {
    denominator: Vec<f64>,
    gain: f64,
}

impl FixedDenominatorFilter {
    /// `denominator` holds `a₁ … a_P`; all poles must lie strictly inside the unit circle.
    pub fn new(denominator: Vec<f64>, gain: f64) -> Result<Self> {
        if !(gain != 0.0) || !gain.is_finite() {
            return Err(Error::invalid("filter gain must be finite and nonzero"));
        }
        if denominator.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("filter coefficients must be finite"));
        }
        if !schur_stable(&denominator) {
            return Err(Error::invalid(
                "filter denominator has a pole on or outside the unit circle",
            ));
        }
        Ok(FixedDenominatorFilter { denominator, gain })
    }

    pub fn identity() -> Self {
        FixedDenominatorFilter {
            denominator: Vec::new(),
            gain: 1.0,
        }
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }
}

/// Schur–Cohn step-down test: every reflection coefficient inside (−1, 1).
fn schur_stable(a: &[f64]) -> bool {
    let mut poly: Vec<f64> = a.to_vec();
    while let Some(&k) = poly.last() {
        if !(k.abs() < 1.0) {
            return false;
        }
        let p = poly.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..p - 1)
            .map(|i| (poly[i] - k * poly[p - 2 - i]) / denom)
            .collect();
        poly = next;
    }
    true
}

/// `u′ = F(q) u` with zero initial conditions.
pub fn filter_fixed_denominator(u: &[f64], f: &FixedDenominatorFilter) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(u.len());
    for t in 0..u.len() {
        let mut acc = f.gain * u[t];
        for (i, a) in f.denominator.iter().enumerate() {
            if t > i {
                acc -= a * out[t - 1 - i];
            }
        }
        out.push(acc);
    }
    out
}

/// `u = F⁻¹(q) u′`; a finite causal filter because `F` has no zeros.
pub fn recover_input(u_prime: &[f64], f: &FixedDenominatorFilter) -> Vec<f64> {
    (0..u_prime.len())
        .map(|t| {
            let mut acc = u_prime[t];
            for (i, a) in f.denominator.iter().enumerate() {
                if t > i {
                    acc += a * u_prime[t - 1 - i];
                }
            }
            acc / f.gain
        })
        .collect()
}

/// Regressor `Φ(t, k) = u′(t − k)` for `t = 1..N`, `k = 1..n_θ`.
///
/// `u_prime[0]` is `u′(1)`, and at least `N − 1` samples are needed.
/// `pre_window` supplies `u′(1 − n_θ), …, u′(0)`; zeros when absent.
pub fn build_regressor(
    u_prime: &[f64],
    pre_window: Option<&[f64]>,
    n_theta: usize,
    n: usize,
) -> Result<RegressorMatrix> {
    if n == 0 || n_theta == 0 {
        return Err(Error::invalid("regressor dimensions must be positive"));
    }
    if u_prime.len() < n - 1 {
        return Err(Error::invalid(alloc::format!(
            "building a {n}x{n_theta} regressor needs at least {} samples of u'(t), t >= 1, got {}",
            n - 1,
            u_prime.len()
        )));
    }
    let mut generator = match pre_window {
        Some(pre) if pre.len() != n_theta => {
            return Err(Error::invalid(alloc::format!(
                "pre-window must hold {n_theta} samples, got {}",
                pre.len()
            )))
        }
        Some(pre) => pre.to_vec(),
        None => vec![0.0; n_theta],
    };
    generator.extend_from_slice(&u_prime[..n - 1]);
    RegressorMatrix::from_generator(generator, n, n_theta)
}

/// Fisher information `ΦᵀΦ / σ²` of the linear-Gaussian regression.
pub fn fim(phi: &DMatrix<f64>, sigma2: f64) -> Result<DMatrix<f64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    Ok(phi.tr_mul(phi) / sigma2)
}

/// Autocorrelation coefficients `r₀ … r_{J−1}` of a stationary input,
/// `r₋ₖ = rₖ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumCoefficients {
    r: Vec<f64>,
}

impl SpectrumCoefficients {
    /// Validates that `Toeplitz(r)` is PSD up to `1e−8` relative rounding.
    pub fn new(r: Vec<f64>) -> Result<Self> {
        let s = SpectrumCoefficients { r };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.is_empty() {
            return Err(Error::invalid("spectrum needs at least r_0"));
        }
        if self.r.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("spectrum coefficients must be finite"));
        }
        if !(self.r[0] > 0.0) {
            return Err(Error::invalid("spectrum power r_0 must be positive"));
        }
        let eig = toeplitz(&self.r, self.r.len()).symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        if min < -1e-8 * max {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
                tolerance: 1e-8 * max,
            });
        }
        Ok(())
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.r
    }

    pub fn order(&self) -> usize {
        self.r.len()
    }

    /// Adds white noise of power `level` (raises `r₀`).
    pub fn with_white_floor(&self, level: f64) -> Result<Self> {
        if !(level >= 0.0) {
            return Err(Error::invalid("white floor must be non-negative"));
        }
        let mut r = self.r.clone();
        r[0] += level;
        Ok(SpectrumCoefficients { r })
    }

    /// Lag `k` autocorrelation, zero beyond the stored order.
    pub fn lag(&self, k: usize) -> f64 {
        self.r.get(k).copied().unwrap_or(0.0)
    }
}

/// Symmetric Toeplitz matrix of dimension `dim` from lags `r` (zero past the end).
pub fn toeplitz(r: &[f64], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        r.get(i.abs_diff(j)).copied().unwrap_or(0.0)
    })
}

/// Ideal bandpass autocorrelation over `[w1, w2]` rad/sample, truncated at `J` lags.
pub fn bandpass_autocorrelation(
    w1: f64,
    w2: f64,
    power: f64,
    j: usize,
) -> Result<SpectrumCoefficients> {
    if !(0.0 <= w1 && w1 < w2 && w2 <= core::f64::consts::PI) {
        return Err(Error::invalid("band edges must satisfy 0 <= w1 < w2 <= pi"));
    }
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::invalid("band power must be positive"));
    }
    if j == 0 {
        return Err(Error::invalid("spectrum order must be at least 1"));
    }
    let pi = core::f64::consts::PI;
    let r = (0..j)
        .map(|k| {
            if k == 0 {
                power * (w2 - w1) / pi
            } else {
                let kf = k as f64;
                power * ((w2 * kf).sin() - (w1 * kf).sin()) / (pi * kf)
            }
        })
        .collect();
    Ok(SpectrumCoefficients { r })
}

/// Gram target `T` (units of `ΦᵀΦ`), equal to `σ²` times the desired Fisher information.
#[derive(Debug, Clone, PartialEq)]
pub struct GramTarget {
    matrix: SymMatrix,
    sigma2: f64,
}

impl GramTarget {
    /// Accepts `T` directly; eigenvalues below `−1e−10·‖T‖₂` are rejected.
    pub fn new(matrix: SymMatrix, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        let eig = matrix.as_matrix().clone().symmetric_eigen().eigenvalues;
        let max = eig.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if !min.is_finite() || min < -1e-10 * max {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
                tolerance: 1e-10 * max,
            });
        }
        Ok(GramTarget { matrix, sigma2 })
    }

    /// `T = σ² I_F^d`.
    pub fn from_fim(fim: &SymMatrix, sigma2: f64) -> Result<Self> {
        Self::new(fim.scaled(sigma2), sigma2)
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn desired_fim(&self) -> DMatrix<f64> {
        self.matrix.as_matrix() / self.sigma2
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// `T = N · Toeplitz(r₀ … r_{n_θ−1})`, clipped to the PSD cone.
pub fn gram_target_from_spectrum(
    r: &SpectrumCoefficients,
    n_theta: usize,
    n: usize,
) -> Result<GramTarget> {
    if r.order() < n_theta {
        return Err(Error::invalid(alloc::format!(
            "spectrum order {} is below the parameter dimension {n_theta}",
            r.order()
        )));
    }
    if n == 0 || n_theta == 0 {
        return Err(Error::invalid("dimensions must be positive"));
    }
    let t = SymMatrix::new(toeplitz(r.coefficients(), n_theta) * n as f64)?;
    GramTarget::new(clip_spectrum(&t, 0.0)?, 1.0)
}

/// Shaping filter realizing a stationary process with autocorrelation `r`.
///
/// Levinson–Durbin yields the order-`J−1` minimum-phase predictor; the first
/// `J−1` samples are drawn through the growing-order innovations recursion
/// (the Cholesky factor of the leading Toeplitz block), the rest through the
/// fixed-order all-pole filter. The realized sequence has lags `0..J−1`
/// exactly equal to `r` and the maximum-entropy extension beyond.
#[derive(Debug, Clone)]
pub struct SpectralShaper {
    /// `predictors[m]` holds the order-`m` forward predictor coefficients.
    predictors: Vec<Vec<f64>>,
    /// Innovation variance of each order.
    innovations: Vec<f64>,
}

impl SpectralShaper {
    pub fn new(r: &SpectrumCoefficients) -> Result<Self> {
        let r = r.coefficients();
        let order = r.len() - 1;
        let mut predictors: Vec<Vec<f64>> = vec![Vec::new()];
        let mut innovations = vec![r[0]];
        let mut a: Vec<f64> = Vec::new();
        let mut err = r[0];
        for m in 1..=order {
            let acc: f64 = r[m]
                - a.iter()
                    .enumerate()
                    .map(|(i, ai)| ai * r[m - 1 - i])
                    .sum::<f64>();
            let k = acc / err;
            let mut next = vec![0.0; m];
            for i in 0..m - 1 {
                next[i] = a[i] - k * a[m - 2 - i];
            }
            next[m - 1] = k;
            err *= 1.0 - k * k;
            if !(err > 1e-14 * r[0]) || !k.is_finite() || k.abs() >= 1.0 {
                return Err(Error::Numeric(alloc::format!(
                    "spectral factorization failed at order {m}: autocorrelation is not positive definite"
                )));
            }
            a = next;
            predictors.push(a.clone());
            innovations.push(err);
        }
        Ok(SpectralShaper {
            predictors,
            innovations,
        })
    }

    /// Shapes the white sequence `w` (unit variance) into a realization.
    pub fn shape(&self, w: &[f64]) -> Vec<f64> {
        let top = self.predictors.len() - 1;
        let mut u: Vec<f64> = Vec::with_capacity(w.len());
        for (t, &wt) in w.iter().enumerate() {
            let m = t.min(top);
            let coeffs = &self.predictors[m];
            let predicted: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * u[t - 1 - i])
                .sum();
            u.push(predicted + self.innovations[m].sqrt() * wt);
        }
        u
    }

    pub fn realize(&self, len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        self.shape(&w)
    }
}

/// Frequency-domain-method input: white noise through the spectral factor of
/// `r`, `N + n_θ − 1` samples, ready to serve as a regressor generator.
pub fn realize_input_fdm(
    r: &SpectrumCoefficients,
    n: usize,
    n_theta: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n == 0 || n_theta == 0 {
        return Err(Error::invalid("dimensions must be positive"));
    }
    Ok(SpectralShaper::new(r)?.realize(n + n_theta - 1, seed))
}

/// Standard-normal draws from a seeded stream (shared by benchmark and tests).
pub fn white_noise(len: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(&mut rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    #[test]
    fn coherence_examples() {
        assert_eq!(mutual_coherence(&DMatrix::identity(3, 3)).unwrap(), 0.0);
        let prop = dmatrix![1.0, 2.0; 2.0, 4.0; -1.0, -2.0];
        assert_abs_diff_eq!(mutual_coherence(&prop).unwrap(), 1.0, epsilon = 1e-15);
        let s = 0.5f64.sqrt();
        let m = dmatrix![1.0, s; 0.0, s];
        assert_abs_diff_eq!(mutual_coherence(&m).unwrap(), s, epsilon = 1e-12);
    }

    #[test]
    fn coherence_errors() {
        let z = dmatrix![1.0, 0.0; 1.0, 0.0];
        assert!(matches!(mutual_coherence(&z), Err(Error::ZeroColumn(1))));
        assert!(mutual_coherence(&dmatrix![1.0; 2.0]).is_err());
    }

    #[test]
    fn coherence_condition_examples() {
        assert!(coherence_condition(&DMatrix::identity(4, 4), 10).unwrap());
        // Values from the narrowband study: 0.98 and 0.05 both miss 1/30.
        assert!(!(0.98 < coherence_bound(10)));
        assert!(!(0.05 < coherence_bound(10)));
        assert_abs_diff_eq!(coherence_bound(10), 1.0 / 30.0, epsilon = 1e-15);
    }

    #[test]
    fn filter_examples() {
        let u = [0.3, -1.0, 2.0, 0.25];
        assert_eq!(
            filter_fixed_denominator(&u, &FixedDenominatorFilter::identity()),
            u.to_vec()
        );
        let f = FixedDenominatorFilter::new(vec![-0.5], 1.0).unwrap();
        let impulse = filter_fixed_denominator(&[1.0, 0.0, 0.0, 0.0], &f);
        assert_eq!(impulse, vec![1.0, 0.5, 0.25, 0.125]);
        assert_eq!(recover_input(&[1.0, 0.0, 0.0], &f), vec![1.0, -0.5, 0.0]);
        assert_eq!(
            recover_input(&u, &FixedDenominatorFilter::identity()),
            u.to_vec()
        );
    }

    #[test]
    fn filter_stability_check() {
        assert!(FixedDenominatorFilter::new(vec![-1.0], 1.0).is_err());
        assert!(FixedDenominatorFilter::new(vec![-2.5, 1.0], 1.0).is_err()); // poles 2 and 0.5
        assert!(FixedDenominatorFilter::new(vec![-1.6, 0.8], 1.0).is_ok()); // |poles| = √0.8
        assert!(FixedDenominatorFilter::new(vec![0.0, 1.0], 1.0).is_err()); // poles ±j
        assert!(FixedDenominatorFilter::new(vec![], 0.0).is_err());
    }

    #[test]
    fn regressor_examples() {
        let phi = build_regressor(&[1.0, 0.0], None, 2, 3).unwrap();
        assert_eq!(phi.matrix(), &dmatrix![0.0, 0.0; 1.0, 0.0; 0.0, 1.0]);
        let ones = build_regressor(&[1.0; 5], Some(&[1.0; 3]), 3, 6).unwrap();
        assert!(ones.matrix().iter().all(|&x| x == 1.0));
        assert_abs_diff_eq!(
            mutual_coherence(ones.matrix()).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(build_regressor(&[1.0], None, 2, 5).is_err());
        assert!(build_regressor(&[1.0; 4], Some(&[0.0]), 2, 5).is_err());
    }

    #[test]
    fn white_regressor_is_nearly_orthonormal() {
        let n = 10_000;
        let w = white_noise(n + 4, 7);
        let phi = RegressorMatrix::from_generator(w.as_slice().to_vec(), n, 5).unwrap();
        let g = phi.gram() / n as f64;
        let dev = &g - DMatrix::<f64>::identity(5, 5);
        assert!(dev.abs().max() < 0.05, "{dev}");
    }

    #[test]
    fn fim_examples() {
        let q = dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0];
        assert_eq!(fim(&q, 1.0).unwrap(), DMatrix::identity(2, 2));
        let p = dmatrix![1.0, 2.0; -0.5, 3.0];
        assert_abs_diff_eq!(
            fim(&(&p * 2.0), 0.7).unwrap(),
            fim(&p, 0.7).unwrap() * 4.0,
            epsilon = 1e-12
        );
        assert!(fim(&p, 0.0).is_err());
    }

    #[test]
    fn bandpass_examples() {
        let pi = core::f64::consts::PI;
        let white = bandpass_autocorrelation(0.0, pi, 2.0, 8).unwrap();
        assert_abs_diff_eq!(white.lag(0), 2.0, epsilon = 1e-15);
        for k in 1..8 {
            assert_abs_diff_eq!(white.lag(k), 0.0, epsilon = 1e-15);
        }
        let band = bandpass_autocorrelation(0.1, 0.3, 1.0, 50).unwrap();
        assert_abs_diff_eq!(band.lag(0), 0.2 / pi, epsilon = 1e-15);
        assert_abs_diff_eq!(band.lag(0), 0.0636620, epsilon = 1e-7);
        assert!(bandpass_autocorrelation(0.3, 0.1, 1.0, 4).is_err());
    }

    #[test]
    fn bandpass_toeplitz_is_psd() {
        for j in [1usize, 2, 8, 17, 33, 50, 64] {
            let r = bandpass_autocorrelation(0.1, 0.3, 1.0, j).unwrap();
            assert!(r.validate().is_ok(), "J = {j}");
        }
    }

    #[test]
    fn gram_target_examples() {
        let white = SpectrumCoefficients::new(vec![1.0, 0.0, 0.0]).unwrap();
        let t = gram_target_from_spectrum(&white, 3, 10).unwrap();
        assert_eq!(t.matrix().as_matrix(), &(DMatrix::identity(3, 3) * 10.0));
        let band = bandpass_autocorrelation(0.1, 0.3, 1.0, 50).unwrap();
        let a = gram_target_from_spectrum(&band, 4, 100).unwrap();
        let b = gram_target_from_spectrum(&band, 4, 200).unwrap();
        assert_abs_diff_eq!(
            b.matrix().as_matrix(),
            &(a.matrix().as_matrix() * 2.0),
            epsilon = 1e-12
        );
        assert!(gram_target_from_spectrum(&white, 4, 10).is_err());
    }

    #[test]
    fn realization_is_deterministic() {
        let r = bandpass_autocorrelation(0.1, 0.3, 1.0, 50)
            .unwrap()
            .with_white_floor(1e-3)
            .unwrap();
        let a = realize_input_fdm(&r, 100, 40, 99).unwrap();
        let b = realize_input_fdm(&r, 100, 40, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 139);
        assert_ne!(a, realize_input_fdm(&r, 100, 40, 100).unwrap());
    }

    #[test]
    fn white_realization_matches_power() {
        let r = SpectrumCoefficients::new(vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        let u = realize_input_fdm(&r, 10_000, 1, 3).unwrap();
        let r0 = u.iter().map(|x| x * x).sum::<f64>() / u.len() as f64;
        assert!((r0 - 2.0).abs() < 0.2, "{r0}");
    }

    #[test]
    fn narrowband_realization_is_highly_coherent() {
        let r = bandpass_autocorrelation(0.1, 0.3, 1.0, 50)
            .unwrap()
            .with_white_floor(1e-3)
            .unwrap();
        for seed in 0..5 {
            let g = realize_input_fdm(&r, 100, 40, seed).unwrap();
            let phi = RegressorMatrix::from_generator(g, 100, 40).unwrap();
            assert!(mutual_coherence(phi.matrix()).unwrap() >= 0.9);
        }
    }

    #[test]
    fn indefinite_spectrum_fails_factorization() {
        let bad = SpectrumCoefficients { r: vec![1.0, 2.0] };
        assert!(matches!(SpectralShaper::new(&bad), Err(Error::Numeric(_))));
        assert!(SpectrumCoefficients::new(vec![1.0, 2.0]).is_err());
    }
}
