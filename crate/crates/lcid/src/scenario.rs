//! Benchmark scenarios.

use std::path::Path;

use lcid_core::sysid::bandpass_autocorrelation;
use lcid_core::SpectrumCoefficients;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LcidError, Result};
use crate::metrics::{frequency_grid, frequency_response};

/// One Monte-Carlo study: true system, noise levels, input spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_theta: usize,
    /// Number of observations.
    pub n: usize,
    /// Number of leading nonzero coefficients of `theta0`.
    pub s: usize,
    /// Generated from `seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    /// Desired closed-loop bandwidth parameter.
    pub eta: f64,
    /// SNR values in dB.
    pub snr_list: Vec<f64>,
    pub mc_runs: usize,
    pub seed: u64,
    pub spectrum: SpectrumCoefficients,
    pub grid_size: usize,
}

/// White power added to the ideal band so that its Toeplitz sections stay
/// well conditioned.
pub const BANDPASS_WHITE_FLOOR: f64 = 1e-3;

impl Scenario {
    /// Desk-scale narrowband study: 40 taps, 100 samples, 10 active taps,
    /// band `[0.1, 0.3]`, SNR {5, 15, 29} dB, 50 runs.
    pub fn desk_default() -> Self {
        let spectrum = bandpass_autocorrelation(0.1, 0.3, 1.0, 50)
            .and_then(|r| r.with_white_floor(BANDPASS_WHITE_FLOOR))
            .expect("static band is valid");
        Scenario {
            n_theta: 40,
            n: 100,
            s: 10,
            theta0: None,
            eta: 0.1,
            snr_list: vec![5.0, 15.0, 29.0],
            mc_runs: 50,
            seed: 20_240_601,
            spectrum,
            grid_size: 2048,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LcidError::io(path, e))?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| LcidError::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_theta == 0 || self.n < self.n_theta {
            return Err(LcidError::invalid("need 1 <= n_theta <= n"));
        }
        if self.s == 0 || self.s > self.n_theta {
            return Err(LcidError::invalid("sparsity s must lie in 1..=n_theta"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(LcidError::invalid("eta must lie in [0, 1]"));
        }
        if self.snr_list.is_empty() || self.snr_list.iter().any(|x| !x.is_finite()) {
            return Err(LcidError::invalid(
                "snr_list must hold at least one finite value",
            ));
        }
        if self.mc_runs == 0 {
            return Err(LcidError::invalid("mc_runs must be at least 1"));
        }
        if self.grid_size < 2 {
            return Err(LcidError::invalid("grid_size must be at least 2"));
        }
        self.spectrum.validate()?;
        if self.spectrum.order() < self.n_theta {
            return Err(LcidError::invalid(format!(
                "spectrum has {} lags, need at least n_theta = {}",
                self.spectrum.order(),
                self.n_theta
            )));
        }
        if let Some(theta) = &self.theta0 {
            check_theta0(theta, self.n_theta, self.s, self.grid_size)?;
        }
        Ok(())
    }

    /// True parameters: the stored vector or the seeded draw.
    pub fn resolve_theta0(&self) -> Result<Vec<f64>> {
        match &self.theta0 {
            Some(t) => Ok(t.clone()),
            None => generate_theta0(self.n_theta, self.s, self.grid_size, self.seed),
        }
    }
}

/// Smallest over largest `|G(e^{jω})|` on the grid.
pub fn response_ratio(theta: &[f64], grid_size: usize) -> f64 {
    let mags: Vec<f64> = frequency_grid(grid_size)
        .into_iter()
        .map(|w| frequency_response(theta, w).norm())
        .collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

const MIN_RESPONSE_RATIO: f64 = 0.05;
const MAX_DRAWS: usize = 10_000;

fn check_theta0(theta: &[f64], n_theta: usize, s: usize, grid_size: usize) -> Result<()> {
    if theta.len() != n_theta {
        return Err(LcidError::invalid(format!(
            "theta0 has {} entries, expected {n_theta}",
            theta.len()
        )));
    }
    if theta[..s].iter().any(|x| *x == 0.0 || !x.is_finite())
        || theta[s..].iter().any(|x| *x != 0.0)
    {
        return Err(LcidError::invalid(
            "theta0 must be nonzero on its first s entries and zero after",
        ));
    }
    if response_ratio(theta, grid_size) < 1e-12 {
        return Err(LcidError::invalid(
            "theta0 has a frequency-response zero on the grid",
        ));
    }
    Ok(())
}

/// Leading `s` taps `z_k·0.9^k` with `z_k` standard normal, redrawn until
/// `min|G| > 0.05·max|G|` on the grid.
pub fn generate_theta0(n_theta: usize, s: usize, grid_size: usize, seed: u64) -> Result<Vec<f64>> {
    if s == 0 || s > n_theta {
        return Err(LcidError::invalid("sparsity s must lie in 1..=n_theta"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e7a_0000_0000_0001);
    for _ in 0..MAX_DRAWS {
        let mut theta = vec![0.0; n_theta];
        let mut decay = 1.0;
        for t in theta.iter_mut().take(s) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *t = z * decay;
            decay *= 0.9;
        }
        if theta[..s].iter().all(|x| *x != 0.0)
            && response_ratio(&theta, grid_size) > MIN_RESPONSE_RATIO
        {
            return Ok(theta);
        }
    }
    Err(LcidError::invalid(
        "no admissible theta0 found; relax the scenario",
    ))
}
