use std::path::Path;

use lcid_core::{AdmmOptions, CvProtocol, DesignConfig};
use serde::{Deserialize, Serialize};

use crate::error::{LcidError, Result};

/// Tunables shared by the subcommands; loaded with `--config`, each key
/// overridable by the flag of the same name.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub design: DesignConfig,
    pub cv: CvProtocol,
    pub admm: AdmmOptions,
    /// Largest order tried by order selection; `n_theta` when absent.
    pub k_max: Option<usize>,
    /// Cross-validate on every run instead of only the first per SNR.
    pub per_run_cv: bool,
    /// Record per-method wall time (makes outputs run-dependent).
    pub timing: bool,
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LcidError::io(path, e))?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| LcidError::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.cv.validate()?;
        if !(self.admm.rho > 0.0) || self.admm.max_iters == 0 || !(self.admm.tol > 0.0) {
            return Err(LcidError::invalid(
                "admm needs rho > 0, max_iters >= 1 and tol > 0",
            ));
        }
        if self.k_max == Some(0) {
            return Err(LcidError::invalid("k_max must be at least 1"));
        }
        Ok(())
    }
}
