//! Input design for sparse linear system identification.
//!
//! The crate designs a Toeplitz regressor `Φ` together with a dictionary `H`
//! so that the transformed model `x = Hθ + v` has low mutual coherence while
//! `ΦᵀΦ` stays close to a target Fisher information. Estimation routines
//! (OMP, lasso, order selection) operate on either model.
//!
//! `no_std` with `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod lcid;
pub mod linalg;
pub mod proxops;
pub mod regressor;
pub mod sparse;
pub mod sysid;

pub use error::{Error, Result};
pub use lcid::{
    design, run_lcid, transformed_ls, DesignConfig, DesignResult, IterationRecord, TransformedModel,
};
pub use proxops::{
    nearest_psd, orthogonal_factor, project_l1_ball, prox_inf_norm, psd_sqrt, Orientation,
    PsdFloor, SymMatrix,
};
pub use regressor::RegressorMatrix;
pub use sparse::{
    cross_validate, ladmm_lasso, lcid_estimate, ls_refit, omp, order_select_ls, recovery_bound,
    AdmmOptions, Criterion, CvProtocol, LcidMode, SparseEstimate,
};
pub use sysid::{mutual_coherence, GramTarget, SpectrumCoefficients};
