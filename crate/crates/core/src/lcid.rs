//! Low-coherence input design: the alternating three-step loop that shapes a
//! Toeplitz regressor `Φ` and a coordinate transformation `H` jointly, and the
//! least-squares estimator in the transformed coordinates.
//!
//! Each outer iteration shrinks the penalty parameter `ς ← c·ς` and then
//!
//! 1. sets `N` to the proximal point of `λς‖·‖∞` at `HᵀH − I`, corrected so
//!    that `N + I` is positive definite;
//! 2. alternates the closed-form `H` update (followed by column
//!    normalization) with Procrustes refreshes of `U` and `Q`;
//! 3. alternates the diagonal-averaging Toeplitz fit of `Φ` with Procrustes
//!    refreshes of `Z` and `U`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, frobenius, gram_inverse, lstsq, max_abs, normalize_columns, unvec, vec_of,
};
use crate::proxops::{
    nearest_psd, orthogonal_factor, project_l1_ball, psd_sqrt, toeplitz_ls_fit, Orientation,
    PsdFloor, SymMatrix,
};
use crate::regressor::RegressorMatrix;
use crate::sysid::{mutual_coherence, GramTarget};

/// Condition number of `H` above which a design is reported as degenerate.
pub const MAX_CONDITION: f64 = 1e12;

/// Tuning of the design loop. The penalty defaults suit Gram targets of a
/// few hundred in Frobenius norm (40 parameters, 100 samples).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    /// Weight `λ` of the coherence penalty `‖N‖∞`.
    pub lambda: f64,
    /// Weight `λ′` on the `UH` target of the Toeplitz fit.
    pub lambda_prime: f64,
    /// Initial coupling parameter `ς`.
    pub sigma0: f64,
    /// Per-iteration decay `c` of `ς`.
    pub decay: f64,
    pub psd_floor: PsdFloor,
    pub max_outer_iters: usize,
    /// Rounds of each of steps 2 and 3 per outer iteration.
    pub inner_iters: usize,
    /// Stop when `max(‖ΔΦ‖_F, ‖ΔH‖_F)/√(N n_θ)` falls below this.
    pub stop_tol: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            lambda: 2000.0,
            lambda_prime: 1e-3,
            sigma0: 1.0,
            decay: 0.97,
            psd_floor: PsdFloor::default(),
            max_outer_iters: 300,
            inner_iters: 3,
            stop_tol: 1e-8,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.lambda) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !positive(self.lambda_prime) {
            return Err(Error::invalid("lambda_prime must be positive"));
        }
        if !positive(self.sigma0) {
            return Err(Error::invalid("sigma0 must be positive"));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::invalid("decay must lie strictly between 0 and 1"));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters must be at least 1"));
        }
        if self.inner_iters == 0 {
            return Err(Error::invalid("inner_iters must be at least 1"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::invalid("stop_tol must be non-negative"));
        }
        Ok(())
    }

    /// `ς` after `k` outer iterations.
    pub fn varsigma_at(&self, k: usize) -> f64 {
        let mut s = self.sigma0;
        for _ in 0..k {
            s *= self.decay;
        }
        s
    }
}

/// One row of the diagnostics trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub varsigma: f64,
    /// Penalized design objective; NaN when `ΦᵀΦ` is singular.
    pub objective: f64,
    pub mu_h: f64,
    pub mu_phi: f64,
    /// `‖ΦᵀΦ − T‖_F / √(N n_θ)`.
    pub fim_fit_error: f64,
    /// `‖N + I − HᵀH‖_F`.
    pub constraint_residual: f64,
    /// Largest increase of the step-2 relaxed objective over its inner rounds (0 when monotone).
    pub step2_increase: f64,
    /// Same for step 3.
    pub step3_increase: f64,
}

/// Iterates carried between outer iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    pub h: DMatrix<f64>,
    pub phi: RegressorMatrix,
    pub n_c: SymMatrix,
    pub u_opt: DMatrix<f64>,
    pub q_opt: DMatrix<f64>,
    pub z_opt: DMatrix<f64>,
    pub varsigma: f64,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub phi: RegressorMatrix,
    pub h: DMatrix<f64>,
    pub n_c: SymMatrix,
    pub trace: Vec<IterationRecord>,
    pub gram_target: SymMatrix,
    pub condition_number: f64,
    pub converged: bool,
}

impl DesignResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn mu_h(&self) -> Result<f64> {
        mutual_coherence(&self.h)
    }

    pub fn mu_phi(&self) -> Result<f64> {
        mutual_coherence(self.phi.matrix())
    }

    pub fn fim_fit_error(&self) -> f64 {
        fim_fit_error(self.phi.matrix(), self.gram_target.as_matrix())
    }
}

/// `‖ΦᵀΦ − T‖_F / √(N n_θ)`.
pub fn fim_fit_error(phi: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
    let (n, p) = phi.shape();
    frobenius(&(phi.tr_mul(phi) - target)) / ((n * p) as f64).sqrt()
}

/// Step 1: coherence-penalized update of `N`.
///
/// `N = F − vec⁻¹(P(vec F))` with `F = HᵀH − I` and `P` the projection onto
/// the ℓ1 ball of radius `λς`, then `N + I` is lifted to eigenvalues `≥ ε`.
pub fn step_update_n(
    h: &DMatrix<f64>,
    lambda: f64,
    varsigma: f64,
    floor: PsdFloor,
) -> Result<SymMatrix> {
    let n = h.ncols();
    let f = SymMatrix::new(h.tr_mul(h) - DMatrix::identity(n, n))?;
    let fv = vec_of(f.as_matrix());
    let projected = project_l1_ball(fv.as_slice(), lambda * varsigma)?;
    let shrunk = fv - DVector::from_vec(projected);
    let raw = SymMatrix::new(unvec(&shrunk, n, n))?;
    Ok(nearest_psd(&raw.shifted(1.0), floor)?.shifted(-1.0))
}

/// Step 2 relaxed objective `‖UH − Φ‖² + (1/ς)‖H − QA‖²`, `A = (N + I)^{1/2}`.
pub fn step2_objective(
    h: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    u: &DMatrix<f64>,
    q: &DMatrix<f64>,
    a: &DMatrix<f64>,
    varsigma: f64,
) -> f64 {
    let first = frobenius(&(u * h - phi));
    let second = frobenius(&(h - q * a));
    first * first + second * second / varsigma
}

/// Step 2: `inner` rounds of the closed-form `H` update and the `U`, `Q` refresh.
///
/// Returns `(H, U, Q, largest objective increase)`.
#[allow(clippy::type_complexity)]
pub fn step_update_h(
    phi: &RegressorMatrix,
    n_c: &SymMatrix,
    varsigma: f64,
    inner: usize,
    u_prev: &DMatrix<f64>,
    q_prev: &DMatrix<f64>,
    h_prev: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64)> {
    let a = psd_sqrt(&n_c.shifted(1.0))?;
    let phi = phi.matrix();
    let mut u = u_prev.clone();
    let mut q = q_prev.clone();
    let mut h = h_prev.clone();
    let inv = 1.0 / varsigma;
    let mut last = step2_objective(&h, phi, &u, &q, &a, varsigma);
    let mut worst = 0.0f64;
    for _ in 0..inner {
        let mut next = (u.tr_mul(phi) + &q * &a * inv) / (1.0 + inv);
        for j in normalize_columns(&mut next) {
            next.set_column(j, &h.column(j));
        }
        h = next;
        let now = step2_objective(&h, phi, &u, &q, &a, varsigma);
        worst = worst.max(now - last);
        last = now;

        u = orthogonal_factor(&(&h * phi.transpose()), Orientation::AsGiven)?;
        q = orthogonal_factor(&(&h * &a), Orientation::Transposed)?;
        let now = step2_objective(&h, phi, &u, &q, &a, varsigma);
        worst = worst.max(now - last);
        last = now;
    }
    Ok((h, u, q, worst.max(0.0)))
}

/// Step 3 relaxed objective `‖Φ − ZT^{1/2}‖² + λ′‖Φ − UH‖²`.
pub fn step3_objective(
    phi: &DMatrix<f64>,
    z: &DMatrix<f64>,
    target_sqrt: &DMatrix<f64>,
    u: &DMatrix<f64>,
    h: &DMatrix<f64>,
    lambda_prime: f64,
) -> f64 {
    let first = frobenius(&(phi - z * target_sqrt));
    let second = frobenius(&(phi - u * h));
    first * first + lambda_prime * second * second
}

/// Step 3: `inner` rounds of the Toeplitz coefficient update and the `Z`, `U` refresh.
///
/// `target_sqrt` is `T^{1/2}`. Returns `(Φ, U, Z, largest objective increase)`.
#[allow(clippy::type_complexity)]
pub fn step_update_phi(
    h: &DMatrix<f64>,
    target_sqrt: &DMatrix<f64>,
    lambda_prime: f64,
    inner: usize,
    z_prev: &DMatrix<f64>,
    u_prev: &DMatrix<f64>,
    phi_prev: &RegressorMatrix,
) -> Result<(RegressorMatrix, DMatrix<f64>, DMatrix<f64>, f64)> {
    let mut z = z_prev.clone();
    let mut u = u_prev.clone();
    let mut phi = phi_prev.clone();
    let mut last = step3_objective(phi.matrix(), &z, target_sqrt, &u, h, lambda_prime);
    let mut worst = 0.0f64;
    for _ in 0..inner {
        let gram_side = &z * target_sqrt;
        let coherence_side = &u * h;
        let (_, fitted) = toeplitz_ls_fit(&[(&gram_side, 1.0), (&coherence_side, lambda_prime)])?;
        phi = fitted;
        let now = step3_objective(phi.matrix(), &z, target_sqrt, &u, h, lambda_prime);
        worst = worst.max(now - last);
        last = now;

        let phi_t = phi.matrix().transpose();
        z = orthogonal_factor(&(target_sqrt * &phi_t), Orientation::AsGiven)?;
        u = orthogonal_factor(&(h * &phi_t), Orientation::AsGiven)?;
        let now = step3_objective(phi.matrix(), &z, target_sqrt, &u, h, lambda_prime);
        worst = worst.max(now - last);
        last = now;
    }
    Ok((phi, u, z, worst.max(0.0)))
}

/// The four terms of the penalized design objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// `‖H(ΦᵀΦ)⁻¹Hᵀ − I‖²_F`
    pub noise: f64,
    /// `λ′‖ΦᵀΦ − T‖²_F`
    pub gram_fit: f64,
    /// `λ‖N‖∞`
    pub coherence: f64,
    /// `(1/2ς)‖N + I − HᵀH‖²_F`
    pub coupling: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.noise + self.gram_fit + self.coherence + self.coupling
    }
}

pub fn design_objective(
    phi: &DMatrix<f64>,
    h: &DMatrix<f64>,
    n_c: &SymMatrix,
    gram_target: &SymMatrix,
    config: &DesignConfig,
    varsigma: f64,
) -> Result<ObjectiveTerms> {
    let p = h.ncols();
    if phi.ncols() != p || gram_target.dim() != p || n_c.dim() != p || h.nrows() != p {
        return Err(Error::invalid(
            "design objective dimensions are inconsistent",
        ));
    }
    let eye = DMatrix::<f64>::identity(p, p);
    let gram = phi.tr_mul(phi);
    let noise = frobenius(&(h * gram_inverse(phi)? * h.transpose() - &eye));
    let fit = frobenius(&(&gram - gram_target.as_matrix()));
    let coupling = frobenius(&(n_c.as_matrix() + &eye - h.tr_mul(h)));
    Ok(ObjectiveTerms {
        noise: noise * noise,
        gram_fit: config.lambda_prime * fit * fit,
        coherence: config.lambda * max_abs(n_c.as_matrix()),
        coupling: coupling * coupling / (2.0 * varsigma),
    })
}

/// Default starting regressor: Toeplitz fit of `Z₀T^{1/2}`, `Z₀` the
/// orthogonal factor of `T^{1/2}` padded with zero rows to `N` rows.
pub fn default_phi_init(gram_target: &GramTarget, n: usize) -> Result<RegressorMatrix> {
    let p = gram_target.dim();
    if n < p {
        return Err(Error::invalid(
            "need at least as many samples as parameters",
        ));
    }
    let s = psd_sqrt(gram_target.matrix())?;
    let polar = orthogonal_factor(&s, Orientation::Transposed)?;
    let mut z0 = DMatrix::<f64>::zeros(n, p);
    z0.view_mut((0, 0), (p, p)).copy_from(&polar);
    let (_, phi) = toeplitz_ls_fit(&[(&(z0 * s), 1.0)])?;
    Ok(phi)
}

/// Runs the design loop from the default initialization (`H₀ = I`).
pub fn design(config: &DesignConfig, gram_target: &GramTarget, n: usize) -> Result<DesignResult> {
    let phi = default_phi_init(gram_target, n)?;
    let p = gram_target.dim();
    run_lcid(config, gram_target, &phi, &DMatrix::identity(p, p))
}

fn snapshot(
    iter: usize,
    state: &DesignState,
    gram_target: &SymMatrix,
    config: &DesignConfig,
    increases: (f64, f64),
) -> IterationRecord {
    let h = &state.h;
    let phi = state.phi.matrix();
    let p = h.ncols();
    let objective = design_objective(phi, h, &state.n_c, gram_target, config, state.varsigma)
        .map(|t| t.total())
        .unwrap_or(f64::NAN);
    IterationRecord {
        iter,
        varsigma: state.varsigma,
        objective,
        mu_h: mutual_coherence(h).unwrap_or(f64::NAN),
        mu_phi: mutual_coherence(phi).unwrap_or(f64::NAN),
        fim_fit_error: fim_fit_error(phi, gram_target.as_matrix()),
        constraint_residual: frobenius(
            &(state.n_c.as_matrix() + DMatrix::identity(p, p) - h.tr_mul(h)),
        ),
        step2_increase: increases.0,
        step3_increase: increases.1,
    }
}

/// Alternating design loop.
///
/// `h_init` is column-normalized before use. The warm-start Procrustes
/// factors come from the initial `(Φ, H)`.
pub fn run_lcid(
    config: &DesignConfig,
    gram_target: &GramTarget,
    phi_init: &RegressorMatrix,
    h_init: &DMatrix<f64>,
) -> Result<DesignResult> {
    config.validate()?;
    let p = gram_target.dim();
    let n = phi_init.rows();
    if phi_init.cols() != p || h_init.shape() != (p, p) {
        return Err(Error::invalid(alloc::format!(
            "dimension mismatch: target {p}x{p}, regressor {}x{}, transformation {}x{}",
            n,
            phi_init.cols(),
            h_init.nrows(),
            h_init.ncols()
        )));
    }
    if n < p {
        return Err(Error::invalid(
            "need at least as many samples as parameters",
        ));
    }
    if condition_number(phi_init.matrix()) > MAX_CONDITION {
        return Err(Error::invalid(
            "initial regressor is not of full column rank",
        ));
    }
    let mut h = h_init.clone();
    if let Some(&j) = normalize_columns(&mut h).first() {
        return Err(Error::ZeroColumn(j));
    }

    let target = gram_target.matrix().clone();
    let target_sqrt = psd_sqrt(&target)?;
    let phi_t = phi_init.matrix().transpose();
    let gram_h = SymMatrix::new(h.tr_mul(&h))?;
    let u_opt = orthogonal_factor(&(&h * &phi_t), Orientation::AsGiven)?;
    let q_opt = orthogonal_factor(&(&h * psd_sqrt(&gram_h)?), Orientation::Transposed)?;
    let z_opt = orthogonal_factor(&(&target_sqrt * &phi_t), Orientation::AsGiven)?;
    let mut state = DesignState {
        n_c: SymMatrix::new(gram_h.as_matrix() - DMatrix::identity(p, p))?,
        h,
        phi: phi_init.clone(),
        u_opt,
        q_opt,
        z_opt,
        varsigma: config.sigma0,
        trace: Vec::with_capacity(config.max_outer_iters),
    };

    let scale = ((n * p) as f64).sqrt();
    let mut converged = false;
    for k in 1..=config.max_outer_iters {
        state.varsigma *= config.decay;
        state.n_c = step_update_n(&state.h, config.lambda, state.varsigma, config.psd_floor)?;

        let (h, u, q, inc2) = step_update_h(
            &state.phi,
            &state.n_c,
            state.varsigma,
            config.inner_iters,
            &state.u_opt,
            &state.q_opt,
            &state.h,
        )?;
        let (phi, u, z, inc3) = step_update_phi(
            &h,
            &target_sqrt,
            config.lambda_prime,
            config.inner_iters,
            &state.z_opt,
            &u,
            &state.phi,
        )?;

        let dphi = frobenius(&(phi.matrix() - state.phi.matrix()));
        let dh = frobenius(&(&h - &state.h));
        state.h = h;
        state.phi = phi;
        state.u_opt = u;
        state.q_opt = q;
        state.z_opt = z;
        let record = snapshot(k, &state, &target, config, (inc2, inc3));
        state.trace.push(record);
        if dphi.max(dh) / scale < config.stop_tol {
            converged = true;
            break;
        }
    }

    let condition = condition_number(&state.h);
    let result = DesignResult {
        phi: state.phi,
        h: state.h,
        n_c: state.n_c,
        trace: state.trace,
        gram_target: target,
        condition_number: condition,
        converged,
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DegenerateDesign {
            condition_number: condition,
            result: alloc::boxed::Box::new(result),
        });
    }
    Ok(result)
}

/// Least-squares estimate in transformed coordinates `x = Hθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedModel {
    pub x_hat: DVector<f64>,
    /// `H(ΦᵀΦ)⁻¹Hᵀ`; multiply by `σ²` for the covariance of `x̂`.
    pub noise_cov: DMatrix<f64>,
}

/// `x̂ = argmin ‖y − ΦH⁻¹x‖²`, computed as `H·θ̂_LS`.
pub fn transformed_ls(
    phi: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<TransformedModel> {
    let p = phi.ncols();
    if h.shape() != (p, p) {
        return Err(Error::invalid(
            "transformation must be square with one row per parameter",
        ));
    }
    if condition_number(h) > MAX_CONDITION {
        return Err(Error::invalid("transformation is not invertible"));
    }
    let theta = lstsq(phi, y)?;
    let noise_cov = h * gram_inverse(phi)? * h.transpose();
    Ok(TransformedModel {
        x_hat: h * theta,
        noise_cov,
    })
}
