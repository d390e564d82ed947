//! Sparse and order-selected estimators.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq;

/// Parameter estimate that is exactly zero outside `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    pub theta: DVector<f64>,
    /// Sorted indices of the active set.
    pub support: Vec<usize>,
}

impl SparseEstimate {
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// Wraps a dense vector, taking its nonzero entries as the support.
    pub fn from_dense(theta: DVector<f64>) -> Self {
        let support = theta
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(i, _)| i)
            .collect();
        SparseEstimate { theta, support }
    }
}

fn restrict(a: &DMatrix<f64>, support: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), support.len(), |i, j| a[(i, support[j])])
}

fn scatter(dim: usize, support: &[usize], coeffs: &DVector<f64>) -> DVector<f64> {
    let mut theta = DVector::zeros(dim);
    for (k, &i) in support.iter().enumerate() {
        theta[i] = coeffs[k];
    }
    theta
}

/// Least squares on the columns of `phi` listed in `support`; zeros elsewhere.
pub fn ls_refit(phi: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Result<SparseEstimate> {
    if support.is_empty() {
        return Err(Error::invalid("support must not be empty"));
    }
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&bad) = sorted.iter().find(|&&i| i >= phi.ncols()) {
        return Err(Error::invalid(alloc::format!(
            "support index {bad} out of range for {} columns",
            phi.ncols()
        )));
    }
    let coeffs = lstsq(&restrict(phi, &sorted), y).map_err(|e| match e {
        Error::RankDeficient { columns } => Error::RankDeficient {
            columns: columns
                .into_iter()
                .map(|c| sorted.get(c).copied().unwrap_or(c))
                .collect(),
        },
        other => other,
    })?;
    Ok(SparseEstimate {
        theta: scatter(phi.ncols(), &sorted, &coeffs),
        support: sorted,
    })
}

/// Outcome of orthogonal matching pursuit.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpOutput {
    /// Estimate after each greedy round (`path[k]` has `k + 1` atoms).
    pub path: Vec<SparseEstimate>,
    /// Columns in the order they were selected.
    pub selection_order: Vec<usize>,
    /// Residual norm after each round.
    pub residual_norms: Vec<f64>,
    /// Set when a selected column made the active set rank deficient.
    pub stopped_early: bool,
}

impl OmpOutput {
    /// Final estimate; all zeros if no atom was selected.
    pub fn estimate(&self, dim: usize) -> SparseEstimate {
        self.path.last().cloned().unwrap_or(SparseEstimate {
            theta: DVector::zeros(dim),
            support: Vec::new(),
        })
    }
}

/// Orthogonal matching pursuit with up to `s` atoms.
///
/// Each round picks the column with the largest normalized correlation
/// `|a_jᵀr|/‖a_j‖` against the residual and refits by least squares on the
/// active set. The pursuit ends early once the residual vanishes.
pub fn omp(a: &DMatrix<f64>, b: &DVector<f64>, s: usize) -> Result<OmpOutput> {
    let (rows, cols) = a.shape();
    if rows != b.len() {
        return Err(Error::invalid(
            "OMP: matrix rows and observation length differ",
        ));
    }
    if s == 0 || s > rows.min(cols) {
        return Err(Error::invalid(alloc::format!(
            "OMP sparsity {s} must lie in 1..={}",
            rows.min(cols)
        )));
    }
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    if let Some(j) = norms.iter().position(|n| !(*n > 0.0)) {
        return Err(Error::ZeroColumn(j));
    }
    let b_norm = b.norm();
    let mut residual = b.clone();
    let mut active: Vec<usize> = Vec::with_capacity(s);
    let mut out = OmpOutput {
        path: Vec::with_capacity(s),
        selection_order: Vec::with_capacity(s),
        residual_norms: Vec::with_capacity(s),
        stopped_early: false,
    };
    let mut chosen = vec![false; cols];
    for _ in 0..s {
        if residual.norm() <= 1e-13 * b_norm {
            break;
        }
        let correlations = a.tr_mul(&residual);
        let mut best = None;
        let mut best_score = -1.0;
        for j in 0..cols {
            if chosen[j] {
                continue;
            }
            let score = correlations[j].abs() / norms[j];
            if score > best_score {
                best_score = score;
                best = Some(j);
            }
        }
        let j = match best {
            Some(j) => j,
            None => break,
        };
        active.push(j);
        let mut sorted = active.clone();
        sorted.sort_unstable();
        let coeffs = match lstsq(&restrict(a, &sorted), b) {
            Ok(c) => c,
            Err(Error::RankDeficient { .. }) => {
                active.pop();
                out.stopped_early = true;
                break;
            }
            Err(e) => return Err(e),
        };
        chosen[j] = true;
        let theta = scatter(cols, &sorted, &coeffs);
        residual = b - a * &theta;
        out.selection_order.push(j);
        out.residual_norms.push(residual.norm());
        out.path.push(SparseEstimate {
            theta,
            support: sorted,
        });
    }
    Ok(out)
}

/// ADMM tuning for the lasso.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmOptions {
    pub rho: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            rho: 1.0,
            max_iters: 2000,
            tol: 1e-8,
        }
    }
}

/// Lasso objective `½‖aθ − b‖² + λ‖θ‖₁`.
pub fn lasso_objective(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    theta: &DVector<f64>,
) -> f64 {
    let r = a * theta - b;
    0.5 * r.norm_squared() + lambda * theta.lp_norm(1)
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Lasso by ADMM: `θ`-update through a cached Cholesky factor of
/// `aᵀa + ρI`, soft-thresholded `z`-update, scaled dual ascent. Stops when
/// both residuals fall under `√n·tol + tol·scale`.
pub fn ladmm_lasso(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    options: &AdmmOptions,
) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    if rows != b.len() {
        return Err(Error::invalid(
            "lasso: matrix rows and observation length differ",
        ));
    }
    if !(lambda > 0.0) || !(options.rho > 0.0) {
        return Err(Error::invalid("lasso: lambda and rho must be positive"));
    }
    let atb = a.tr_mul(b);
    if atb.amax() <= lambda {
        return Ok(DVector::zeros(cols));
    }
    let rho = options.rho;
    let system = a.tr_mul(a) + DMatrix::identity(cols, cols) * rho;
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::numeric("lasso: normal matrix is not positive definite"))?;
    let mut z = DVector::zeros(cols);
    let mut u = DVector::zeros(cols);
    let sqrt_n = (cols as f64).sqrt();
    for _ in 0..options.max_iters {
        let x = chol.solve(&(&atb + (&z - &u) * rho));
        let z_old = z.clone();
        z = (&x + &u).map(|v| soft_threshold(v, lambda / rho));
        u += &x - &z;
        let primal = (&x - &z).norm();
        let dual = rho * (&z - &z_old).norm();
        let eps_pri = sqrt_n * options.tol + options.tol * x.norm().max(z.norm());
        let eps_dual = sqrt_n * options.tol + options.tol * rho * u.norm();
        if primal <= eps_pri && dual <= eps_dual {
            break;
        }
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("lasso iterates diverged"));
    }
    Ok(z)
}

/// Information criterion for model order selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// `N ln(RSS/N) + 2k + 2k(k+1)/(N−k−1)`
    Aicc,
    /// `N ln(RSS/N) + k ln N`
    Bic,
}

impl Criterion {
    /// Criterion value, or `None` when AICc's correction is undefined (`N − k − 1 ≤ 0`).
    pub fn score(self, n: usize, k: usize, rss: f64) -> Option<f64> {
        let nf = n as f64;
        let kf = k as f64;
        let fit = nf * (rss / nf).ln();
        match self {
            Criterion::Aicc => {
                if n <= k + 1 {
                    None
                } else {
                    Some(fit + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0))
                }
            }
            Criterion::Bic => Some(fit + kf * nf.ln()),
        }
    }
}

/// Residual sums of squares are floored at `(1e−10‖y‖)²` so that exact fits
/// compare by their penalties instead of by rounding noise.
fn floored_rss(rss: f64, y: &DVector<f64>) -> f64 {
    let floor = 1e-20 * y.norm_squared();
    rss.max(floor).max(f64::MIN_POSITIVE)
}

/// Result of an order-selection sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderSelection {
    pub estimate: SparseEstimate,
    pub order: usize,
    /// `(k, criterion)` for every evaluated order.
    pub scores: Vec<(usize, f64)>,
}

fn pick_best(candidates: Vec<(usize, f64, SparseEstimate)>) -> Result<OrderSelection> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.1.is_nan() {
            continue;
        }
        match best {
            Some(b) if candidates[b].1 <= c.1 => {}
            _ => best = Some(i),
        }
    }
    let scores = candidates.iter().map(|c| (c.0, c.1)).collect();
    let b = best.ok_or_else(|| Error::invalid("no admissible model order"))?;
    let (order, _, estimate) = candidates.into_iter().nth(b).unwrap();
    Ok(OrderSelection {
        estimate,
        order,
        scores,
    })
}

/// Least squares on the leading `k` columns for `k = 1..=k_max`; the order
/// minimizing `criterion` wins (ties go to the smaller order).
pub fn order_select_ls(
    phi: &DMatrix<f64>,
    y: &DVector<f64>,
    criterion: Criterion,
    k_max: usize,
) -> Result<OrderSelection> {
    let n = phi.nrows();
    if k_max == 0 || k_max > phi.ncols() {
        return Err(Error::invalid(alloc::format!(
            "k_max must lie in 1..={}",
            phi.ncols()
        )));
    }
    let mut candidates = Vec::new();
    for k in 1..=k_max {
        let support: Vec<usize> = (0..k).collect();
        let est = match ls_refit(phi, y, &support) {
            Ok(e) => e,
            Err(Error::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        };
        let rss = (y - phi * &est.theta).norm_squared();
        if let Some(score) = criterion.score(n, k, floored_rss(rss, y)) {
            candidates.push((k, score, est));
        }
    }
    pick_best(candidates)
}

/// How the transformed-coordinate estimate is turned into a sparse one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LcidMode {
    /// Support of `OMP(x̂, H, s)`, refit on `Φ`.
    FixedSparsity(usize),
    /// OMP path on `(x̂, H)`, each support refit on `Φ` and scored on the
    /// original-domain residual.
    Order { criterion: Criterion, k_max: usize },
}

/// Sparse estimate from the transformed model.
pub fn lcid_estimate(
    x_hat: &DVector<f64>,
    h: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    y: &DVector<f64>,
    mode: LcidMode,
) -> Result<OrderSelection> {
    match mode {
        LcidMode::FixedSparsity(s) => {
            let path = omp(h, x_hat, s)?;
            let support = path.estimate(h.ncols()).support;
            let estimate = ls_refit(phi, y, &support)?;
            Ok(OrderSelection {
                order: estimate.sparsity(),
                estimate,
                scores: Vec::new(),
            })
        }
        LcidMode::Order { criterion, k_max } => {
            let path = omp(h, x_hat, k_max)?;
            let n = phi.nrows();
            let mut candidates = Vec::new();
            for step in &path.path {
                let est = match ls_refit(phi, y, &step.support) {
                    Ok(e) => e,
                    Err(Error::RankDeficient { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let k = est.sparsity();
                let rss = (y - phi * &est.theta).norm_squared();
                if let Some(score) = criterion.score(n, k, floored_rss(rss, y)) {
                    candidates.push((k, score, est));
                }
            }
            pick_best(candidates)
        }
    }
}

/// Hold-out protocol for hyperparameter tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvProtocol {
    pub train_fraction: f64,
    pub grid_size: usize,
    pub grid_min: f64,
    pub grid_max: f64,
}

impl Default for CvProtocol {
    fn default() -> Self {
        CvProtocol {
            train_fraction: 0.8,
            grid_size: 200,
            grid_min: 1e-5,
            grid_max: 10.0,
        }
    }
}

impl CvProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(
                "train_fraction must lie strictly between 0 and 1",
            ));
        }
        if self.grid_size == 0 {
            return Err(Error::invalid("grid_size must be at least 1"));
        }
        if !(self.grid_min > 0.0 && self.grid_max >= self.grid_min && self.grid_max.is_finite()) {
            return Err(Error::invalid(
                "grid bounds must satisfy 0 < grid_min <= grid_max",
            ));
        }
        Ok(())
    }

    /// Log-spaced grid with both endpoints included.
    pub fn grid(&self) -> Vec<f64> {
        if self.grid_size == 1 {
            return vec![self.grid_min];
        }
        let lo = self.grid_min.ln();
        let hi = self.grid_max.ln();
        let steps = (self.grid_size - 1) as f64;
        (0..self.grid_size)
            .map(|i| {
                if i == 0 {
                    self.grid_min
                } else if i == self.grid_size - 1 {
                    self.grid_max
                } else {
                    (lo + (hi - lo) * i as f64 / steps).exp()
                }
            })
            .collect()
    }

    /// Number of leading rows used for training.
    pub fn train_rows(&self, n: usize) -> usize {
        let rows = (n as f64 * self.train_fraction).round() as usize;
        rows.clamp(1, n.saturating_sub(1).max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best: f64,
    pub grid: Vec<f64>,
    /// Validation error per grid point; infinite where the fit failed.
    pub errors: Vec<f64>,
}

/// Chronological hold-out: fit on the leading rows for each grid value and
/// keep the value with the smallest `‖y_v − Φ_v θ̂‖₂` (smallest value on ties).
pub fn cross_validate<F>(
    fit: F,
    phi: &DMatrix<f64>,
    y: &DVector<f64>,
    protocol: &CvProtocol,
) -> Result<CvOutcome>
where
    F: Fn(&DMatrix<f64>, &DVector<f64>, f64) -> Result<DVector<f64>>,
{
    protocol.validate()?;
    let n = phi.nrows();
    if n < 2 || y.len() != n {
        return Err(Error::invalid(
            "cross-validation needs at least two matching rows",
        ));
    }
    let train = protocol.train_rows(n);
    let phi_t = phi.rows(0, train).into_owned();
    let y_t = y.rows(0, train).into_owned();
    let phi_v = phi.rows(train, n - train).into_owned();
    let y_v = y.rows(train, n - train).into_owned();
    let grid = protocol.grid();
    let errors: Vec<f64> = grid
        .iter()
        .map(|&g| match fit(&phi_t, &y_t, g) {
            Ok(theta) if theta.len() == phi.ncols() => {
                let e = (&y_v - &phi_v * theta).norm();
                if e.is_finite() {
                    e
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        })
        .collect();
    let mut best = 0;
    for (i, e) in errors.iter().enumerate() {
        if *e < errors[best] {
            best = i;
        }
    }
    Ok(CvOutcome {
        best: grid[best],
        grid,
        errors,
    })
}

/// Lower bound on the probability that ℓ1 recovery finds the true support,
/// valid when the coherence condition `μ < 1/(3s)` holds.
pub fn recovery_bound(n_theta: usize, s: usize, nu: f64) -> Result<f64> {
    if s == 0 || s >= n_theta {
        return Err(Error::invalid("sparsity must satisfy 1 <= s < n_theta"));
    }
    if !(nu > 0.0) {
        return Err(Error::invalid("nu must be positive"));
    }
    let n = n_theta as f64;
    let first = 1.0 - (n - s as f64) / n.powf(1.0 + nu);
    let second = 1.0 - (-(s as f64) / 7.0).exp();
    Ok(first * second)
}
