//! Monte-Carlo comparison of input designs and sparse estimators.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use lcid_core::lcid::fim_fit_error;
use lcid_core::sysid::{gram_target_from_spectrum, realize_input_fdm, white_noise};
use lcid_core::{
    cross_validate, design, ladmm_lasso, lcid_estimate, ls_refit, mutual_coherence, omp,
    order_select_ls, transformed_ls, Criterion, DesignResult, GramTarget, LcidMode,
    RegressorMatrix,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{LcidError, Result};
use crate::metrics::{nrmse, snr_to_sigma2, v_app};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "LS-AICc")]
    LsAicc,
    #[serde(rename = "LS-BIC")]
    LsBic,
    #[serde(rename = "OMP")]
    Omp,
    #[serde(rename = "LADMM")]
    Ladmm,
    #[serde(rename = "FDM-KnownSparsity")]
    FdmKnownSparsity,
    #[serde(rename = "LCID-OMP")]
    LcidOmp,
    #[serde(rename = "LCID-LADMM")]
    LcidLadmm,
    #[serde(rename = "LCID-BIC")]
    LcidBic,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::LsAicc,
        Method::LsBic,
        Method::Omp,
        Method::Ladmm,
        Method::FdmKnownSparsity,
        Method::LcidOmp,
        Method::LcidLadmm,
        Method::LcidBic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::LsAicc => "LS-AICc",
            Method::LsBic => "LS-BIC",
            Method::Omp => "OMP",
            Method::Ladmm => "LADMM",
            Method::FdmKnownSparsity => "FDM-KnownSparsity",
            Method::LcidOmp => "LCID-OMP",
            Method::LcidLadmm => "LCID-LADMM",
            Method::LcidBic => "LCID-BIC",
        }
    }

    /// Runs on the designed regressor rather than an FDM realization.
    pub fn uses_design(self) -> bool {
        matches!(self, Method::LcidOmp | Method::LcidLadmm | Method::LcidBic)
    }

    fn tuned(self) -> bool {
        matches!(self, Method::Ladmm | Method::LcidLadmm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = LcidError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                LcidError::invalid(format!(
                    "unknown method {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Ok => f.write_str("ok"),
            RunStatus::Failed(tag) => write!(f, "error:{tag}"),
        }
    }
}

/// One (method, SNR, run) outcome. Failed runs carry NaN metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub method: Method,
    pub snr: f64,
    pub run: usize,
    pub nrmse: f64,
    pub v_app: f64,
    pub mu_phi: f64,
    pub mu_h: Option<f64>,
    pub fim_fit_error: f64,
    pub wall_time_s: f64,
    pub status: RunStatus,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one Monte-Carlo run, a function of the master seed, SNR and run index only.
pub fn run_seed(master: u64, snr: f64, run: usize) -> u64 {
    mix(mix(mix(master) ^ snr.to_bits()) ^ run as u64)
}

fn input_seed(run_seed: u64) -> u64 {
    mix(run_seed ^ 0x1)
}

fn noise_seed(run_seed: u64) -> u64 {
    mix(run_seed ^ 0x2)
}

/// Everything a sweep produces besides the per-run records.
#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub records: Vec<MetricsRecord>,
    pub theta0: DVector<f64>,
    pub gram_target: GramTarget,
    /// `Err` holds the reason the design step failed.
    pub design: std::result::Result<DesignResult, String>,
    /// Cross-validated regularization per (method, SNR), from the first run.
    pub tuned_lambdas: Vec<(Method, f64, f64)>,
}

struct Context<'a> {
    scenario: &'a Scenario,
    config: &'a RunConfig,
    theta0: DVector<f64>,
    target: GramTarget,
    design: Option<&'a DesignResult>,
    design_error: Option<String>,
    mu_design: (f64, f64),
    fit_design: f64,
    k_max: usize,
}

struct RunData {
    phi_fdm: DMatrix<f64>,
    y_fdm: DVector<f64>,
    y_lcid: Option<DVector<f64>>,
    mu_fdm: f64,
    fit_fdm: f64,
}

fn error_tag(e: &LcidError) -> String {
    match e {
        LcidError::DegenerateModel { .. } => "degenerate-model".into(),
        LcidError::Core(lcid_core::Error::RankDeficient { .. }) => "rank-deficient".into(),
        LcidError::Core(lcid_core::Error::DegenerateDesign { .. }) => "degenerate-design".into(),
        LcidError::Core(_) => "numeric".into(),
        _ => "invalid".into(),
    }
}

impl Context<'_> {
    fn data(&self, sigma2: f64, snr: f64, run: usize) -> Result<RunData> {
        let sc = self.scenario;
        let seed = run_seed(sc.seed, snr, run);
        let gen = realize_input_fdm(&sc.spectrum, sc.n, sc.n_theta, input_seed(seed))?;
        let phi_fdm = RegressorMatrix::from_generator(gen, sc.n, sc.n_theta)?.into_matrix();
        let e = white_noise(sc.n, noise_seed(seed)) * sigma2.sqrt();
        let y_fdm = &phi_fdm * &self.theta0 + &e;
        let y_lcid = self.design.map(|d| d.phi.matrix() * &self.theta0 + &e);
        Ok(RunData {
            mu_fdm: mutual_coherence(&phi_fdm)?,
            fit_fdm: fim_fit_error(&phi_fdm, self.target.matrix().as_matrix()),
            phi_fdm,
            y_fdm,
            y_lcid,
        })
    }

    fn ladmm_fit(
        &self,
        phi: &DMatrix<f64>,
        y: &DVector<f64>,
        lambda: f64,
    ) -> lcid_core::Result<DVector<f64>> {
        ladmm_lasso(phi, y, lambda, &self.config.admm)
    }

    /// Lasso on the transformed model, then least squares on `Φ` over the
    /// selected support.
    fn lcid_ladmm_fit(
        &self,
        phi: &DMatrix<f64>,
        y: &DVector<f64>,
        lambda: f64,
    ) -> lcid_core::Result<DVector<f64>> {
        let h = &self.design.expect("design present for LCID methods").h;
        let model = transformed_ls(phi, h, y)?;
        let theta = ladmm_lasso(h, &model.x_hat, lambda, &self.config.admm)?;
        let support: Vec<usize> = (0..theta.len()).filter(|&i| theta[i] != 0.0).collect();
        if support.is_empty() {
            return Ok(theta);
        }
        Ok(ls_refit(phi, y, &support)?.theta)
    }

    fn tune(&self, method: Method, data: &RunData) -> Result<f64> {
        let out = match method {
            Method::Ladmm => cross_validate(
                |p, y, l| self.ladmm_fit(p, y, l),
                &data.phi_fdm,
                &data.y_fdm,
                &self.config.cv,
            )?,
            Method::LcidLadmm => {
                let d = self.design.expect("design present for LCID methods");
                cross_validate(
                    |p, y, l| self.lcid_ladmm_fit(p, y, l),
                    d.phi.matrix(),
                    data.y_lcid.as_ref().expect("design present"),
                    &self.config.cv,
                )?
            }
            _ => unreachable!("only lasso methods are tuned"),
        };
        Ok(out.best)
    }

    fn estimate(
        &self,
        method: Method,
        data: &RunData,
        lambda: Option<f64>,
    ) -> Result<DVector<f64>> {
        let sc = self.scenario;
        let s = sc.s;
        let theta = match method {
            Method::LsAicc => {
                order_select_ls(&data.phi_fdm, &data.y_fdm, Criterion::Aicc, self.k_max)?
                    .estimate
                    .theta
            }
            Method::LsBic => {
                order_select_ls(&data.phi_fdm, &data.y_fdm, Criterion::Bic, self.k_max)?
                    .estimate
                    .theta
            }
            Method::Omp => {
                omp(&data.phi_fdm, &data.y_fdm, s)?
                    .estimate(sc.n_theta)
                    .theta
            }
            Method::Ladmm => self.ladmm_fit(&data.phi_fdm, &data.y_fdm, lambda.expect("tuned"))?,
            Method::FdmKnownSparsity => {
                let support: Vec<usize> = (0..s).collect();
                ls_refit(&data.phi_fdm, &data.y_fdm, &support)?.theta
            }
            Method::LcidOmp | Method::LcidBic => {
                let d = self.design.expect("design present");
                let y = data.y_lcid.as_ref().expect("design present");
                let model = transformed_ls(d.phi.matrix(), &d.h, y)?;
                let mode = if method == Method::LcidOmp {
                    LcidMode::FixedSparsity(s)
                } else {
                    LcidMode::Order {
                        criterion: Criterion::Bic,
                        k_max: self.k_max,
                    }
                };
                lcid_estimate(&model.x_hat, &d.h, d.phi.matrix(), y, mode)?
                    .estimate
                    .theta
            }
            Method::LcidLadmm => {
                let d = self.design.expect("design present");
                self.lcid_ladmm_fit(
                    d.phi.matrix(),
                    data.y_lcid.as_ref().expect("design present"),
                    lambda.expect("tuned"),
                )?
            }
        };
        Ok(theta)
    }

    fn record(
        &self,
        method: Method,
        snr: f64,
        run: usize,
        data: &RunData,
        lambda: Option<f64>,
    ) -> MetricsRecord {
        let (mu_phi, mu_h, fit) = if method.uses_design() {
            (self.mu_design.0, Some(self.mu_design.1), self.fit_design)
        } else {
            (data.mu_fdm, None, data.fit_fdm)
        };
        let mut rec = MetricsRecord {
            method,
            snr,
            run,
            nrmse: f64::NAN,
            v_app: f64::NAN,
            mu_phi,
            mu_h,
            fim_fit_error: fit,
            wall_time_s: 0.0,
            status: RunStatus::Ok,
        };
        if method.uses_design() {
            if let Some(reason) = &self.design_error {
                rec.status = RunStatus::Failed(reason.clone());
                return rec;
            }
        }
        let started = Instant::now();
        let outcome = self.estimate(method, data, lambda).and_then(|theta| {
            let n = nrmse(&theta, &self.theta0)?;
            let v = v_app(
                theta.as_slice(),
                self.theta0.as_slice(),
                self.scenario.eta,
                self.scenario.grid_size,
            )?;
            Ok((n, v))
        });
        if self.config.timing {
            rec.wall_time_s = started.elapsed().as_secs_f64();
        }
        match outcome {
            Ok((n, v)) => {
                rec.nrmse = n;
                rec.v_app = v;
            }
            Err(e) => rec.status = RunStatus::Failed(error_tag(&e)),
        }
        rec
    }
}

/// Runs every method on every (SNR, run) pair of the scenario.
///
/// The design is computed once; noise levels are set from the designed
/// regressor so every method sees the same `σ²`. Lasso penalties are
/// cross-validated on run 0 of each SNR (every run with `per_run_cv`).
/// Records are ordered by SNR, run, then the order of `methods`, whatever
/// the number of worker threads.
pub fn run_benchmark(
    scenario: &Scenario,
    methods: &[Method],
    config: &RunConfig,
    jobs: usize,
) -> Result<BenchOutput> {
    scenario.validate()?;
    config.validate()?;
    if methods.is_empty() {
        return Err(LcidError::invalid("no methods selected"));
    }
    if jobs == 0 {
        return Err(LcidError::invalid("jobs must be at least 1"));
    }
    let theta0 = DVector::from_vec(scenario.resolve_theta0()?);
    let target = gram_target_from_spectrum(&scenario.spectrum, scenario.n_theta, scenario.n)?;
    let k_max = config
        .k_max
        .unwrap_or(scenario.n_theta)
        .min(scenario.n_theta);

    let design_result = design(&config.design, &target, scenario.n).map_err(|e| match e {
        lcid_core::Error::DegenerateDesign { .. } => "degenerate-design".to_string(),
        _ => "design".to_string(),
    });
    let design_ref = design_result.as_ref().ok();
    let (mu_design, fit_design) = match design_ref {
        Some(d) => ((d.mu_phi()?, d.mu_h()?), d.fim_fit_error()),
        None => ((f64::NAN, f64::NAN), f64::NAN),
    };
    let ctx = Context {
        scenario,
        config,
        theta0,
        target: target.clone(),
        design: design_ref,
        design_error: design_result.as_ref().err().cloned(),
        mu_design,
        fit_design,
        k_max,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| LcidError::invalid(format!("thread pool: {e}")))?;

    let mut records =
        Vec::with_capacity(methods.len() * scenario.snr_list.len() * scenario.mc_runs);
    let mut tuned_lambdas = Vec::new();
    for &snr in &scenario.snr_list {
        let sigma_phi = match design_ref {
            Some(d) => d.phi.matrix().clone(),
            None => ctx.data(1.0, snr, 0)?.phi_fdm,
        };
        let sigma2 = snr_to_sigma2(snr, &sigma_phi, &ctx.theta0)?;
        let tunable: Vec<Method> = methods
            .iter()
            .copied()
            .filter(|m| m.tuned() && !(m.uses_design() && design_ref.is_none()))
            .collect();

        let shared: BTreeMap<Method, f64> = if config.per_run_cv {
            BTreeMap::new()
        } else {
            let first = ctx.data(sigma2, snr, 0)?;
            let mut map = BTreeMap::new();
            for &m in &tunable {
                let lambda = ctx.tune(m, &first)?;
                tuned_lambdas.push((m, snr, lambda));
                map.insert(m, lambda);
            }
            map
        };

        let per_run: Vec<Vec<MetricsRecord>> = pool.install(|| {
            (0..scenario.mc_runs)
                .into_par_iter()
                .map(|run| {
                    let data = match ctx.data(sigma2, snr, run) {
                        Ok(d) => d,
                        Err(e) => {
                            let tag = error_tag(&e);
                            return methods
                                .iter()
                                .map(|&method| MetricsRecord {
                                    method,
                                    snr,
                                    run,
                                    nrmse: f64::NAN,
                                    v_app: f64::NAN,
                                    mu_phi: f64::NAN,
                                    mu_h: None,
                                    fim_fit_error: f64::NAN,
                                    wall_time_s: 0.0,
                                    status: RunStatus::Failed(tag.clone()),
                                })
                                .collect();
                        }
                    };
                    methods
                        .iter()
                        .map(|&method| {
                            let lambda = if !method.tuned() {
                                None
                            } else if config.per_run_cv {
                                if method.uses_design() && ctx.design.is_none() {
                                    None
                                } else {
                                    match ctx.tune(method, &data) {
                                        Ok(l) => Some(l),
                                        Err(e) => {
                                            let mut rec = ctx.record(method, snr, run, &data, None);
                                            rec.status = RunStatus::Failed(error_tag(&e));
                                            return rec;
                                        }
                                    }
                                }
                            } else {
                                shared.get(&method).copied()
                            };
                            ctx.record(method, snr, run, &data, lambda)
                        })
                        .collect()
                })
                .collect()
        });
        records.extend(per_run.into_iter().flatten());
    }
    Ok(BenchOutput {
        records,
        theta0: ctx.theta0,
        gram_target: target,
        design: design_result,
        tuned_lambdas,
    })
}

/// Mean, standard error and failures of one (method, SNR) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub snr: f64,
    pub mean_nrmse: f64,
    pub se_nrmse: f64,
    pub mean_vapp: f64,
    pub se_vapp: f64,
    pub failures: usize,
    pub runs: usize,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    name: &'static str,
    snr: OrderedSnr,
}

#[derive(PartialEq)]
struct OrderedSnr(f64);

impl Eq for OrderedSnr {}

impl PartialOrd for OrderedSnr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedSnr {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Summary table ordered by method name, then SNR. Successful runs are
/// summed in run order, so the table does not depend on record order.
pub fn aggregate(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<CellKey, (Method, Vec<&MetricsRecord>)> = BTreeMap::new();
    for r in records {
        cells
            .entry(CellKey {
                name: r.method.name(),
                snr: OrderedSnr(r.snr),
            })
            .or_insert_with(|| (r.method, Vec::new()))
            .1
            .push(r);
    }
    cells
        .into_iter()
        .map(|(key, (method, mut recs))| {
            recs.sort_by(|a, b| {
                a.run
                    .cmp(&b.run)
                    .then(a.nrmse.total_cmp(&b.nrmse))
                    .then(a.v_app.total_cmp(&b.v_app))
            });
            let ok: Vec<&&MetricsRecord> = recs.iter().filter(|r| r.status.is_ok()).collect();
            let nr: Vec<f64> = ok.iter().map(|r| r.nrmse).collect();
            let va: Vec<f64> = ok.iter().map(|r| r.v_app).collect();
            let (mean_nrmse, se_nrmse) = mean_se(&nr);
            let (mean_vapp, se_vapp) = mean_se(&va);
            SummaryRow {
                method,
                snr: key.snr.0,
                mean_nrmse,
                se_nrmse,
                mean_vapp,
                se_vapp,
                failures: recs.len() - ok.len(),
                runs: recs.len(),
            }
        })
        .collect()
}
