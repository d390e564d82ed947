//! `lcid` command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lcid_core::sysid::{
    bandpass_autocorrelation, coherence_bound, gram_target_from_spectrum, recover_input,
    FixedDenominatorFilter,
};
use lcid_core::{
    cross_validate, ladmm_lasso, lcid_estimate, ls_refit, mutual_coherence, omp, order_select_ls,
    recovery_bound, run_lcid, transformed_ls, Criterion, DesignConfig, DesignResult, GramTarget,
    LcidMode, SpectrumCoefficients, SymMatrix,
};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bench::{aggregate, run_benchmark, Method};
use crate::config::RunConfig;
use crate::csvio::{
    read_matrix, read_vector, records_to_csv, summary_to_csv, trace_to_csv, write_matrix,
    write_text, write_vector,
};
use crate::error::{LcidError, Result};
use crate::plot::{summary_chart, Metric};
use crate::scenario::Scenario;

#[derive(Debug, Parser)]
#[command(
    name = "lcid",
    version,
    about = "Low-coherence input design for sparse FIR identification"
)]
pub struct Cli {
    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a Toeplitz regressor and coordinate transformation.
    Design(DesignArgs),
    /// Estimate sparse parameters from a regressor and observations.
    Estimate(EstimateArgs),
    /// Mutual coherence and the sparse-recovery condition of a matrix.
    Coherence(CoherenceArgs),
    /// Monte-Carlo comparison of estimators.
    Bench(BenchArgs),
    /// Emit bandpass autocorrelation coefficients as JSON.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Args, Default)]
pub struct DesignOverrides {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lambda_prime: Option<f64>,
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub psd_floor: Option<f64>,
    #[arg(long)]
    pub max_outer_iters: Option<usize>,
    #[arg(long)]
    pub inner_iters: Option<usize>,
    #[arg(long)]
    pub stop_tol: Option<f64>,
}

impl DesignOverrides {
    fn apply(&self, c: &mut DesignConfig) -> Result<()> {
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = self.lambda_prime {
            c.lambda_prime = v;
        }
        if let Some(v) = self.sigma0 {
            c.sigma0 = v;
        }
        if let Some(v) = self.decay {
            c.decay = v;
        }
        if let Some(v) = self.psd_floor {
            c.psd_floor = lcid_core::PsdFloor::new(v)?;
        }
        if let Some(v) = self.max_outer_iters {
            c.max_outer_iters = v;
        }
        if let Some(v) = self.inner_iters {
            c.inner_iters = v;
        }
        if let Some(v) = self.stop_tol {
            c.stop_tol = v;
        }
        Ok(())
    }
}

#[derive(Debug, Args, Default)]
pub struct EstimatorOverrides {
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub grid_min: Option<f64>,
    #[arg(long)]
    pub grid_max: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub admm_max_iters: Option<usize>,
    #[arg(long)]
    pub admm_tol: Option<f64>,
    /// Largest order tried by order selection.
    #[arg(long)]
    pub k_max: Option<usize>,
}

impl EstimatorOverrides {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = self.train_fraction {
            c.cv.train_fraction = v;
        }
        if let Some(v) = self.grid_size {
            c.cv.grid_size = v;
        }
        if let Some(v) = self.grid_min {
            c.cv.grid_min = v;
        }
        if let Some(v) = self.grid_max {
            c.cv.grid_max = v;
        }
        if let Some(v) = self.rho {
            c.admm.rho = v;
        }
        if let Some(v) = self.admm_max_iters {
            c.admm.max_iters = v;
        }
        if let Some(v) = self.admm_tol {
            c.admm.tol = v;
        }
        if self.k_max.is_some() {
            c.k_max = self.k_max;
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_json_file(p),
        None => Ok(RunConfig::default()),
    }
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Gram target `T` as a matrix CSV (units of ΦᵀΦ).
    #[arg(
        long,
        conflicts_with = "spectrum",
        required_unless_present = "spectrum"
    )]
    pub gram_target: Option<PathBuf>,
    /// Spectrum JSON `{"r": [...]}`; the target is `N·Toeplitz(r)`.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Parameter count, required with `--spectrum`.
    #[arg(long)]
    pub n_theta: Option<usize>,
    /// Number of samples (rows of Φ).
    #[arg(long)]
    pub n: usize,
    /// Fixed-denominator prefilter JSON `{"denominator": [...], "gain": g}`;
    /// writes the raw input `u` to u.csv.
    #[arg(long)]
    pub filter: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: DesignOverrides,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub phi: PathBuf,
    /// Coordinate transformation for the LCID methods; identity when absent.
    #[arg(long)]
    pub h: Option<PathBuf>,
    #[arg(long)]
    pub y: PathBuf,
    /// One of LS-AICc, LS-BIC, OMP, LADMM, FDM-KnownSparsity, LCID-OMP, LCID-LADMM, LCID-BIC (case-insensitive).
    #[arg(long)]
    pub method: Method,
    /// Sparsity for OMP, LCID-OMP and FDM-KnownSparsity (leading-s support).
    #[arg(long)]
    pub s: Option<usize>,
    /// Lasso penalty; cross-validated when absent.
    #[arg(long)]
    pub l1_penalty: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: EstimatorOverrides,
}

#[derive(Debug, Args)]
pub struct CoherenceArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Sparsity level of the recovery condition.
    #[arg(long, default_value_t = 1)]
    pub s: usize,
    /// Exponent of the recovery probability bound.
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario JSON; the desk-scale default when absent.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Comma-separated method names; all when absent.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub mc_runs: Option<usize>,
    /// Comma-separated SNR values in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snr: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Also write nrmse.svg and vapp.svg.
    #[arg(long)]
    pub plots: bool,
    /// Record per-method wall time.
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub per_run_cv: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub design: DesignOverrides,
    #[command(flatten)]
    pub estimators: EstimatorOverrides,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Lower band edge, rad/sample.
    #[arg(long)]
    pub w1: f64,
    /// Upper band edge, rad/sample.
    #[arg(long)]
    pub w2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
    /// Number of lags `J`.
    #[arg(long)]
    pub order: usize,
    /// White power added to `r₀`.
    #[arg(long, default_value_t = 0.0)]
    pub white_floor: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` and runs the subcommand; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let verbose = cli.verbose;
    match &cli.command {
        Command::Design(a) => cmd_design(a, verbose),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Coherence(a) => cmd_coherence(a),
        Command::Bench(a) => cmd_bench(a, verbose),
        Command::Spectrum(a) => cmd_spectrum(a),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| LcidError::io(dir, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| LcidError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LcidError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

fn core_at(path: &Path) -> impl FnOnce(lcid_core::Error) -> LcidError + '_ {
    move |e| match e {
        lcid_core::Error::DegenerateDesign { .. } => LcidError::Core(e),
        other => LcidError::Json {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

#[derive(Serialize)]
struct DesignSummary<'a> {
    n: usize,
    n_theta: usize,
    iterations: usize,
    converged: bool,
    mu_h: f64,
    mu_phi: f64,
    fim_fit_error: f64,
    condition_number: f64,
    degenerate: bool,
    config: &'a DesignConfig,
}

fn write_design(
    dir: &Path,
    d: &DesignResult,
    config: &DesignConfig,
    filter: Option<&FixedDenominatorFilter>,
) -> Result<()> {
    write_matrix(&dir.join("phi.csv"), d.phi.matrix())?;
    write_matrix(&dir.join("h.csv"), &d.h)?;
    write_text(&dir.join("trace.csv"), &trace_to_csv(&d.trace))?;
    if let Some(f) = filter {
        let u = recover_input(d.phi.generator(), f);
        write_vector(&dir.join("u.csv"), &DVector::from_vec(u))?;
    }
    let summary = DesignSummary {
        n: d.phi.rows(),
        n_theta: d.phi.cols(),
        iterations: d.iterations(),
        converged: d.converged,
        mu_h: d.mu_h()?,
        mu_phi: d.mu_phi()?,
        fim_fit_error: d.fim_fit_error(),
        condition_number: d.condition_number,
        degenerate: !(d.condition_number <= lcid_core::lcid::MAX_CONDITION),
        config,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary is serializable");
    write_text(&dir.join("design.json"), &(json + "\n"))
}

pub fn cmd_design(a: &DesignArgs, verbose: u8) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?.design;
    a.overrides.apply(&mut config)?;
    config.validate()?;
    let target = match (&a.gram_target, &a.spectrum) {
        (Some(path), _) => {
            let m = read_matrix(path)?;
            let sym = SymMatrix::new(m).map_err(core_at(path))?;
            GramTarget::new(sym, 1.0).map_err(core_at(path))?
        }
        (None, Some(path)) => {
            let r: SpectrumCoefficients = read_json(path)?;
            r.validate().map_err(core_at(path))?;
            let n_theta = a
                .n_theta
                .ok_or_else(|| LcidError::invalid("--n-theta is required with --spectrum"))?;
            gram_target_from_spectrum(&r, n_theta, a.n)?
        }
        (None, None) => return Err(LcidError::invalid("provide --gram-target or --spectrum")),
    };
    let filter = match &a.filter {
        Some(path) => {
            let f: FixedDenominatorFilter = read_json(path)?;
            Some(
                FixedDenominatorFilter::new(f.denominator().to_vec(), f.gain())
                    .map_err(core_at(path))?,
            )
        }
        None => None,
    };
    ensure_dir(&a.out_dir)?;
    let phi0 = lcid_core::lcid::default_phi_init(&target, a.n)?;
    let p = target.dim();
    match run_lcid(&config, &target, &phi0, &DMatrix::identity(p, p)) {
        Ok(d) => {
            if verbose > 0 {
                let last = d.trace.last();
                eprintln!(
                    "design: {} iterations, mu_h {:.4}, mu_phi {:.4}, fit {:.4e}",
                    d.iterations(),
                    last.map_or(f64::NAN, |r| r.mu_h),
                    last.map_or(f64::NAN, |r| r.mu_phi),
                    last.map_or(f64::NAN, |r| r.fim_fit_error)
                );
            }
            write_design(&a.out_dir, &d, &config, filter.as_ref())
        }
        Err(lcid_core::Error::DegenerateDesign {
            condition_number,
            result,
        }) => {
            write_design(&a.out_dir, &result, &config, filter.as_ref())?;
            Err(LcidError::Core(lcid_core::Error::DegenerateDesign {
                condition_number,
                result,
            }))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct SupportSummary {
    method: String,
    support: Vec<usize>,
    sparsity: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    l1_penalty: Option<f64>,
}

fn lcid_ladmm(
    phi: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    cfg: &RunConfig,
) -> lcid_core::Result<DVector<f64>> {
    let model = transformed_ls(phi, h, y)?;
    let theta = ladmm_lasso(h, &model.x_hat, lambda, &cfg.admm)?;
    let support: Vec<usize> = (0..theta.len()).filter(|&i| theta[i] != 0.0).collect();
    if support.is_empty() {
        return Ok(theta);
    }
    Ok(ls_refit(phi, y, &support)?.theta)
}

type Fit<'a> = dyn Fn(&DMatrix<f64>, &DVector<f64>, f64) -> lcid_core::Result<DVector<f64>> + 'a;

pub fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    a.overrides.apply(&mut cfg);
    cfg.validate()?;
    let phi = read_matrix(&a.phi)?;
    let y = read_vector(&a.y)?;
    let p = phi.ncols();
    if y.len() != phi.nrows() {
        return Err(LcidError::invalid(format!(
            "{} has {} rows but {} has {} entries",
            a.phi.display(),
            phi.nrows(),
            a.y.display(),
            y.len()
        )));
    }
    let h = match &a.h {
        Some(path) => {
            let h = read_matrix(path)?;
            if h.shape() != (p, p) {
                return Err(LcidError::invalid(format!(
                    "{} is {}x{}, expected {p}x{p}",
                    path.display(),
                    h.nrows(),
                    h.ncols()
                )));
            }
            h
        }
        None => DMatrix::identity(p, p),
    };
    let k_max = cfg.k_max.unwrap_or(p).min(p);
    let need_s = || {
        a.s.ok_or_else(|| LcidError::invalid(format!("--s is required for {}", a.method)))
    };
    let mut penalty = None;
    let mut tune = |fit: &Fit| -> Result<f64> {
        let l = match a.l1_penalty {
            Some(l) => l,
            None => cross_validate(fit, &phi, &y, &cfg.cv)?.best,
        };
        penalty = Some(l);
        Ok(l)
    };
    let theta = match a.method {
        Method::LsAicc => {
            order_select_ls(&phi, &y, Criterion::Aicc, k_max)?
                .estimate
                .theta
        }
        Method::LsBic => {
            order_select_ls(&phi, &y, Criterion::Bic, k_max)?
                .estimate
                .theta
        }
        Method::Omp => omp(&phi, &y, need_s()?)?.estimate(p).theta,
        Method::FdmKnownSparsity => {
            let support: Vec<usize> = (0..need_s()?).collect();
            ls_refit(&phi, &y, &support)?.theta
        }
        Method::Ladmm => {
            let fit = |p: &DMatrix<f64>, y: &DVector<f64>, l: f64| ladmm_lasso(p, y, l, &cfg.admm);
            let l = tune(&fit)?;
            fit(&phi, &y, l)?
        }
        Method::LcidOmp | Method::LcidBic => {
            let model = transformed_ls(&phi, &h, &y)?;
            let mode = if a.method == Method::LcidOmp {
                LcidMode::FixedSparsity(need_s()?)
            } else {
                LcidMode::Order {
                    criterion: Criterion::Bic,
                    k_max,
                }
            };
            lcid_estimate(&model.x_hat, &h, &phi, &y, mode)?
                .estimate
                .theta
        }
        Method::LcidLadmm => {
            let fit = |p: &DMatrix<f64>, y: &DVector<f64>, l: f64| lcid_ladmm(p, &h, y, l, &cfg);
            let l = tune(&fit)?;
            fit(&phi, &y, l)?
        }
    };
    ensure_dir(&a.out_dir)?;
    write_vector(&a.out_dir.join("theta.csv"), &theta)?;
    let support: Vec<usize> = (0..p).filter(|&i| theta[i] != 0.0).collect();
    let summary = SupportSummary {
        method: a.method.name().to_string(),
        sparsity: support.len(),
        support,
        l1_penalty: penalty,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary is serializable");
    write_text(&a.out_dir.join("support.json"), &(json + "\n"))
}

pub fn cmd_coherence(a: &CoherenceArgs) -> Result<()> {
    let m = read_matrix(&a.matrix)?;
    let mu = mutual_coherence(&m).map_err(|e| match e {
        lcid_core::Error::ZeroColumn(j) => {
            LcidError::invalid(format!("{}: column {j} is zero", a.matrix.display()))
        }
        other => other.into(),
    })?;
    if a.s == 0 {
        return Err(LcidError::invalid("--s must be at least 1"));
    }
    let bound = coherence_bound(a.s);
    println!("mu = {mu}");
    println!("bound = {bound}");
    println!("condition = {}", mu < bound);
    match recovery_bound(m.ncols(), a.s, a.nu) {
        Ok(p) => println!("probability = {p}"),
        Err(e) => println!("probability = n/a ({e})"),
    }
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs, verbose: u8) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    a.design.apply(&mut cfg.design)?;
    a.estimators.apply(&mut cfg);
    if a.timing {
        cfg.timing = true;
    }
    if a.per_run_cv {
        cfg.per_run_cv = true;
    }
    let mut scenario = match &a.scenario {
        Some(path) => Scenario::from_json_file(path)?,
        None => Scenario::desk_default(),
    };
    if let Some(r) = a.mc_runs {
        scenario.mc_runs = r;
    }
    if !a.snr.is_empty() {
        scenario.snr_list = a.snr.clone();
    }
    if let Some(s) = a.seed {
        scenario.seed = s;
    }
    scenario.validate()?;
    let methods: Vec<Method> = if a.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        a.methods.clone()
    };
    let out = run_benchmark(&scenario, &methods, &cfg, a.jobs)?;
    if verbose > 0 {
        match &out.design {
            Ok(d) => eprintln!(
                "design: mu_phi {:.4}, mu_h {:.4}, fit {:.4e}",
                d.mu_phi().unwrap_or(f64::NAN),
                d.mu_h().unwrap_or(f64::NAN),
                d.fim_fit_error()
            ),
            Err(reason) => eprintln!("design failed: {reason}"),
        }
        for (m, snr, l) in &out.tuned_lambdas {
            eprintln!("cv: {m} at {snr} dB -> {l:e}");
        }
    }
    ensure_dir(&a.out_dir)?;
    write_text(
        &a.out_dir.join("records.csv"),
        &records_to_csv(&out.records),
    )?;
    let summary = aggregate(&out.records);
    write_text(&a.out_dir.join("summary.csv"), &summary_to_csv(&summary))?;
    if a.plots {
        write_text(
            &a.out_dir.join("nrmse.svg"),
            &summary_chart(&summary, Metric::Nrmse),
        )?;
        write_text(
            &a.out_dir.join("vapp.svg"),
            &summary_chart(&summary, Metric::Vapp),
        )?;
    }
    if out.records.iter().all(|r| !r.status.is_ok()) {
        return Err(LcidError::AllRunsFailed);
    }
    Ok(())
}

pub fn cmd_spectrum(a: &SpectrumArgs) -> Result<()> {
    let r =
        bandpass_autocorrelation(a.w1, a.w2, a.power, a.order)?.with_white_floor(a.white_floor)?;
    let json = serde_json::to_string_pretty(&r).expect("spectrum is serializable") + "\n";
    match &a.out {
        Some(path) => write_text(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}
