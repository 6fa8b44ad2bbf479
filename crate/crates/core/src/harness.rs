//! Monte Carlo experiments: configuration, ensemble runs, rate fits,
//! distribution diagnostics and report files.
//!
//! Every path is sampled once on the finest grid and coarsened for each `n`.
//! Per-path work runs on a rayon pool; results are collected in path-index
//! order before any reduction, so outputs do not depend on the thread count.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{c_h, CHResult};
use crate::error::{Error, Result};
use crate::fbm::{FbmPath, FbmSampler};
use crate::grid::{HurstParam, TimeGrid};
use crate::sde::{
    error_process, euler_solve, fundamental_solution_with, limit_conditional_variance, reference_solve, ProblemSpec, SdeProblem,
};
use crate::stats::{self, fit_log_log};
use crate::sums::{
    compensated_sum_unchecked, discrete_integral, h_increments, normalization, riemann_residual, skorohod_gap_single, ControlledPath,
    WeightFn,
};

pub const SCHEMA_VERSION: &str = "1";

/// Largest fine grid (points per path) accepted by validation.
pub const MAX_FINE_STEPS: usize = 1 << 24;

/// Identifier of the build, from `git describe` when available.
pub fn build_id() -> &'static str {
    env!("FRACSDE_BUILD_ID")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EulerRate,
    SumRate,
    Cancellation,
    SkorohodGap,
    Riemann,
    DistEuler,
    DistSum,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::EulerRate,
        ExperimentKind::SumRate,
        ExperimentKind::Cancellation,
        ExperimentKind::SkorohodGap,
        ExperimentKind::Riemann,
        ExperimentKind::DistEuler,
        ExperimentKind::DistSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EulerRate => "euler_rate",
            ExperimentKind::SumRate => "sum_rate",
            ExperimentKind::Cancellation => "cancellation",
            ExperimentKind::SkorohodGap => "skorohod_gap",
            ExperimentKind::Riemann => "riemann",
            ExperimentKind::DistEuler => "dist_euler",
            ExperimentKind::DistSum => "dist_sum",
        }
    }

    pub fn is_rate(self) -> bool {
        matches!(
            self,
            ExperimentKind::EulerRate | ExperimentKind::SumRate | ExperimentKind::Cancellation | ExperimentKind::SkorohodGap
        )
    }

    fn uses_sde(self) -> bool {
        matches!(self, ExperimentKind::EulerRate | ExperimentKind::DistEuler)
    }
}

fn default_horizon() -> f64 {
    1.0
}
fn default_n_list() -> Vec<usize> {
    vec![64, 128, 256, 512, 1024]
}
fn default_m_sub() -> usize {
    16
}
fn default_refine() -> usize {
    64
}
fn default_paths() -> usize {
    2000
}
fn default_order() -> usize {
    2
}
fn default_ch_tol() -> f64 {
    1e-10
}
fn default_weight() -> WeightFn {
    WeightFn::Sin
}

/// Experiment description. Only `kind` and `h` are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub h: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_m_sub")]
    pub m_sub: usize,
    #[serde(default = "default_refine")]
    pub refine_factor: usize,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub ell: Option<usize>,
    #[serde(default = "default_weight")]
    pub weight: WeightFn,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default = "default_ch_tol")]
    pub ch_tol: f64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

/// `(key, unit, default, meaning)` for every configuration key.
pub const CONFIG_KEYS: &[(&str, &str, &str, &str)] = &[
    ("kind", "-", "required", "experiment: euler_rate, sum_rate, cancellation, skorohod_gap, riemann, dist_euler, dist_sum"),
    ("h", "-", "required", "Hurst parameter, 0 < h < 1/2"),
    ("T", "time", "1.0", "horizon"),
    ("n_list", "steps", "[64,128,256,512,1024]", "coarse step counts, strictly increasing, each dividing the last"),
    ("m_sub", "sub-steps", "16", "fine sub-steps per coarse step of the largest n (sum experiments)"),
    ("refine_factor", "sub-steps", "64", "reference refinement of the largest n (Euler experiments, >= 8)"),
    ("paths", "paths", "2000", "Monte Carlo sample size M"),
    ("master_seed", "-", "0", "seed of all random streams"),
    ("ell", "levels", "least l with l*h > 1/2", "compensation order"),
    ("weight", "-", "sin", "weight function z = f(x): sin, cos, exp, identity"),
    ("order", "-", "2", "monomial order L for skorohod_gap"),
    ("problem", "-", "scalar b = sin, sigma(t) = 1 + t/2, y0 = 0", "SDE: {y0, drift, diffusion}"),
    ("ch_tol", "-", "1e-10", "absolute tolerance for c_H"),
    ("threads", "threads", "all cores", "worker threads"),
    ("output_dir", "path", "current directory", "directory for output files"),
];

impl ExperimentConfig {
    /// Configuration with every optional key at its default.
    pub fn new(kind: ExperimentKind, h: f64) -> Self {
        Self {
            kind,
            h,
            horizon: default_horizon(),
            n_list: default_n_list(),
            m_sub: default_m_sub(),
            refine_factor: default_refine(),
            paths: default_paths(),
            master_seed: 0,
            ell: None,
            weight: default_weight(),
            order: default_order(),
            problem: ProblemSpec::default(),
            ch_tol: default_ch_tol(),
            threads: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn hurst(&self) -> Result<HurstParam> {
        HurstParam::new(self.h)
            .and_then(HurstParam::require_rough)
            .map_err(|e| Error::Config(format!("h: {e}")))
    }

    pub fn ell(&self) -> Result<usize> {
        let h = self.hurst()?;
        Ok(self.ell.unwrap_or_else(|| h.least_ell()))
    }

    pub fn n_max(&self) -> usize {
        self.n_list.last().copied().unwrap_or(0)
    }

    fn sub_steps(&self) -> usize {
        if self.kind.uses_sde() {
            self.refine_factor
        } else {
            self.m_sub
        }
    }

    /// Grid on which paths are sampled.
    pub fn fine_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.n_max(), self.sub_steps())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        let h = self.hurst()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return cfg(format!("T must be positive, got {}", self.horizon));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return cfg("n_list must hold positive step counts".into());
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return cfg("n_list must be strictly increasing".into());
        }
        if self.n_list.iter().any(|n| self.n_max() % n != 0) {
            return cfg("every n in n_list must divide the largest".into());
        }
        if self.kind.is_rate() && self.n_list.len() < 2 {
            return cfg("rate experiments need at least two values in n_list".into());
        }
        if self.m_sub < 2 {
            return cfg("m_sub must be at least 2".into());
        }
        if self.kind.uses_sde() && self.refine_factor < 8 {
            return cfg("refine_factor must be at least 8".into());
        }
        if self.n_max().saturating_mul(self.sub_steps()) > MAX_FINE_STEPS {
            return cfg(format!("fine grid exceeds {MAX_FINE_STEPS} steps"));
        }
        if self.paths < 2 {
            return cfg("paths must be at least 2".into());
        }
        if !(self.ch_tol > 0.0) {
            return cfg("ch_tol must be positive".into());
        }
        if self.threads == Some(0) {
            return cfg("threads must be positive".into());
        }
        if self.master_seed > i64::MAX as u64 {
            // stream ids are 64-bit; seeds are kept within JSON-safe integers
            return cfg("master_seed too large".into());
        }
        let ell = self.ell()?;
        if ell as f64 * h.value() <= 0.5 {
            return cfg(format!("ell * h must exceed 1/2 (ell = {ell}, h = {})", h.value()));
        }
        if self.kind == ExperimentKind::SkorohodGap && self.order == 0 {
            return cfg("order must be at least 1".into());
        }
        if self.kind.uses_sde() {
            let p = self.problem.build().map_err(|e| Error::Config(format!("problem: {e}")))?;
            p.check_derivatives(ell + 1, self.master_seed)
                .map_err(|e| Error::Config(format!("problem: {e}")))?;
            if self.kind == ExperimentKind::DistEuler && p.dim() != 1 {
                return cfg("dist_euler requires a scalar problem".into());
            }
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
    }

    /// Runs `f` on every path index in parallel; results in index order.
    fn map_paths<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&FbmPath) -> Result<T> + Sync,
    {
        let sampler = FbmSampler::new(self.fine_grid()?, self.hurst()?)?;
        let seed = self.master_seed;
        self.pool()?.install(|| {
            (0..self.paths as u64)
                .into_par_iter()
                .map(|i| f(&sampler.sample(seed, i)?))
                .collect()
        })
    }
}

/// Log-log fit of the `L2` norm of a statistic against `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub ns: Vec<usize>,
    pub l2_errors: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Decay rate: `‖·‖_{L2} ∝ n^{−slope}`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_ci_95: [f64; 2],
}

/// Fits per-path samples: `samples[i][j]` is the statistic of path `i` at `ns[j]`.
pub fn fit_rate(ns: &[usize], samples: &[Vec<f64>]) -> Result<RateFit> {
    let mut l2 = Vec::with_capacity(ns.len());
    let mut se = Vec::with_capacity(ns.len());
    for j in 0..ns.len() {
        let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        let (r, e) = stats::rms_with_se(&col);
        l2.push(r);
        se.push(e);
    }
    let nf: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
    let f = fit_log_log(&nf, &l2, &se)?;
    Ok(RateFit {
        ns: ns.to_vec(),
        l2_errors: l2,
        standard_errors: se,
        slope: f.slope,
        intercept: f.intercept,
        r2: f.r2,
        slope_ci_95: f.slope_ci_95,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub statistic: String,
    pub fit: RateFit,
}

/// Per-path inputs of a distribution test.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistSamples {
    /// Normalized statistic.
    pub statistic: Vec<f64>,
    /// Conditional variance of its limit given the path.
    pub cond_var: Vec<f64>,
    /// `x_T`, `∫_0^T x_u du`, `max |x|` per path.
    pub functionals: [Vec<f64>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistTestReport {
    /// Sample variance of the statistic over the mean conditional variance.
    pub var_ratio: f64,
    pub var_ratio_se: f64,
    pub ks_statistic: f64,
    pub ks_p: f64,
    /// Correlation of the studentized statistic with `x_T`, `∫x`, `max|x|`.
    pub corr_with_x_functionals: Vec<f64>,
    /// Null standard error of each correlation, `1/√M`.
    pub corr_se: f64,
    #[serde(rename = "M")]
    pub m: usize,
    /// Paths dropped because the conditional variance vanished.
    pub excluded: usize,
    pub n: usize,
    pub studentized: Vec<f64>,
}

/// Studentizes, runs the KS test and the independence diagnostics.
pub fn dist_report(samples: &DistSamples, n: usize) -> Result<DistTestReport> {
    let keep: Vec<usize> = (0..samples.statistic.len())
        .filter(|&i| samples.cond_var[i] > 1e-300 && samples.cond_var[i].is_finite() && samples.statistic[i].is_finite())
        .collect();
    let m = keep.len();
    if m < 2 {
        return Err(Error::DegenerateFit("fewer than two usable paths".into()));
    }
    let pick = |v: &[f64]| -> Vec<f64> { keep.iter().map(|&i| v[i]).collect() };
    let stat = pick(&samples.statistic);
    let var = pick(&samples.cond_var);
    let studentized: Vec<f64> = stat.iter().zip(&var).map(|(s, v)| s / v.sqrt()).collect();

    let emp = stats::variance(&stat);
    let theo = stats::mean(&var);
    let var_ratio = emp / theo;
    let sq: Vec<f64> = stat.iter().map(|s| s * s).collect();
    let rel_emp = stats::standard_error(&sq) / stats::mean(&sq);
    let rel_theo = stats::standard_error(&var) / theo;
    let var_ratio_se = var_ratio * (rel_emp.powi(2) + rel_theo.powi(2)).sqrt();

    let (ks_statistic, ks_p) = stats::ks_test_normal(&studentized);
    let corr = samples
        .functionals
        .iter()
        .map(|f| stats::correlation(&studentized, &pick(f)))
        .collect();
    Ok(DistTestReport {
        var_ratio,
        var_ratio_se,
        ks_statistic,
        ks_p,
        corr_with_x_functionals: corr,
        corr_se: 1.0 / (m as f64).sqrt(),
        m,
        excluded: samples.statistic.len() - m,
        n,
        studentized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Report {
    Rate { series: Vec<RateSeries> },
    Dist { report: DistTestReport },
}

/// One acceptance threshold evaluated on a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

fn check(name: &str, value: f64, lo: f64, hi: f64) -> CheckResult {
    CheckResult { name: name.into(), value, lo, hi, pass: value >= lo && value <= hi }
}

impl Report {
    pub fn rate(&self, statistic: &str) -> Option<&RateFit> {
        match self {
            Report::Rate { series } => series.iter().find(|s| s.statistic == statistic).map(|s| &s.fit),
            Report::Dist { .. } => None,
        }
    }

    pub fn dist(&self) -> Option<&DistTestReport> {
        match self {
            Report::Dist { report } => Some(report),
            Report::Rate { .. } => None,
        }
    }

    /// Default thresholds: rate slopes within 0.1 of their targets, the
    /// Skorohod gap halving over the `n` range, and for distributions a
    /// variance ratio in `[0.9, 1.1]`, KS p-value above 0.01 and
    /// correlations within 4 standard errors of zero.
    pub fn checks(&self, config: &ExperimentConfig) -> Vec<CheckResult> {
        let h = config.h;
        let mut out = Vec::new();
        match self {
            Report::Rate { series } => {
                for s in series {
                    let f = &s.fit;
                    match s.statistic.as_str() {
                        "single_sum" => out.push(check("single_sum.slope", f.slope, 2.0 * h - 0.1, 2.0 * h + 0.1)),
                        "skorohod_gap" => {
                            let ratio = f.l2_errors[f.l2_errors.len() - 1] / f.l2_errors[0];
                            out.push(check("skorohod_gap.last_over_first", ratio, 0.0, 0.5));
                        }
                        name => {
                            out.push(check(&format!("{name}.slope"), f.slope, h + 0.4, h + 0.6));
                            if config.kind == ExperimentKind::EulerRate {
                                out.push(check(&format!("{name}.r2"), f.r2, 0.98, 1.0));
                            }
                        }
                    }
                }
            }
            Report::Dist { report } => {
                out.push(check("var_ratio", report.var_ratio, 0.9, 1.1));
                out.push(check("ks_p", report.ks_p, 0.01, 1.0));
                let band = 4.0 * report.corr_se;
                for (name, c) in ["corr_x_T", "corr_int_x", "corr_max_abs_x"].iter().zip(&report.corr_with_x_functionals) {
                    out.push(check(name, *c, -band, band));
                }
            }
        }
        out
    }
}

fn path_functionals(p: &FbmPath) -> [f64; 3] {
    let v = p.values();
    let n = v.len() - 1;
    let integral = (v[1..n].iter().sum::<f64>() + 0.5 * (v[0] + v[n])) * p.grid().fine_dt();
    let max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    [v[n], integral, max]
}

/// Fine trapezoid of `g(x_u)` over `[0, T]`.
fn fine_integral<G: Fn(f64) -> f64>(p: &FbmPath, g: G) -> f64 {
    let v = p.values();
    let n = v.len() - 1;
    let inner: f64 = v[1..n].iter().map(|x| g(*x)).sum();
    (inner + 0.5 * (g(v[0]) + g(v[n]))) * p.grid().fine_dt()
}

/// Runs a rate experiment.
pub fn run_rate(config: &ExperimentConfig) -> Result<Vec<RateSeries>> {
    config.validate()?;
    if !config.kind.is_rate() {
        return Err(Error::Config(format!("{} is not a rate experiment", config.kind.name())));
    }
    let ns = config.n_list.clone();
    let ell = config.ell()?;
    let n_max = config.n_max();
    let problem: Option<SdeProblem> = if config.kind.uses_sde() { Some(config.problem.build()?) } else { None };

    let per_path = config.map_paths(|p| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * ns.len());
        match config.kind {
            ExperimentKind::EulerRate => {
                let prob = problem.as_ref().expect("built above");
                let y = reference_solve(prob, p, n_max, config.refine_factor)?;
                for &n in &ns {
                    let e = euler_solve(prob, p, n)?;
                    let err = error_process(&y, &e)?;
                    let last = &err[n * prob.dim()..];
                    out.push(last.iter().map(|v| v * v).sum::<f64>().sqrt());
                }
            }
            ExperimentKind::SumRate | ExperimentKind::Cancellation => {
                for &n in &ns {
                    let pc = p.regrid(n)?;
                    let z = ControlledPath::from_weight(&pc, config.weight, ell)?;
                    let hs = h_increments(&pc, ell)?;
                    let range = pc.grid().full_range();
                    if config.kind == ExperimentKind::Cancellation {
                        out.push(discrete_integral(z.level(0), &hs[0].values, range)?);
                    }
                    out.push(crate::sums::compensated_sum_with(&z, &hs, range)?);
                }
            }
            ExperimentKind::SkorohodGap => {
                for &n in &ns {
                    out.push(skorohod_gap_single(p, config.order, n, 0.0, config.horizon)?);
                }
            }
            _ => unreachable!("checked is_rate"),
        }
        Ok(out)
    })?;

    let names: Vec<&str> = match config.kind {
        ExperimentKind::EulerRate => vec!["terminal_error"],
        ExperimentKind::SumRate => vec!["compensated_sum"],
        ExperimentKind::Cancellation => vec!["single_sum", "compensated_sum"],
        _ => vec!["skorohod_gap"],
    };
    let stride = names.len();
    names
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let cols: Vec<Vec<f64>> = per_path
                .iter()
                .map(|row| (0..ns.len()).map(|j| row[j * stride + s]).collect())
                .collect();
            Ok(RateSeries { statistic: name.to_string(), fit: fit_rate(&ns, &cols)? })
        })
        .collect()
}

/// Runs a distribution experiment at the largest `n` of `n_list`.
pub fn run_dist(config: &ExperimentConfig) -> Result<DistTestReport> {
    config.validate()?;
    let n = config.n_max();
    let h = config.hurst()?;
    let ch: CHResult = c_h(h, config.ch_tol)?;
    let t = config.horizon;
    let scale = ch.value * t.powf(h.two_h() + 1.0);
    let ell = config.ell()?;
    let f = config.weight;
    let problem = match config.kind {
        ExperimentKind::DistEuler => Some(config.problem.build()?),
        ExperimentKind::DistSum | ExperimentKind::Riemann => None,
        k => return Err(Error::Config(format!("{} is not a distribution experiment", k.name()))),
    };

    let rows = config.map_paths(|p| -> Result<(f64, f64, [f64; 3])> {
        let (stat, var) = match config.kind {
            ExperimentKind::DistSum => {
                let z = ControlledPath::from_weight(p, f, ell)?;
                let e = compensated_sum_unchecked(&z, p, p.grid().full_range())?;
                (normalization(p) * e, scale * fine_integral(p, |x| f.derivative(0, x).powi(2)))
            }
            ExperimentKind::Riemann => {
                let z = ControlledPath::from_weight(p, f, ell + 1)?;
                let z_fine: Vec<f64> = p.values().iter().map(|x| f.derivative(0, *x)).collect();
                let u = riemann_residual(&z, &z_fine, p, p.grid().full_range())?;
                (u, scale * fine_integral(p, |x| f.derivative(1, x).powi(2)))
            }
            _ => {
                let prob = problem.as_ref().expect("built above");
                let y = reference_solve(prob, p, n, config.refine_factor)?;
                let e = euler_solve(prob, p, n)?;
                let err = error_process(&y, &e)?[n];
                let fp = fundamental_solution_with(prob, &y, 1)?;
                (normalization(&p.regrid(n)?) * err, limit_conditional_variance(prob, &y, &fp, &ch)?)
            }
        };
        Ok((stat, var, path_functionals(p)))
    })?;

    let mut samples = DistSamples::default();
    for (s, v, fx) in rows {
        samples.statistic.push(s);
        samples.cond_var.push(v);
        for (dst, val) in samples.functionals.iter_mut().zip(fx) {
            dst.push(val);
        }
    }
    dist_report(&samples, n)
}

/// Runs any experiment.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    if config.kind.is_rate() {
        Ok(Report::Rate { series: run_rate(config)? })
    } else {
        Ok(Report::Dist { report: run_dist(config)? })
    }
}

/// Run summary written next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: String,
    pub build_id: String,
    pub config: ExperimentConfig,
    pub report: Report,
    pub checks: Vec<CheckResult>,
}

impl Summary {
    pub fn new(config: &ExperimentConfig, report: Report) -> Self {
        let checks = report.checks(config);
        Self { schema_version: SCHEMA_VERSION.into(), build_id: build_id().into(), config: config.clone(), report, checks }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// 17 significant digits.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub const RATE_CSV_HEADER: &str = "n,l2_error,se";
pub const DIST_CSV_HEADER: &str = "path,studentized";

pub fn write_rate_csv<W: Write>(mut w: W, fit: &RateFit) -> Result<()> {
    writeln!(w, "{RATE_CSV_HEADER}")?;
    for i in 0..fit.ns.len() {
        writeln!(w, "{},{},{}", fit.ns[i], fmt17(fit.l2_errors[i]), fmt17(fit.standard_errors[i]))?;
    }
    Ok(())
}

/// Rows `(n, l2_error, se)` of a rate CSV.
pub fn read_rate_csv<R: std::io::Read>(r: R) -> Result<Vec<(usize, f64, f64)>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != RATE_CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    let bad = |l: &str| Error::Config(format!("malformed CSV row {l:?}"));
    lines
        .map(|l| {
            let l = l?;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(bad(&l));
            }
            Ok((
                f[0].parse().map_err(|_| bad(&l))?,
                f[1].parse().map_err(|_| bad(&l))?,
                f[2].parse().map_err(|_| bad(&l))?,
            ))
        })
        .collect()
}

pub fn write_dist_csv<W: Write>(mut w: W, report: &DistTestReport) -> Result<()> {
    writeln!(w, "{DIST_CSV_HEADER}")?;
    for (i, s) in report.studentized.iter().enumerate() {
        writeln!(w, "{i},{}", fmt17(*s))?;
    }
    Ok(())
}

/// Writes the data files and `<kind>_summary.json` into `dir`; returns the
/// paths written, data files first.
pub fn persist(summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let kind = summary.config.kind.name();
    let mut files = Vec::new();
    match &summary.report {
        Report::Rate { series } => {
            for s in series {
                let name = if series.len() == 1 { format!("{kind}.csv") } else { format!("{kind}_{}.csv", s.statistic) };
                let path = dir.join(name);
                write_rate_csv(fs::File::create(&path)?, &s.fit)?;
                files.push(path);
            }
        }
        Report::Dist { report } => {
            let path = dir.join(format!("{kind}.csv"));
            write_dist_csv(fs::File::create(&path)?, report)?;
            files.push(path);
            let path = dir.join(format!("{kind}.json"));
            let brief = serde_json::json!({
                "var_ratio": report.var_ratio,
                "ks_p": report.ks_p,
                "corr_with_x": report.corr_with_x_functionals,
            });
            fs::write(&path, serde_json::to_string_pretty(&brief)? + "\n")?;
            files.push(path);
        }
    }
    let path = dir.join(format!("{kind}_summary.json"));
    fs::write(&path, serde_json::to_string_pretty(summary)? + "\n")?;
    files.push(path);
    Ok(files)
}
