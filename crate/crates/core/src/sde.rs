//! Additive SDEs `dy = b(y) dt + σ(t) dx` driven by a scalar fBm.
//!
//! States are `R^m` vectors stored flat (`k * m + i`). Matrices of the
//! fundamental solutions are stored column-major so they can be viewed as
//! `nalgebra` matrices without copying.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::CHResult;
use crate::error::{Error, Result};
use crate::fbm::{FbmPath, PathId};
use crate::grid::TimeGrid;
use crate::rng;
use crate::sums::ControlledPath;

/// Drift `b: R^m → R^m` with derivatives evaluated along a direction.
pub trait Drift: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], out: &mut [f64]);
    /// Jacobian `∂b(y)`, column-major `m × m`.
    fn jacobian(&self, y: &[f64], out: &mut [f64]);
    /// `∂^i b(y)[v, …, v]`; order 0 is `b(y)`.
    fn directional(&self, order: usize, y: &[f64], v: &[f64], out: &mut [f64]) -> Result<()>;
    /// Highest derivative order available.
    fn max_order(&self) -> usize;
}

/// Diffusion coefficient `σ: [0, T] → R^m` and its time derivative.
pub trait Diffusion: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, out: &mut [f64]);
    fn deriv(&self, t: f64, out: &mut [f64]);
}

/// Built-in drifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    /// `b ≡ 0` in dimension `dim`.
    Zero { dim: usize },
    /// `b(y) = A y`, `a` given row by row.
    Linear { a: Vec<Vec<f64>> },
    /// `b(y)_i = sin(y_i)` in dimension `dim`.
    Sine { dim: usize },
}

impl Drift for DriftSpec {
    fn dim(&self) -> usize {
        match self {
            DriftSpec::Zero { dim } | DriftSpec::Sine { dim } => *dim,
            DriftSpec::Linear { a } => a.len(),
        }
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) {
        match self {
            DriftSpec::Zero { .. } => out.fill(0.0),
            DriftSpec::Linear { a } => {
                for (o, row) in out.iter_mut().zip(a) {
                    *o = row.iter().zip(y).map(|(r, x)| r * x).sum();
                }
            }
            DriftSpec::Sine { .. } => {
                for (o, x) in out.iter_mut().zip(y) {
                    *o = x.sin();
                }
            }
        }
    }

    fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        let m = self.dim();
        out.fill(0.0);
        match self {
            DriftSpec::Zero { .. } => {}
            DriftSpec::Linear { a } => {
                for (i, row) in a.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        out[j * m + i] = *v;
                    }
                }
            }
            DriftSpec::Sine { .. } => {
                for i in 0..m {
                    out[i * m + i] = y[i].cos();
                }
            }
        }
    }

    fn directional(&self, order: usize, y: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            DriftSpec::Zero { .. } => out.fill(0.0),
            DriftSpec::Linear { a } => match order {
                0 => self.eval(y, out),
                1 => {
                    for (o, row) in out.iter_mut().zip(a) {
                        *o = row.iter().zip(v).map(|(r, x)| r * x).sum();
                    }
                }
                _ => out.fill(0.0),
            },
            DriftSpec::Sine { .. } => {
                for ((o, x), d) in out.iter_mut().zip(y).zip(v) {
                    let f = match order % 4 {
                        0 => x.sin(),
                        1 => x.cos(),
                        2 => -x.sin(),
                        _ => -x.cos(),
                    };
                    *o = f * d.powi(order as i32);
                }
            }
        }
        Ok(())
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }
}

/// Built-in diffusion coefficients, one entry per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    /// `σ(t) = c`.
    Constant { c: Vec<f64> },
    /// `σ(t) = a + b t`.
    Affine { a: Vec<f64>, b: Vec<f64> },
    /// `σ(t) = a e^{r t}`.
    Exponential { a: Vec<f64>, r: Vec<f64> },
}

impl Diffusion for DiffusionSpec {
    fn dim(&self) -> usize {
        match self {
            DiffusionSpec::Constant { c } => c.len(),
            DiffusionSpec::Affine { a, .. } | DiffusionSpec::Exponential { a, .. } => a.len(),
        }
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        match self {
            DiffusionSpec::Constant { c } => out.copy_from_slice(c),
            DiffusionSpec::Affine { a, b } => {
                for i in 0..out.len() {
                    out[i] = a[i] + b[i] * t;
                }
            }
            DiffusionSpec::Exponential { a, r } => {
                for i in 0..out.len() {
                    out[i] = a[i] * (r[i] * t).exp();
                }
            }
        }
    }

    fn deriv(&self, t: f64, out: &mut [f64]) {
        match self {
            DiffusionSpec::Constant { .. } => out.fill(0.0),
            DiffusionSpec::Affine { b, .. } => out.copy_from_slice(b),
            DiffusionSpec::Exponential { a, r } => {
                for i in 0..out.len() {
                    out[i] = a[i] * r[i] * (r[i] * t).exp();
                }
            }
        }
    }
}

/// Serializable problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub y0: Vec<f64>,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
}

impl Default for ProblemSpec {
    /// Scalar `b = sin`, `σ(t) = 1 + t/2`, `y0 = 0`.
    fn default() -> Self {
        Self {
            y0: vec![0.0],
            drift: DriftSpec::Sine { dim: 1 },
            diffusion: DiffusionSpec::Affine { a: vec![1.0], b: vec![0.5] },
        }
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<SdeProblem> {
        if let DriftSpec::Linear { a } = &self.drift {
            if a.iter().any(|r| r.len() != a.len()) {
                return Err(Error::Dimension("linear drift matrix must be square".into()));
            }
        }
        let consistent = match &self.diffusion {
            DiffusionSpec::Constant { .. } => true,
            DiffusionSpec::Affine { a, b } => a.len() == b.len(),
            DiffusionSpec::Exponential { a, r } => a.len() == r.len(),
        };
        if !consistent {
            return Err(Error::Dimension("diffusion coefficients differ in length".into()));
        }
        SdeProblem::new(self.y0.clone(), Arc::new(self.drift.clone()), Arc::new(self.diffusion.clone()))
    }
}

#[derive(Debug, Clone)]
pub struct SdeProblem {
    pub y0: Vec<f64>,
    pub drift: Arc<dyn Drift>,
    pub diffusion: Arc<dyn Diffusion>,
}

impl SdeProblem {
    pub fn new(y0: Vec<f64>, drift: Arc<dyn Drift>, diffusion: Arc<dyn Diffusion>) -> Result<Self> {
        let m = y0.len();
        if m == 0 || drift.dim() != m || diffusion.dim() != m {
            return Err(Error::Dimension(format!(
                "y0 has {m} components, drift {}, diffusion {}",
                drift.dim(),
                diffusion.dim()
            )));
        }
        Ok(Self { y0, drift, diffusion })
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    /// Checks that derivatives up to `order` exist and that each matches a
    /// central difference of the previous order at 20 random points.
    pub fn check_derivatives(&self, order: usize, seed: u64) -> Result<()> {
        if self.drift.max_order() < order {
            return Err(Error::MissingDerivative { order, max: self.drift.max_order() });
        }
        let m = self.dim();
        let mut rng = rng::stream(seed, 0);
        let (mut lo, mut hi, mut got) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let eps = 1e-5;
        for _ in 0..20 {
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            for i in 1..=order {
                let yp: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
                let ym: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
                self.drift.directional(i - 1, &yp, &v, &mut hi)?;
                self.drift.directional(i - 1, &ym, &v, &mut lo)?;
                self.drift.directional(i, &y, &v, &mut got)?;
                let scale = got.iter().chain(&hi).map(|x| x.abs()).fold(1e-3, f64::max);
                for c in 0..m {
                    let fd = (hi[c] - lo[c]) / (2.0 * eps);
                    if (fd - got[c]).abs() > 1e-5 * scale {
                        return Err(Error::DerivativeMismatch(format!(
                            "order {i}, component {c}: analytic {} vs difference {fd}",
                            got[c]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Euler iterates (or any state trajectory) on the points of a grid.
#[derive(Debug, Clone)]
pub struct EulerResult {
    pub grid: TimeGrid,
    pub dim: usize,
    pub values: Vec<f64>,
    pub path_ref: PathId,
}

impl EulerResult {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Largest deviation from the update identity
    /// `y_{k+1} = y_k + b(y_k)Δ + σ(t_k)δx`.
    pub fn update_defect(&self, problem: &SdeProblem, path: &FbmPath) -> Result<f64> {
        let p = path.regrid(self.grid.n())?;
        let m = self.dim;
        let (mut b, mut s) = (vec![0.0; m], vec![0.0; m]);
        let mut worst: f64 = 0.0;
        for k in 0..self.grid.n() {
            let y = self.state(k);
            problem.drift.eval(y, &mut b);
            problem.diffusion.eval(self.grid.t(k), &mut s);
            let dx = p.coarse_increment(k);
            for i in 0..m {
                let next = y[i] + b[i] * self.grid.dt() + s[i] * dx;
                worst = worst.max((next - self.state(k + 1)[i]).abs());
            }
        }
        Ok(worst)
    }

    /// Continuous-time Euler interpolant on the fine grid of `path`:
    /// `y^{(n)}_u = y^{(n)}_{t_k} + b(y^{(n)}_{t_k})(u − t_k) + σ(t_k)(x_u − x_{t_k})`.
    pub fn continuous_interpolant(&self, problem: &SdeProblem, path: &FbmPath) -> Result<EulerResult> {
        if path.id() != self.path_ref {
            return Err(Error::PathMismatch("interpolant needs the driving path".into()));
        }
        let p = path.regrid(self.grid.n())?;
        let g = p.grid();
        let m = self.dim;
        let (mut b, mut s) = (vec![0.0; m], vec![0.0; m]);
        let mut values = Vec::with_capacity((g.fine_steps() + 1) * m);
        for k in 0..g.n() {
            let y = self.state(k);
            problem.drift.eval(y, &mut b);
            problem.diffusion.eval(g.t(k), &mut s);
            let x0 = p.at_coarse(k);
            for j in 0..g.m() {
                let idx = k * g.m() + j;
                let du = g.u(idx) - g.t(k);
                let dx = p.at(idx) - x0;
                values.extend((0..m).map(|i| y[i] + b[i] * du + s[i] * dx));
            }
        }
        values.extend_from_slice(self.terminal());
        let grid = TimeGrid::new(g.horizon(), g.fine_steps(), 1)?;
        Ok(EulerResult { grid, dim: m, values, path_ref: self.path_ref })
    }
}

/// Euler scheme on `n` coarse steps, driven by the coarse increments of `path`.
pub fn euler_solve(problem: &SdeProblem, path: &FbmPath, n: usize) -> Result<EulerResult> {
    let p = path.regrid(n)?;
    let grid = p.grid();
    let m = problem.dim();
    let (mut b, mut s) = (vec![0.0; m], vec![0.0; m]);
    let mut values = Vec::with_capacity((n + 1) * m);
    values.extend_from_slice(&problem.y0);
    let dt = grid.dt();
    for k in 0..n {
        let y = &values[k * m..(k + 1) * m];
        problem.drift.eval(y, &mut b);
        problem.diffusion.eval(grid.t(k), &mut s);
        let dx = p.coarse_increment(k);
        for i in 0..m {
            let next = values[k * m + i] + b[i] * dt + s[i] * dx;
            if !next.is_finite() {
                return Err(Error::NonFinite { step: k });
            }
            values.push(next);
        }
    }
    let grid = TimeGrid::new(grid.horizon(), n, 1)?;
    Ok(EulerResult { grid, dim: m, values, path_ref: path.id() })
}

/// Euler on `n · refine` steps of the same path; the result lives on the
/// refined grid and stands in for the exact solution.
pub fn reference_solve(problem: &SdeProblem, path: &FbmPath, n: usize, refine: usize) -> Result<EulerResult> {
    if refine == 0 {
        return Err(Error::InvalidGrid("refine factor must be positive".into()));
    }
    euler_solve(problem, path, n * refine)
}

/// `y − y^{(n)}` at the coarse points of `euler`.
pub fn error_process(reference: &EulerResult, euler: &EulerResult) -> Result<Vec<f64>> {
    if reference.path_ref != euler.path_ref {
        return Err(Error::PathMismatch("reference and Euler use different paths".into()));
    }
    let (nr, n) = (reference.grid.n(), euler.grid.n());
    if nr % n != 0 || reference.dim != euler.dim {
        return Err(Error::IncompatibleGrid { fine: nr, coarse: n });
    }
    let r = nr / n;
    let m = euler.dim;
    let mut out = Vec::with_capacity((n + 1) * m);
    for k in 0..=n {
        let (a, b) = (reference.state(k * r), euler.state(k));
        out.extend(a.iter().zip(b).map(|(x, y)| x - y));
    }
    Ok(out)
}

/// `Λ` and `Γ = Λ^{-1}` on the points of a grid, column-major `m × m` each.
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    pub grid: TimeGrid,
    pub dim: usize,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl FundamentalPair {
    pub fn lambda(&self, k: usize) -> DMatrixView<'_, f64> {
        let mm = self.dim * self.dim;
        let o = k * mm;
        DMatrixView::from_slice(&self.lambda[o..o + mm], self.dim, self.dim)
    }

    pub fn gamma(&self, k: usize) -> DMatrixView<'_, f64> {
        let mm = self.dim * self.dim;
        let o = k * mm;
        DMatrixView::from_slice(&self.gamma[o..o + mm], self.dim, self.dim)
    }

    pub fn len(&self) -> usize {
        self.lambda.len() / (self.dim * self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// `max_k ‖Λ_k Γ_k − I‖_F`.
    pub fn identity_defect(&self) -> f64 {
        (0..self.len())
            .map(|k| {
                let prod = self.lambda(k) * self.gamma(k);
                (prod - DMatrix::<f64>::identity(self.dim, self.dim)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Values at the points of a coarser grid sharing the same horizon.
    pub fn restrict(&self, n: usize) -> Result<FundamentalPair> {
        let nf = self.grid.n();
        if n == 0 || nf % n != 0 {
            return Err(Error::IncompatibleGrid { fine: nf, coarse: n });
        }
        let r = nf / n;
        let mm = self.dim * self.dim;
        let pick = |data: &[f64]| -> Vec<f64> {
            (0..=n).flat_map(|k| data[k * r * mm..(k * r + 1) * mm].iter().copied()).collect()
        };
        Ok(FundamentalPair {
            grid: TimeGrid::new(self.grid.horizon(), n, 1)?,
            dim: self.dim,
            lambda: pick(&self.lambda),
            gamma: pick(&self.gamma),
        })
    }
}

/// `out = a b` for column-major `m × m` blocks.
fn mat_mul(a: &[f64], b: &[f64], out: &mut [f64], m: usize) {
    for j in 0..m {
        for i in 0..m {
            out[j * m + i] = (0..m).map(|l| a[l * m + i] * b[j * m + l]).sum();
        }
    }
}

/// Solves `Λ' = ∂b(y_s) Λ`, `Γ' = −Γ ∂b(y_s)`, `Λ_0 = Γ_0 = I` along the
/// trajectory by classical RK4 with `substeps` steps per grid interval and
/// the state interpolated linearly inside each interval.
pub fn fundamental_solution_with(problem: &SdeProblem, y: &EulerResult, substeps: usize) -> Result<FundamentalPair> {
    let m = problem.dim();
    if y.dim != m {
        return Err(Error::Dimension(format!("trajectory has dimension {}, problem {m}", y.dim)));
    }
    let substeps = substeps.max(1);
    let mm = m * m;
    let n = y.len() - 1;
    let grid = y.grid;
    let dt = grid.horizon() / n as f64;
    let h = dt / substeps as f64;

    let mut lambda = vec![0.0; (n + 1) * mm];
    let mut gamma = vec![0.0; (n + 1) * mm];
    let mut lam = vec![0.0; mm];
    for i in 0..m {
        lam[i * m + i] = 1.0;
    }
    let mut gam = lam.clone();
    lambda[..mm].copy_from_slice(&lam);
    gamma[..mm].copy_from_slice(&gam);

    let mut j = [vec![0.0; mm], vec![0.0; mm], vec![0.0; mm]];
    let mut ys = vec![0.0; m];
    let mut kl = [vec![0.0; mm], vec![0.0; mm], vec![0.0; mm], vec![0.0; mm]];
    let mut kg = kl.clone();
    let (mut tl, mut tg) = (vec![0.0; mm], vec![0.0; mm]);

    for k in 0..n {
        let (a, b) = (y.state(k), y.state(k + 1));
        let mut jac_at = |theta: f64, out: &mut [f64]| {
            for i in 0..m {
                ys[i] = a[i] + theta * (b[i] - a[i]);
            }
            problem.drift.jacobian(&ys, out);
        };
        for s in 0..substeps {
            let th = s as f64 / substeps as f64;
            let dth = 1.0 / substeps as f64;
            jac_at(th, &mut j[0]);
            jac_at(th + 0.5 * dth, &mut j[1]);
            jac_at(th + dth, &mut j[2]);
            // stage inputs: Λ, Λ + h/2 k1, Λ + h/2 k2, Λ + h k3
            for stage in 0..4 {
                let (ji, c) = match stage {
                    0 => (0, 0.0),
                    1 => (1, 0.5),
                    2 => (1, 0.5),
                    _ => (2, 1.0),
                };
                for q in 0..mm {
                    let (pl, pg) = if stage == 0 { (0.0, 0.0) } else { (kl[stage - 1][q], kg[stage - 1][q]) };
                    tl[q] = lam[q] + c * h * pl;
                    tg[q] = gam[q] + c * h * pg;
                }
                mat_mul(&j[ji], &tl, &mut kl[stage], m);
                mat_mul(&tg, &j[ji], &mut kg[stage], m);
                kg[stage].iter_mut().for_each(|v| *v = -*v);
            }
            for q in 0..mm {
                lam[q] += h / 6.0 * (kl[0][q] + 2.0 * kl[1][q] + 2.0 * kl[2][q] + kl[3][q]);
                gam[q] += h / 6.0 * (kg[0][q] + 2.0 * kg[1][q] + 2.0 * kg[2][q] + kg[3][q]);
            }
        }
        if lam.iter().chain(&gam).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        lambda[(k + 1) * mm..(k + 2) * mm].copy_from_slice(&lam);
        gamma[(k + 1) * mm..(k + 2) * mm].copy_from_slice(&gam);
    }
    let pair = FundamentalPair { grid: TimeGrid::new(grid.horizon(), n, 1)?, dim: m, lambda, gamma };
    let defect = pair.identity_defect();
    if defect > 1e-6 {
        return Err(Error::FundamentalDefect { defect });
    }
    Ok(pair)
}

/// [`fundamental_solution_with`] using 4 RK4 sub-steps per interval.
pub fn fundamental_solution(problem: &SdeProblem, y: &EulerResult) -> Result<FundamentalPair> {
    fundamental_solution_with(problem, y, 4)
}

/// Weights `z^{(i−1)}_{t_k} = Γ_{t_k} ∂^i b(y_{t_k})[σ(t_k)^{⊗i}]`, `i = 1..=ell`,
/// one [`ControlledPath`] per component.
pub fn weight_process(problem: &SdeProblem, euler: &EulerResult, fp: &FundamentalPair, ell: usize) -> Result<Vec<ControlledPath>> {
    let m = problem.dim();
    if problem.drift.max_order() < ell {
        return Err(Error::MissingDerivative { order: ell, max: problem.drift.max_order() });
    }
    if fp.len() != euler.len() {
        return Err(Error::IncompatibleGrid { fine: fp.len() - 1, coarse: euler.len() - 1 });
    }
    let n = euler.len() - 1;
    let mut levels = vec![vec![vec![0.0; n + 1]; ell]; m];
    let (mut s, mut d) = (vec![0.0; m], vec![0.0; m]);
    for k in 0..=n {
        problem.diffusion.eval(euler.grid.t(k), &mut s);
        let g = fp.gamma(k);
        for i in 1..=ell {
            problem.drift.directional(i, euler.state(k), &s, &mut d)?;
            for c in 0..m {
                levels[c][i - 1][k] = (0..m).map(|l| g[(c, l)] * d[l]).sum();
            }
        }
    }
    let coarse = TimeGrid::new(euler.grid.horizon(), n, 1)?;
    levels.into_iter().map(|l| ControlledPath::new(coarse, l)).collect()
}

/// `E_211(0,T) = −Σ_k Γ_{t_k} σ'(t_k) h^1_{t_k t_{k+1}}` for `h1` on the
/// grid of `fp`.
pub fn e211(problem: &SdeProblem, fp: &FundamentalPair, h1: &[f64]) -> Result<Vec<f64>> {
    let m = problem.dim();
    let n = fp.len() - 1;
    if h1.len() != n {
        return Err(Error::IncompatibleGrid { fine: h1.len(), coarse: n });
    }
    let mut out = vec![0.0; m];
    let mut sp = vec![0.0; m];
    for (k, h) in h1.iter().enumerate() {
        problem.diffusion.deriv(fp.grid.t(k), &mut sp);
        let g = fp.gamma(k);
        for c in 0..m {
            out[c] -= (0..m).map(|l| g[(c, l)] * sp[l]).sum::<f64>() * h;
        }
    }
    Ok(out)
}

/// Limit error process `U` on a coarse grid.
#[derive(Debug, Clone)]
pub struct LimitSdeResult {
    pub grid: TimeGrid,
    pub dim: usize,
    pub u_values: Vec<f64>,
    pub w_seed: (u64, u64),
}

impl LimitSdeResult {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.u_values[k * self.dim..(k + 1) * self.dim]
    }
}

/// `g_u = Γ_u [∂b(y_u) σ(u) − σ'(u)]` at every point of the trajectory.
pub fn limit_integrand(problem: &SdeProblem, y: &EulerResult, fp: &FundamentalPair) -> Result<Vec<f64>> {
    let m = problem.dim();
    if fp.len() != y.len() {
        return Err(Error::IncompatibleGrid { fine: y.len() - 1, coarse: fp.len() - 1 });
    }
    let n = y.len() - 1;
    let dt = y.grid.horizon() / n as f64;
    let (mut s, mut sp, mut d) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut out = Vec::with_capacity((n + 1) * m);
    for k in 0..=n {
        let t = k as f64 * dt;
        problem.diffusion.eval(t, &mut s);
        problem.diffusion.deriv(t, &mut sp);
        problem.drift.directional(1, y.state(k), &s, &mut d)?;
        let g = fp.gamma(k);
        out.extend((0..m).map(|c| (0..m).map(|l| g[(c, l)] * (d[l] - sp[l])).sum::<f64>()));
    }
    Ok(out)
}

/// `U_t = c_H^{1/2} T^{H+1/2} Λ_t ∫_0^t Γ_u [∂b(y_u)σ(u) − σ'(u)] dW_u` with
/// the stochastic integral by left-point sums on the grid of `y` and the
/// result reported on `n` coarse points. `W` is drawn from the stream
/// reserved for `path_index`.
pub fn limit_sde_solve(
    problem: &SdeProblem,
    y: &EulerResult,
    fp: &FundamentalPair,
    ch: &CHResult,
    n: usize,
    w_seed: (u64, u64),
) -> Result<LimitSdeResult> {
    let m = problem.dim();
    let nf = y.len() - 1;
    if n == 0 || nf % n != 0 {
        return Err(Error::IncompatibleGrid { fine: nf, coarse: n });
    }
    let integrand = limit_integrand(problem, y, fp)?;
    let horizon = y.grid.horizon();
    let scale = ch.value.sqrt() * horizon.powf(ch.h.rate());
    let sqrt_dt = (horizon / nf as f64).sqrt();
    let mut rng = rng::w_stream(w_seed.0, w_seed.1)?;
    let r = nf / n;
    let mut acc = vec![0.0; m];
    let mut u_values = vec![0.0; m];
    for j in 0..nf {
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        for c in 0..m {
            acc[c] += integrand[j * m + c] * dw;
        }
        if (j + 1) % r == 0 {
            let lam = fp.lambda(j + 1);
            u_values.extend((0..m).map(|c| scale * (0..m).map(|l| lam[(c, l)] * acc[l]).sum::<f64>()));
        }
    }
    Ok(LimitSdeResult { grid: TimeGrid::new(horizon, n, 1)?, dim: m, u_values, w_seed })
}

/// Conditional variance of `U_T` given the path, for `m = 1`:
/// `c_H T^{2H+1} Λ_T^2 ∫_0^T (Γ_u[∂b(y_u)σ(u) − σ'(u)])^2 du` by the trapezoid rule.
pub fn limit_conditional_variance(problem: &SdeProblem, y: &EulerResult, fp: &FundamentalPair, ch: &CHResult) -> Result<f64> {
    if problem.dim() != 1 {
        return Err(Error::Dimension("conditional variance is defined for scalar problems".into()));
    }
    let g = limit_integrand(problem, y, fp)?;
    let n = g.len() - 1;
    let horizon = y.grid.horizon();
    let dt = horizon / n as f64;
    let inner: f64 = g[1..n].iter().map(|v| v * v).sum::<f64>() + 0.5 * (g[0] * g[0] + g[n] * g[n]);
    let lam = fp.lambda(n)[(0, 0)];
    Ok(ch.value * horizon.powf(ch.h.two_h() + 1.0) * lam * lam * inner * dt)
}
