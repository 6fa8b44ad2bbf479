//! Weighted Riemann-type sums over a coarse grid.
//!
//! All sums read the path through `path.grid()`: its coarse steps are the
//! summation index and its sub-steps carry the inner time integrals,
//! evaluated by the composite trapezoid rule. Ranges are grid-aligned
//! ([`StepRange`]), so `λ(s) = s` for the base point of monomial weights.

use crate::constants::mu;
use crate::error::{Error, Result};
use crate::fbm::{indicator_inner, FbmPath};
use crate::grid::{HurstParam, StepRange, TimeGrid};

fn inv_factorial(i: usize) -> f64 {
    (1..=i).fold(1.0, |acc, j| acc / j as f64)
}

/// `x^j_{ab} = (x_b − x_a)^j / j!`, with `x^j ≡ 0` for negative `j`.
pub fn monomial(increment: f64, j: i64) -> f64 {
    if j < 0 {
        0.0
    } else {
        increment.powi(j as i32) * inv_factorial(j as usize)
    }
}

fn check_substeps(grid: &TimeGrid) -> Result<()> {
    if grid.m() < 2 {
        return Err(Error::TooFewSubsteps(grid.m()));
    }
    Ok(())
}

fn check_range(grid: &TimeGrid, range: StepRange) -> Result<()> {
    grid.range(range.start, range.end).map(|_| ())
}

/// `n^{H+1/2}` for the path's coarse grid.
pub fn normalization(path: &FbmPath) -> f64 {
    (path.grid().n() as f64).powf(path.hurst().rate())
}

/// `h^i_{t_k t_{k+1}} = ∫_{t_k}^{t_{k+1}} (x_u − x_{t_k})^i / i! du` for every coarse step.
#[derive(Debug, Clone)]
pub struct HIncrements {
    pub grid: TimeGrid,
    pub order: usize,
    pub values: Vec<f64>,
}

/// `h^i` for `i = 1..=max_order` in one pass; element `i − 1` holds order `i`.
pub fn h_increments(path: &FbmPath, max_order: usize) -> Result<Vec<HIncrements>> {
    let grid = path.grid();
    check_substeps(&grid)?;
    let (n, m) = (grid.n(), grid.m());
    let x = path.values();
    let du = grid.fine_dt();
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; n]; max_order];
    let mut powers = vec![0.0; max_order];
    for k in 0..n {
        let base = x[k * m];
        powers.iter_mut().for_each(|p| *p = 0.0);
        for s in 1..=m {
            let d = x[k * m + s] - base;
            let w = if s == m { 0.5 } else { 1.0 };
            let mut dp = 1.0;
            for p in powers.iter_mut() {
                dp *= d;
                *p += w * dp;
            }
        }
        for (i, p) in powers.iter().enumerate() {
            out[i][k] = p * du * inv_factorial(i + 1);
        }
    }
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(i, values)| HIncrements { grid, order: i + 1, values })
        .collect())
}

/// Single `h^i` value on coarse step `k`.
pub fn h_increment(path: &FbmPath, k: usize, i: usize) -> Result<f64> {
    let grid = path.grid();
    check_substeps(&grid)?;
    if i == 0 || k >= grid.n() {
        return Err(Error::IndexOutOfRange(format!("step {k}, order {i}")));
    }
    let m = grid.m();
    let x = path.values();
    let base = x[k * m];
    let sum: f64 = (1..=m)
        .map(|s| {
            let w = if s == m { 0.5 } else { 1.0 };
            w * (x[k * m + s] - base).powi(i as i32)
        })
        .sum();
    Ok(sum * grid.fine_dt() * inv_factorial(i))
}

/// `J_s^t(f, g) = Σ_{s ≤ t_k < t} f_{t_k} g_{t_k t_{k+1}}` for `f` on coarse
/// points and `g` given per step.
pub fn discrete_integral(weights: &[f64], increments: &[f64], range: StepRange) -> Result<f64> {
    if range.start > range.end || range.end > increments.len() || range.end > weights.len() {
        return Err(Error::BadRange { start: range.start, end: range.end, n: increments.len() });
    }
    Ok(range.steps().map(|k| weights[k] * increments[k]).sum())
}

/// Two-argument variant `Σ_{s ≤ t_k < t} f_{λ(s) t_k} g_{t_k t_{k+1}}`; `weight`
/// receives `(λ(s), k)` as coarse indices.
pub fn discrete_integral_based<F>(weight: F, increments: &[f64], range: StepRange) -> Result<f64>
where
    F: Fn(usize, usize) -> f64,
{
    if range.start > range.end || range.end > increments.len() {
        return Err(Error::BadRange { start: range.start, end: range.end, n: increments.len() });
    }
    Ok(range.steps().map(|k| weight(range.start, k) * increments[k]).sum())
}

/// Functions `f` whose derivatives along `x` give controlled weights
/// `(f(x), f'(x), f''(x), …)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFn {
    Sin,
    Cos,
    Exp,
    Identity,
}

impl WeightFn {
    pub fn derivative(self, order: usize, x: f64) -> f64 {
        match self {
            WeightFn::Sin => match order % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            WeightFn::Cos => WeightFn::Sin.derivative(order + 1, x),
            WeightFn::Exp => x.exp(),
            WeightFn::Identity => match order {
                0 => x,
                1 => 1.0,
                _ => 0.0,
            },
        }
    }
}

/// Weights `(z, z', …, z^{(ℓ−1)})` on the coarse points of a grid.
#[derive(Debug, Clone)]
pub struct ControlledPath {
    grid: TimeGrid,
    levels: Vec<Vec<f64>>,
}

impl ControlledPath {
    pub fn new(grid: TimeGrid, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InsufficientLevels { have: 0, need: 1 });
        }
        if let Some(l) = levels.iter().find(|l| l.len() != grid.n() + 1) {
            return Err(Error::Dimension(format!("level has {} points, grid has {}", l.len(), grid.n() + 1)));
        }
        Ok(Self { grid, levels })
    }

    /// `z^{(i)}_{t_k} = f^{(i)}(x_{t_k})`, `i < ell`.
    pub fn from_weight(path: &FbmPath, f: WeightFn, ell: usize) -> Result<Self> {
        let grid = path.grid();
        let levels = (0..ell)
            .map(|i| (0..=grid.n()).map(|k| f.derivative(i, path.at_coarse(k))).collect())
            .collect();
        Self::new(grid, levels)
    }

    /// Zero weights at every level.
    pub fn zeros(grid: TimeGrid, ell: usize) -> Result<Self> {
        Self::new(grid, vec![vec![0.0; grid.n() + 1]; ell])
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn ell(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, i: usize) -> &[f64] {
        &self.levels[i]
    }

    /// Remainder `r^{(k)}_{st} = δz^{(k)}_{st} − Σ_{i=1}^{ℓ−k−1} z^{(k+i)}_s x^i_{st}`
    /// between coarse points `s < t`.
    pub fn remainder(&self, path: &FbmPath, level: usize, s: usize, t: usize) -> f64 {
        let ell = self.ell();
        let dx = path.at_coarse(t) - path.at_coarse(s);
        let z = &self.levels[level];
        let expansion: f64 = (1..ell - level)
            .map(|i| self.levels[level + i][s] * monomial(dx, i as i64))
            .sum();
        z[t] - z[s] - expansion
    }

    /// `max |r^{(k)}_{st}| / (t−s)^{(ℓ−k)(H−ε)}` over the given pairs and all
    /// levels: an empirical controlled-path constant `G`.
    pub fn remainder_constant(&self, path: &FbmPath, eps: f64, pairs: &[(usize, usize)]) -> f64 {
        let h = path.hurst().value();
        let ell = self.ell();
        let mut g: f64 = 0.0;
        for &(s, t) in pairs {
            if t <= s {
                continue;
            }
            let len = self.grid.t(t) - self.grid.t(s);
            for k in 0..ell {
                let r = self.remainder(path, k, s, t).abs();
                g = g.max(r / len.powf((ell - k) as f64 * (h - eps)));
            }
        }
        g
    }
}

fn check_same_grid(z: &ControlledPath, path: &FbmPath) -> Result<()> {
    if z.grid() != path.grid() {
        return Err(Error::IncompatibleGrid { fine: path.grid().fine_steps(), coarse: z.grid().n() });
    }
    Ok(())
}

/// `E^{z,n}_ℓ(s,t) = Σ_{i=1}^{ℓ} J_s^t(z^{(i−1)}, h^i)`; requires `ℓH > 1/2`.
pub fn compensated_sum(z: &ControlledPath, path: &FbmPath, range: StepRange) -> Result<f64> {
    let h = path.hurst().value();
    if z.ell() as f64 * h <= 0.5 {
        return Err(Error::UnderCompensated { ell: z.ell(), h });
    }
    compensated_sum_unchecked(z, path, range)
}

/// [`compensated_sum`] without the `ℓH > 1/2` requirement, for studying
/// under-compensated sums.
pub fn compensated_sum_unchecked(z: &ControlledPath, path: &FbmPath, range: StepRange) -> Result<f64> {
    check_same_grid(z, path)?;
    check_range(&path.grid(), range)?;
    let hs = h_increments(path, z.ell())?;
    compensated_sum_with(z, &hs, range)
}

/// Same as [`compensated_sum_unchecked`] with precomputed `h^i`.
pub fn compensated_sum_with(z: &ControlledPath, hs: &[HIncrements], range: StepRange) -> Result<f64> {
    if hs.len() < z.ell() {
        return Err(Error::InsufficientLevels { have: hs.len(), need: z.ell() });
    }
    (0..z.ell()).map(|i| discrete_integral(z.level(i), &hs[i].values, range)).sum()
}

/// `E^x_L(s,t) = Σ_{i=1}^{L} J_s^t(x^{L−i}, h^i)` with weights `x^{L−i}_{λ(s) t_k}`.
pub fn monomial_sum(path: &FbmPath, l: usize, range: StepRange) -> Result<f64> {
    if l == 0 {
        return Err(Error::IndexOutOfRange("L must be >= 1".into()));
    }
    check_range(&path.grid(), range)?;
    let hs = h_increments(path, l)?;
    monomial_sum_with(path, l, &hs, range)
}

pub fn monomial_sum_with(path: &FbmPath, l: usize, hs: &[HIncrements], range: StepRange) -> Result<f64> {
    (1..=l)
        .map(|i| {
            discrete_integral_based(
                |base, k| monomial(path.at_coarse(k) - path.at_coarse(base), (l - i) as i64),
                &hs[i - 1].values,
                range,
            )
        })
        .sum()
}

/// `Z^{(n),i}_{st} = n^{H+1/2} Σ_{s ≤ t_k < t} ∫_{t_k}^{t_{k+1}} δ⋄(x^{i−1}_{λ(s)t_k} 1_{[t_k,v]}) dv`,
/// evaluated pathwise as
/// `x^{i−1}_{λ(s)t_k} (x_v − x_{t_k}) − x^{i−2}_{λ(s)t_k} ⟨1_{[λ(s),t_k]}, 1_{[t_k,v]}⟩`.
pub fn skorohod_sum(path: &FbmPath, i: usize, range: StepRange) -> Result<f64> {
    if i == 0 {
        return Err(Error::IndexOutOfRange("order must be >= 1".into()));
    }
    let grid = path.grid();
    check_range(&grid, range)?;
    let h1 = h_increments(path, 1)?.remove(0);
    let corr = correction_integrals(&grid, path.hurst(), range);
    let base = path.at_coarse(range.start);
    let sum: f64 = range
        .steps()
        .map(|k| {
            let dx = path.at_coarse(k) - base;
            monomial(dx, i as i64 - 1) * h1.values[k] - monomial(dx, i as i64 - 2) * corr[k - range.start]
        })
        .sum();
    Ok(normalization(path) * sum)
}

/// Trapezoid values of `∫_{t_k}^{t_{k+1}} ⟨1_{[t_s,t_k]}, 1_{[t_k,v]}⟩ dv` for `k` in the range.
fn correction_integrals(grid: &TimeGrid, h: HurstParam, range: StepRange) -> Vec<f64> {
    let m = grid.m();
    let s = grid.t(range.start);
    range
        .steps()
        .map(|k| {
            let tk = grid.t(k);
            let total: f64 = (1..=m)
                .map(|j| {
                    let w = if j == m { 0.5 } else { 1.0 };
                    w * indicator_inner(s, tk, tk, grid.u(k * m + j), h)
                })
                .sum();
            total * grid.fine_dt()
        })
        .collect()
}

/// `Var(Z^{(n),1}_{0,T}) = T^{2H+2} Σ_{|j|<n} (1 − |j|/n) μ(j)`.
pub fn exact_variance_z1(grid: &TimeGrid, h: HurstParam) -> Result<f64> {
    h.require_rough()?;
    let n = grid.n();
    let mut s = mu(0, h)?;
    for j in 1..n {
        s += 2.0 * (1.0 - j as f64 / n as f64) * mu(j as i64, h)?;
    }
    Ok(grid.horizon().powf(h.two_h() + 2.0) * s)
}

/// Empirical `L2` norm of `n^{H+1/2} E^x_L(s,t) − Z^{(n),L}_{st}` for each `n`,
/// with all `n` driven by the same paths.
pub fn skorohod_equivalence_gap(paths: &[FbmPath], l: usize, ns: &[usize], s: f64, t: f64) -> Result<Vec<f64>> {
    let first = paths.first().ok_or_else(|| Error::PathMismatch("empty ensemble".into()))?;
    if paths
        .iter()
        .any(|p| !p.grid().same_fine(&first.grid()) || p.hurst() != first.hurst())
    {
        return Err(Error::PathMismatch("ensemble mixes grids or Hurst parameters".into()));
    }
    ns.iter()
        .map(|&n| {
            let mut acc = 0.0;
            for p in paths {
                acc += skorohod_gap_single(p, l, n, s, t)?.powi(2);
            }
            Ok((acc / paths.len() as f64).sqrt())
        })
        .collect()
}

/// Pathwise `n^{H+1/2} E^x_L(s,t) − Z^{(n),L}_{st}`.
pub fn skorohod_gap_single(path: &FbmPath, l: usize, n: usize, s: f64, t: f64) -> Result<f64> {
    let p = path.regrid(n)?;
    let range = p.grid().aligned_range(s, t)?;
    Ok(normalization(&p) * monomial_sum(&p, l, range)? - skorohod_sum(&p, l, range)?)
}

/// `U^n_{st} = n^{H+1/2} (∫_s^t z_u du − Σ_{s ≤ t_k < t} z_{t_k} T/n)`, with the
/// integral taken by the fine trapezoid rule over `z_fine`. `z` must carry
/// `ℓ + 1` levels for the least `ℓ` with `ℓH > 1/2`.
pub fn riemann_residual(z: &ControlledPath, z_fine: &[f64], path: &FbmPath, range: StepRange) -> Result<f64> {
    check_same_grid(z, path)?;
    let grid = path.grid();
    check_range(&grid, range)?;
    let need = path.hurst().least_ell() + 1;
    if z.ell() < need {
        return Err(Error::InsufficientLevels { have: z.ell(), need });
    }
    if z_fine.len() != grid.fine_steps() + 1 {
        return Err(Error::Dimension(format!(
            "fine integrand has {} points, grid has {}",
            z_fine.len(),
            grid.fine_steps() + 1
        )));
    }
    let (a, b) = (grid.fine_index(range.start), grid.fine_index(range.end));
    let integral: f64 = if a == b {
        0.0
    } else {
        let inner: f64 = z_fine[a + 1..b].iter().sum();
        (inner + 0.5 * (z_fine[a] + z_fine[b])) * grid.fine_dt()
    };
    let riemann: f64 = range.steps().map(|k| z.level(0)[k]).sum::<f64>() * grid.dt();
    Ok(normalization(path) * (integral - riemann))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::FbmSampler;
    use crate::oracle;

    fn hp(h: f64) -> HurstParam {
        HurstParam::new(h).unwrap()
    }

    fn linear_path(n: usize, m: usize, slope: f64) -> FbmPath {
        let g = TimeGrid::new(1.0, n, m).unwrap();
        let v = (0..=g.fine_steps()).map(|j| slope * g.u(j)).collect();
        FbmPath::from_values(g, hp(0.3), v, 0, 0).unwrap()
    }

    #[test]
    fn h_increment_on_deterministic_paths() {
        let zero = linear_path(4, 8, 0.0);
        for i in 1..=4 {
            for k in 0..4 {
                assert_eq!(h_increment(&zero, k, i).unwrap(), 0.0);
            }
        }
        let lin = linear_path(1, 5, 1.0);
        assert!((h_increment(&lin, 0, 1).unwrap() - 0.5).abs() < 1e-15);
        let lin = linear_path(1, 64, 1.0);
        assert!((h_increment(&lin, 0, 2).unwrap() - 1.0 / 6.0).abs() < 1e-4);
    }

    #[test]
    fn h_increment_needs_substeps() {
        let p = linear_path(4, 1, 1.0);
        assert!(matches!(h_increment(&p, 0, 1), Err(Error::TooFewSubsteps(1))));
    }

    #[test]
    fn batch_and_single_h_agree() {
        let g = TimeGrid::new(1.0, 16, 8).unwrap();
        let p = FbmSampler::new(g, hp(0.3)).unwrap().sample(1, 0).unwrap();
        let hs = h_increments(&p, 3).unwrap();
        for i in 1..=3 {
            for k in 0..16 {
                let a = hs[i - 1].values[k];
                let b = h_increment(&p, k, i).unwrap();
                assert!((a - b).abs() < 1e-15 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn h_increment_pathwise_bound() {
        let g = TimeGrid::new(1.0, 32, 16).unwrap();
        let p = FbmSampler::new(g, hp(0.2)).unwrap().sample(3, 1).unwrap();
        let hs = h_increments(&p, 3).unwrap();
        for (i, hi) in hs.iter().enumerate() {
            for k in 0..32 {
                let base = p.at_coarse(k);
                let max = (0..=16).map(|s| (p.at(k * 16 + s) - base).abs()).fold(0.0, f64::max);
                let bound = g.dt() * max.powi(i as i32 + 1) * inv_factorial(i + 1);
                assert!(hi.values[k].abs() <= bound + 1e-15);
            }
        }
    }

    #[test]
    fn discrete_integral_cases() {
        // telescoping
        let big_g: Vec<f64> = (0..=6).map(|k| (k as f64).powi(2)).collect();
        let inc: Vec<f64> = big_g.windows(2).map(|w| w[1] - w[0]).collect();
        let ones = vec![1.0; 7];
        let r = StepRange { start: 1, end: 5 };
        assert_eq!(discrete_integral(&ones, &inc, r).unwrap(), big_g[5] - big_g[1]);
        assert_eq!(discrete_integral(&ones, &inc, StepRange { start: 3, end: 3 }).unwrap(), 0.0);
        assert!(discrete_integral(&ones, &inc, StepRange { start: 3, end: 7 }).is_err());
        let based = discrete_integral_based(|b, k| (k - b) as f64, &inc, r).unwrap();
        let direct: f64 = (1..5).map(|k| (k - 1) as f64 * inc[k]).sum();
        assert_eq!(based, direct);
    }

    #[test]
    fn discrete_integral_matches_left_riemann_sum() {
        let g = TimeGrid::new(1.0, 64, 2).unwrap();
        let sampler = FbmSampler::new(g, hp(0.3)).unwrap();
        for idx in 0..10 {
            let p = sampler.sample(5, idx).unwrap();
            let xs: Vec<f64> = (0..=64).map(|k| p.at_coarse(k)).collect();
            let dx: Vec<f64> = (0..64).map(|k| p.coarse_increment(k)).collect();
            let r = StepRange { start: 3, end: 50 };
            let j = discrete_integral(&xs, &dx, r).unwrap();
            let mut direct = 0.0;
            for k in 3..50 {
                direct += p.values()[2 * k] * (p.values()[2 * k + 2] - p.values()[2 * k]);
            }
            assert!((j - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn compensated_sum_trivial_cases() {
        let g = TimeGrid::new(1.0, 16, 4).unwrap();
        let p = FbmSampler::new(g, hp(0.3)).unwrap().sample(2, 0).unwrap();
        let r = g.full_range();
        let zero = ControlledPath::zeros(g, 2).unwrap();
        assert_eq!(compensated_sum(&zero, &p, r).unwrap(), 0.0);
        let one = ControlledPath::new(g, vec![vec![1.0; 17]]).unwrap();
        assert!(matches!(compensated_sum(&one, &p, r), Err(Error::UnderCompensated { .. })));
        let h1 = h_increments(&p, 1).unwrap().remove(0);
        let plain: f64 = h1.values.iter().sum();
        assert!((compensated_sum_unchecked(&one, &p, r).unwrap() - plain).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_is_additive() {
        let g = TimeGrid::new(1.0, 32, 4).unwrap();
        let p = FbmSampler::new(g, hp(0.3)).unwrap().sample(9, 4).unwrap();
        let z = ControlledPath::from_weight(&p, WeightFn::Sin, 2).unwrap();
        for (s, u, t) in [(0, 10, 32), (3, 4, 20), (5, 5, 9)] {
            let a = compensated_sum(&z, &p, StepRange { start: s, end: u }).unwrap();
            let b = compensated_sum(&z, &p, StepRange { start: u, end: t }).unwrap();
            let c = compensated_sum(&z, &p, StepRange { start: s, end: t }).unwrap();
            assert!((a + b - c).abs() < 1e-14);
        }
    }

    #[test]
    fn monomial_sum_order_one_is_plain_sum() {
        let g = TimeGrid::new(1.0, 16, 4).unwrap();
        let p = FbmSampler::new(g, hp(0.3)).unwrap().sample(4, 0).unwrap();
        let r = StepRange { start: 2, end: 13 };
        let h1 = h_increments(&p, 1).unwrap().remove(0);
        let plain: f64 = h1.values[2..13].iter().sum();
        assert!((monomial_sum(&p, 1, r).unwrap() - plain).abs() < 1e-15);
        assert!(monomial_sum(&p, 0, r).is_err());
    }

    #[test]
    fn skorohod_order_one_is_normalized_h1_sum() {
        let g = TimeGrid::new(1.0, 32, 8).unwrap();
        let sampler = FbmSampler::new(g, hp(0.3)).unwrap();
        for idx in 0..5 {
            let p = sampler.sample(6, idx).unwrap();
            let r = StepRange { start: 4, end: 29 };
            let z = skorohod_sum(&p, 1, r).unwrap();
            let ones = vec![1.0; 33];
            let h1 = h_increments(&p, 1).unwrap().remove(0);
            let expected = normalization(&p) * discrete_integral(&ones, &h1.values, r).unwrap();
            assert!((z - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn skorohod_gap_vanishes_for_order_one() {
        let g = TimeGrid::new(1.0, 64, 4).unwrap();
        let p = FbmSampler::new(g, hp(0.3)).unwrap().sample(6, 0).unwrap();
        for n in [8, 16, 64] {
            assert!(skorohod_gap_single(&p, 1, n, 0.25, 1.0).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn exact_variance_single_step() {
        for h in [0.1, 0.3] {
            let g = TimeGrid::new(2.0, 1, 4).unwrap();
            let v = exact_variance_z1(&g, hp(h)).unwrap();
            assert!((v - 2f64.powf(2.0 * h + 2.0) * mu(0, hp(h)).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_variance_matches_quadrature() {
        for (h, horizon) in [(0.3, 1.0), (0.15, 1.5)] {
            let g = TimeGrid::new(horizon, 8, 2).unwrap();
            let v = exact_variance_z1(&g, hp(h)).unwrap();
            let q = oracle::z1_variance_quadrature(horizon, 8, h);
            assert!((v - q).abs() < 1e-6, "H={h}: {v} vs {q}");
        }
    }

    #[test]
    fn riemann_residual_deterministic() {
        let g = TimeGrid::new(1.0, 8, 16).unwrap();
        let p = linear_path(8, 16, 0.0);
        let z = ControlledPath::new(g, vec![vec![2.5; 9], vec![0.0; 9], vec![0.0; 9]]).unwrap();
        let fine = vec![2.5; g.fine_steps() + 1];
        assert_eq!(riemann_residual(&z, &fine, &p, g.full_range()).unwrap(), 0.0);

        // z_u = a + c u: residual = n^{H+1/2} (t − s)(T/n)/2 · c
        let (a, c) = (0.7, -1.3);
        let coarse: Vec<f64> = (0..=8).map(|k| a + c * g.t(k)).collect();
        let z = ControlledPath::new(g, vec![coarse, vec![0.0; 9], vec![0.0; 9]]).unwrap();
        let fine: Vec<f64> = (0..=g.fine_steps()).map(|j| a + c * g.u(j)).collect();
        let r = StepRange { start: 2, end: 7 };
        let got = riemann_residual(&z, &fine, &p, r).unwrap();
        let expected = normalization(&p) * (g.t(7) - g.t(2)) * g.dt() / 2.0 * c;
        assert!((got - expected).abs() < 1e-13);

        let short = ControlledPath::new(g, vec![vec![0.0; 9]; 2]).unwrap();
        assert!(matches!(riemann_residual(&short, &fine, &p, r), Err(Error::InsufficientLevels { .. })));
    }

    #[test]
    fn remainder_of_smooth_weight_is_small() {
        let g = TimeGrid::new(1.0, 256, 2).unwrap();
        let p = FbmSampler::new(g, hp(0.3)).unwrap().sample(8, 0).unwrap();
        let z = ControlledPath::from_weight(&p, WeightFn::Sin, 2).unwrap();
        let pairs: Vec<(usize, usize)> = (0..200).map(|i| (i, i + 1 + (i * 7) % 50)).collect();
        let gconst = z.remainder_constant(&p, 0.05, &pairs);
        assert!(gconst.is_finite() && gconst < 10.0);
        // remainder of the last level is the plain increment
        let r = z.remainder(&p, 1, 3, 9);
        assert!((r - (z.level(1)[9] - z.level(1)[3])).abs() < 1e-15);
    }
}
