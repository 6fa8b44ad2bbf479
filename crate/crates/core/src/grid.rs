//! Hurst parameter and uniform partitions of `[0, T]`.
//!
//! A [`TimeGrid`] is a coarse partition `t_k = kT/n` refined by `m`
//! sub-steps per coarse step, giving fine points `u_j = jT/(nm)`. All
//! projections (`η`, `λ`) are computed on integer indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::HurstOutOfRange(h))
        }
    }

    /// Same as [`HurstParam::new`] but additionally requires `h < 1/2`.
    pub fn rough(h: f64) -> Result<Self> {
        Self::new(h)?.require_rough()
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn two_h(self) -> f64 {
        2.0 * self.0
    }

    pub fn require_rough(self) -> Result<Self> {
        if self.0 < 0.5 {
            Ok(self)
        } else {
            Err(Error::HurstTooLarge(self.0))
        }
    }

    /// The rate exponent `H + 1/2`.
    pub fn rate(self) -> f64 {
        self.0 + 0.5
    }

    /// Least integer `ℓ` with `ℓH > 1/2`.
    pub fn least_ell(self) -> usize {
        let mut ell = (0.5 / self.0).floor() as usize;
        while (ell as f64) * self.0 <= 0.5 {
            ell += 1;
        }
        ell.max(1)
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n: usize,
    m: usize,
}

/// Half-open range of coarse step indices `{k : start <= k < end}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRange {
    pub start: usize,
    pub end: usize,
}

impl StepRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn steps(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl TimeGrid {
    pub fn new(horizon: f64, n: usize, m: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if n == 0 || m == 0 {
            return Err(Error::InvalidGrid(format!("n and m must be positive, got n={n}, m={m}")));
        }
        n.checked_mul(m)
            .ok_or_else(|| Error::InvalidGrid("n*m overflows".into()))?;
        Ok(Self { horizon, n, m })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of coarse steps.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Sub-steps per coarse step.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn fine_steps(&self) -> usize {
        self.n * self.m
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn fine_dt(&self) -> f64 {
        self.horizon / self.fine_steps() as f64
    }

    /// Coarse point `t_k`.
    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.n as f64
    }

    /// Fine point `u_j`.
    pub fn u(&self, j: usize) -> f64 {
        j as f64 * self.horizon / self.fine_steps() as f64
    }

    /// Fine index of coarse point `t_k`.
    pub fn fine_index(&self, k: usize) -> usize {
        k * self.m
    }

    /// Coarse index of `η(u_j)`: `η(u) = t_k` for `u ∈ [t_k, t_{k+1})`.
    /// At the right end `η(T) = t_n`.
    pub fn eta(&self, j: usize) -> usize {
        j / self.m
    }

    /// Coarse index of `λ(u_j)`: `λ(v) = t_{k+1}` for `v ∈ (t_k, t_{k+1}]`
    /// and `λ(t_k) = t_k`.
    pub fn lambda(&self, j: usize) -> usize {
        j.div_ceil(self.m)
    }

    /// The same fine grid viewed with `n_coarse` coarse steps.
    pub fn coarsen(&self, n_coarse: usize) -> Result<Self> {
        let fine = self.fine_steps();
        if n_coarse == 0 || fine % n_coarse != 0 {
            return Err(Error::IncompatibleGrid { fine, coarse: n_coarse });
        }
        Self::new(self.horizon, n_coarse, fine / n_coarse)
    }

    /// Whether two grids share the same fine partition.
    pub fn same_fine(&self, other: &TimeGrid) -> bool {
        self.fine_steps() == other.fine_steps() && self.horizon == other.horizon
    }

    /// Coarse index of a grid-aligned time; errors if `t` is not a grid point.
    pub fn aligned_index(&self, t: f64) -> Result<usize> {
        let x = t * self.n as f64 / self.horizon;
        let k = x.round();
        if k < 0.0 || k > self.n as f64 || (x - k).abs() > ALIGN_TOL * (1.0 + x.abs()) {
            return Err(Error::Misaligned { time: t, n: self.n, horizon: self.horizon });
        }
        Ok(k as usize)
    }

    /// Strict range for grid-aligned `s <= t`.
    pub fn aligned_range(&self, s: f64, t: f64) -> Result<StepRange> {
        let start = self.aligned_index(s)?;
        let end = self.aligned_index(t)?;
        self.range(start, end)
    }

    /// The steps `{k : s <= t_k < t}` for arbitrary `s <= t` in `[0, T]`.
    pub fn covering_range(&self, s: f64, t: f64) -> Result<StepRange> {
        if !(0.0..=self.horizon * (1.0 + ALIGN_TOL)).contains(&s)
            || !(0.0..=self.horizon * (1.0 + ALIGN_TOL)).contains(&t)
            || s > t
        {
            return Err(Error::InvalidGrid(format!("bad interval ({s}, {t})")));
        }
        let first_at_or_after = |x: f64| -> usize {
            let y = x * self.n as f64 / self.horizon;
            let r = y.round();
            let k = if (y - r).abs() <= ALIGN_TOL * (1.0 + y.abs()) { r } else { y.ceil() };
            (k as usize).min(self.n)
        };
        self.range(first_at_or_after(s), first_at_or_after(t))
    }

    pub fn range(&self, start: usize, end: usize) -> Result<StepRange> {
        if start > end || end > self.n {
            return Err(Error::BadRange { start, end, n: self.n });
        }
        Ok(StepRange { start, end })
    }

    pub fn full_range(&self) -> StepRange {
        StepRange { start: 0, end: self.n }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurst_bounds() {
        assert!(HurstParam::new(0.0).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!(HurstParam::new(0.7).is_ok());
        assert!(HurstParam::rough(0.5).is_err());
        assert!(HurstParam::rough(0.49).is_ok());
    }

    #[test]
    fn least_ell() {
        let cases = [(0.3, 2), (0.25, 3), (0.1, 6), (0.45, 2), (0.2, 3), (0.05, 11)];
        for (h, ell) in cases {
            let hp = HurstParam::new(h).unwrap();
            assert_eq!(hp.least_ell(), ell, "H={h}");
            assert!(ell as f64 * h > 0.5);
            assert!((ell - 1) as f64 * h <= 0.5);
        }
    }

    #[test]
    fn eta_lambda_on_indices() {
        let g = TimeGrid::new(2.0, 4, 3).unwrap();
        // t_k are fine points 0,3,6,9,12
        for k in 0..=4 {
            let j = g.fine_index(k);
            assert_eq!(g.eta(j), k);
            assert_eq!(g.lambda(j), k);
        }
        assert_eq!(g.eta(4), 1);
        assert_eq!(g.lambda(4), 2);
        assert_eq!(g.eta(5), 1);
        assert_eq!(g.lambda(5), 2);
        assert_eq!(g.eta(12), 4);
    }

    #[test]
    fn coarse_points_are_fine_points() {
        let g = TimeGrid::new(1.3, 7, 5).unwrap();
        for k in 0..=7 {
            assert_eq!(g.t(k), g.u(g.fine_index(k)) * 1.0);
        }
    }

    #[test]
    fn ranges() {
        let g = TimeGrid::new(1.0, 8, 2).unwrap();
        assert_eq!(g.aligned_range(0.25, 0.75).unwrap(), StepRange { start: 2, end: 6 });
        assert!(g.aligned_range(0.3, 0.75).is_err());
        // {k : 0.3 <= t_k < 0.7} = {3, 4, 5}
        assert_eq!(g.covering_range(0.3, 0.7).unwrap(), StepRange { start: 3, end: 6 });
        assert!(g.covering_range(0.3, 0.31).unwrap().is_empty());
        assert!(g.range(3, 2).is_err());
    }

    #[test]
    fn coarsen_shares_fine_grid() {
        let g = TimeGrid::new(1.0, 16, 4).unwrap();
        let c = g.coarsen(8).unwrap();
        assert_eq!(c.m(), 8);
        assert!(c.same_fine(&g));
        assert!(g.coarsen(5).is_err());
    }
}
