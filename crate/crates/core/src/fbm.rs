//! Fractional Brownian motion: covariance calculus of indicator functions
//! and exact sampling on uniform grids.
//!
//! Sampling uses circulant embedding of the fractional Gaussian noise
//! covariance (Davies–Harte). The embedding eigenvalues are computed once
//! per `(grid, H)` in [`FbmSampler::new`]; each draw then costs one FFT of
//! length `2N`. If the embedding has a negative eigenvalue below
//! `-1e-10 * max`, the sampler falls back to a Cholesky factor of the full
//! covariance matrix.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{HurstParam, TimeGrid};
use crate::rng;

const EIGEN_CLAMP: f64 = 1e-10;

/// `E[x_s x_t] = ½(|s|^{2H} + |t|^{2H} − |s−t|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, h: HurstParam) -> f64 {
    let p = h.two_h();
    0.5 * (s.abs().powf(p) + t.abs().powf(p) - (s - t).abs().powf(p))
}

/// `⟨1_{[u,v]}, 1_{[s,t]}⟩ = E[δx_{uv} δx_{st}]`.
pub fn indicator_inner(u: f64, v: f64, s: f64, t: f64, h: HurstParam) -> f64 {
    let p = h.two_h();
    0.5 * ((t - u).abs().powf(p) + (s - v).abs().powf(p)
        - (s - u).abs().powf(p)
        - (t - v).abs().powf(p))
}

/// `⟨1_{(−∞,t]}, 1_{[a,b]}⟩ = ½(|t−a|^{2H} − |t−b|^{2H})`, defined only for `H < 1/2`.
pub fn semiinfinite_inner(t: f64, a: f64, b: f64, h: HurstParam) -> Result<f64> {
    let h = h.require_rough()?;
    let p = h.two_h();
    Ok(0.5 * ((t - a).abs().powf(p) - (t - b).abs().powf(p)))
}

/// Autocovariance of unit-spacing fractional Gaussian noise.
fn fgn_autocov(k: usize, p: f64) -> f64 {
    let k = k as f64;
    0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMethod {
    Circulant,
    Cholesky,
}

enum Factor {
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Cholesky { lower: DMatrix<f64> },
}

/// Exact fBm sampler for a fixed fine grid and Hurst parameter.
pub struct FbmSampler {
    grid: TimeGrid,
    h: HurstParam,
    factor: Factor,
}

impl std::fmt::Debug for FbmSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmSampler")
            .field("grid", &self.grid)
            .field("h", &self.h)
            .field("method", &self.method())
            .finish()
    }
}

impl FbmSampler {
    /// Circulant embedding with automatic Cholesky fallback.
    pub fn new(grid: TimeGrid, h: HurstParam) -> Result<Self> {
        match circulant_factor(grid.fine_steps(), h) {
            Some(factor) => Ok(Self { grid, h, factor }),
            None => Self::cholesky(grid, h),
        }
    }

    /// Force the Cholesky method (O(N^3) setup; small grids only).
    pub fn cholesky(grid: TimeGrid, h: HurstParam) -> Result<Self> {
        let n = grid.fine_steps();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(grid.u(i + 1), grid.u(j + 1), h));
        let lower = cov
            .cholesky()
            .ok_or(Error::CholeskyFailed { size: n, h: h.value() })?
            .l();
        Ok(Self { grid, h, factor: Factor::Cholesky { lower } })
    }

    pub fn method(&self) -> SamplerMethod {
        match self.factor {
            Factor::Circulant { .. } => SamplerMethod::Circulant,
            Factor::Cholesky { .. } => SamplerMethod::Cholesky,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> HurstParam {
        self.h
    }

    /// Draws the path with the given index; a pure function of
    /// `(master_seed, path_index)`.
    pub fn sample(&self, master_seed: u64, path_index: u64) -> Result<FbmPath> {
        let mut rng = rng::path_stream(master_seed, path_index)?;
        let n = self.grid.fine_steps();
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        match &self.factor {
            Factor::Circulant { sqrt_eig, fft } => {
                let mut w: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut w);
                let scale = self.grid.fine_dt().powf(self.h.value());
                let mut acc = 0.0;
                for z in &w[..n] {
                    acc += z.re * scale;
                    values.push(acc);
                }
            }
            Factor::Cholesky { lower } => {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let x = lower * z;
                values.extend(x.iter().copied());
            }
        }
        Ok(FbmPath {
            grid: self.grid,
            h: self.h,
            values: values.into(),
            seed: master_seed,
            path_index,
        })
    }
}

fn circulant_factor(n: usize, h: HurstParam) -> Option<Factor> {
    let p = h.two_h();
    let size = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|j| {
            let k = if j <= n { j } else { size - j };
            Complex::new(fgn_autocov(k, p), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut row);
    let max = row.iter().map(|c| c.re).fold(f64::MIN, f64::max);
    let mut sqrt_eig = Vec::with_capacity(size);
    for c in &row {
        let ev = c.re;
        if ev < -EIGEN_CLAMP * max {
            return None;
        }
        sqrt_eig.push((ev.max(0.0) / size as f64).sqrt());
    }
    Some(Factor::Circulant { sqrt_eig, fft })
}

/// Convenience wrapper that builds a sampler for a single draw.
pub fn sample_fbm(grid: TimeGrid, h: HurstParam, master_seed: u64, path_index: u64) -> Result<FbmPath> {
    FbmSampler::new(grid, h)?.sample(master_seed, path_index)
}

/// Identity of a sampled path: two paths with equal ids carry the same noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathId {
    pub seed: u64,
    pub path_index: u64,
    pub fine_steps: usize,
    pub hurst_bits: u64,
}

/// One fBm trajectory on the fine grid. Values are shared, so regridding
/// to a coarser `n` is cheap and keeps the same noise.
#[derive(Debug, Clone)]
pub struct FbmPath {
    grid: TimeGrid,
    h: HurstParam,
    values: Arc<[f64]>,
    seed: u64,
    path_index: u64,
}

impl FbmPath {
    /// Wraps externally supplied values (deterministic test paths, replays).
    pub fn from_values(
        grid: TimeGrid,
        h: HurstParam,
        values: Vec<f64>,
        seed: u64,
        path_index: u64,
    ) -> Result<Self> {
        if values.len() != grid.fine_steps() + 1 {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.fine_steps() + 1,
                values.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidGrid("path must start at 0".into()));
        }
        Ok(Self { grid, h, values: values.into(), seed, path_index })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn hurst(&self) -> HurstParam {
        self.h
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn id(&self) -> PathId {
        PathId {
            seed: self.seed,
            path_index: self.path_index,
            fine_steps: self.grid.fine_steps(),
            hurst_bits: self.h.value().to_bits(),
        }
    }

    /// Fine-grid values, `values[0] = 0`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at fine index `j`.
    pub fn at(&self, j: usize) -> f64 {
        self.values[j]
    }

    /// Value at coarse point `t_k`.
    pub fn at_coarse(&self, k: usize) -> f64 {
        self.values[self.grid.fine_index(k)]
    }

    /// Coarse increment `x_{t_{k+1}} − x_{t_k}`.
    pub fn coarse_increment(&self, k: usize) -> f64 {
        self.at_coarse(k + 1) - self.at_coarse(k)
    }

    /// The same path seen through a grid with `n` coarse steps.
    pub fn regrid(&self, n: usize) -> Result<Self> {
        Ok(Self { grid: self.grid.coarsen(n)?, ..self.clone() })
    }

    pub fn shares_noise_with(&self, other: &FbmPath) -> bool {
        self.id() == other.id()
    }

    /// Writes the binary dump: a 32-byte little-endian header
    /// `{"FBM1", n: u32, m: u32, path_index: u32, H: f64, seed: u64}`
    /// followed by the `N + 1` fine-grid values as `f64`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        let to_u32 = |v: u64, what: &str| {
            u32::try_from(v).map_err(|_| Error::InvalidGrid(format!("{what} does not fit the dump header")))
        };
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&to_u32(self.grid.n() as u64, "n")?.to_le_bytes())?;
        w.write_all(&to_u32(self.grid.m() as u64, "m")?.to_le_bytes())?;
        w.write_all(&to_u32(self.path_index, "path index")?.to_le_bytes())?;
        w.write_all(&self.h.value().to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in self.values.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump written by [`FbmPath::write_dump`]. The horizon is not
    /// part of the header and must be supplied.
    pub fn read_dump<R: Read>(mut r: R, horizon: f64) -> Result<Self> {
        let mut header = [0u8; DUMP_HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[..4] != DUMP_MAGIC {
            return Err(Error::InvalidGrid("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let n = u32_at(4) as usize;
        let m = u32_at(8) as usize;
        let path_index = u32_at(12) as u64;
        let h = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let seed = u64::from_le_bytes(header[24..32].try_into().unwrap());
        let grid = TimeGrid::new(horizon, n, m)?;
        let mut buf = vec![0u8; 8 * (grid.fine_steps() + 1)];
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_values(grid, HurstParam::new(h)?, values, seed, path_index)
    }
}

const DUMP_MAGIC: &[u8; 4] = b"FBM1";
pub const DUMP_HEADER_LEN: usize = 32;
