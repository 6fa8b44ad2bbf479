#![allow(dead_code)]

#[path = "../../src/oracle.rs"]
pub mod oracle;

use fracsde::fbm::{FbmPath, FbmSampler};
use fracsde::{HurstParam, TimeGrid};

pub fn hp(h: f64) -> HurstParam {
    HurstParam::new(h).unwrap()
}

/// Paths `0..count` of one sampler.
pub fn paths(grid: TimeGrid, h: f64, seed: u64, count: u64) -> Vec<FbmPath> {
    let s = FbmSampler::new(grid, hp(h)).unwrap();
    (0..count).map(|i| s.sample(seed, i).unwrap()).collect()
}
