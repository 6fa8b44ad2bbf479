//! Per-path random streams.
//!
//! Every Monte Carlo path draws from its own ChaCha stream selected by
//! `(master_seed, stream_id)`, so results do not depend on the order in
//! which paths are generated or on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Stream ids at or above this value are reserved for the independent
/// Brownian motion `W`; fBm paths use ids below it.
pub const W_STREAM_OFFSET: u64 = 1 << 31;

pub fn stream(master_seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream for the fBm path with the given index.
pub fn path_stream(master_seed: u64, path_index: u64) -> Result<ChaCha8Rng> {
    if path_index >= W_STREAM_OFFSET {
        return Err(Error::SeedDomain(path_index));
    }
    Ok(stream(master_seed, path_index))
}

/// Stream for the Brownian motion `W` paired with fBm path `path_index`.
pub fn w_stream(master_seed: u64, path_index: u64) -> Result<ChaCha8Rng> {
    if path_index >= W_STREAM_OFFSET {
        return Err(Error::SeedDomain(path_index));
    }
    Ok(stream(master_seed, W_STREAM_OFFSET + path_index))
}
