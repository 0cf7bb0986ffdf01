//! Seed splitting. Every random quantity is drawn from a ChaCha8 stream
//! selected by `(seed, stream)`, so independent consumers never share
//! a sequence and results do not depend on evaluation order. Monte-Carlo
//! pricing blocks use xoshiro256++ seeded from such a stream, which is
//! markedly cheaper per draw.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub const STREAM_Y1: u64 = 1;
pub const STREAM_Y2: u64 = 2;
pub const STREAM_PHI1: u64 = 3;
pub const STREAM_PHI2: u64 = 4;

/// Offset for chain streams; chain `k` uses `CHAIN_BASE + k`.
pub const CHAIN_BASE: u64 = 1 << 16;
/// Offset for Monte-Carlo pricing blocks; block `k` uses `MC_BASE + k`.
pub const MC_BASE: u64 = 1 << 32;
/// Offset for simulated path ensembles; path `k` uses `PATH_BASE + k`.
pub const PATH_BASE: u64 = 1 << 48;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for Monte-Carlo block `block`.
pub fn mc_stream(seed: u64, block: u64) -> Xoshiro256PlusPlus {
    let mut key = [0u8; 32];
    stream(seed, MC_BASE.wrapping_add(block)).fill_bytes(&mut key);
    Xoshiro256PlusPlus::from_seed(key)
}

/// Seed for the `k`-th derived sub-run (independent chains, path ensembles).
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    stream(seed, PATH_BASE.wrapping_add(k).wrapping_add(1 << 40)).next_u64()
}
