//! Deterministic, schedule-independent random streams for parallel Monte
//! Carlo.
//!
//! A single 64-bit root seed determines everything. Samples are produced in
//! fixed blocks of [`BLOCK`] draws; block `b` uses its own ChaCha12 stream
//! seeded by a SplitMix64 expansion of `(root_seed, b)`. Workers may process
//! blocks in any order and in any number of threads: the values written into
//! slot `i` depend only on `(seed, i)`, so sample batches are bit-identical
//! for every worker count, not merely for a fixed one. Reductions over
//! batches are accumulated per block and combined in block order.

use crate::C64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Samples per independently seeded block.
pub const BLOCK: usize = 1024;

/// SplitMix64 step; the standard 64-bit mixer.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Independent ChaCha12 stream for block `block` of the stream family
/// identified by `(root, stream_tag)`.
pub fn block_rng(root: u64, stream_tag: u64, block: u64) -> ChaCha12Rng {
    let mut st = root ^ stream_tag.rotate_left(17);
    let mut seed = [0u8; 32];
    let a = splitmix64(&mut st);
    let mut st2 = a ^ block.wrapping_mul(0xD1342543DE82EF95).wrapping_add(0x2545F4914F6CDD1D);
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut st2).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

/// Uniform in [0, 1) with 53-bit resolution.
#[inline]
pub fn uniform_01(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard real normal via Box-Muller (one value per call, pairs cached
/// would complicate determinism for nothing at these budgets).
#[inline]
pub fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1 = 1.0 - uniform_01(rng); // (0, 1]
    let u2 = uniform_01(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Standard complex normal with unit second moment, `<|z|^2> = 1`.
#[inline]
pub fn standard_complex_normal(rng: &mut ChaCha12Rng) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    C64::new(s * standard_normal(rng), s * standard_normal(rng))
}

/// Fill `count` rows of dimension `dim` in parallel; `fill(rng, row)` draws
/// one row. Output is independent of thread count and scheduling.
pub fn fill_blocks<T: Clone + Send + Sync + Default>(
    root: u64,
    stream_tag: u64,
    count: usize,
    dim: usize,
    fill: impl Fn(&mut ChaCha12Rng, &mut [T]) + Sync,
) -> Vec<Vec<T>> {
    let mut out = vec![vec![T::default(); dim]; count];
    let blocks: Vec<(usize, &mut [Vec<T>])> = {
        let mut rem: &mut [Vec<T>] = &mut out;
        let mut v = Vec::new();
        let mut b = 0usize;
        while !rem.is_empty() {
            let take = rem.len().min(BLOCK);
            let (head, tail) = rem.split_at_mut(take);
            v.push((b, head));
            rem = tail;
            b += 1;
        }
        v
    };
    blocks.into_par_iter().for_each(|(b, rows)| {
        let mut rng = block_rng(root, stream_tag, b as u64);
        for row in rows.iter_mut() {
            fill(&mut rng, row);
        }
    });
    out
}
