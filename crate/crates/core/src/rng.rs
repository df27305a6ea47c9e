//! Seeded, splittable random streams.
//!
//! Every stochastic routine takes an explicit 64-bit seed. Work is cut into
//! shards of [`SHARD_SIZE`] draws; shard `i` draws from stream `i` of a
//! ChaCha8 generator keyed by the seed. Results therefore do not depend on
//! how many threads evaluate the shards.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Rng = ChaCha8Rng;

/// Draws per shard.
pub const SHARD_SIZE: usize = 4096;

/// Generator for shard `shard` of the stream keyed by `seed`.
pub fn shard_rng(seed: u64, shard: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Splits `n` draws into shards and runs `f(rng, count)` on each, returning
/// the per-shard results in shard order. Single-shard work runs inline.
pub fn map_shards<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng, usize) -> T + Sync,
{
    let shards = n.div_ceil(SHARD_SIZE);
    let count = |s: usize| SHARD_SIZE.min(n - s * SHARD_SIZE);
    if shards <= 1 {
        let mut rng = shard_rng(seed, 0);
        return vec![f(&mut rng, n)];
    }
    (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = shard_rng(seed, s as u64);
            f(&mut rng, count(s))
        })
        .collect()
}

/// An independent seed for sub-task `tag` of the run keyed by `seed`.
///
/// Drawn from a stream far above any shard index, so derived seeds never
/// collide with the shard streams of `seed` itself.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    use rand::RngCore;
    shard_rng(seed, u64::MAX - tag).next_u64()
}

/// Pairwise (tree) summation of equal-length vectors, in a fixed order.
pub fn pairwise_sum(mut parts: Vec<Vec<f64>>) -> Vec<f64> {
    assert!(!parts.is_empty());
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}
