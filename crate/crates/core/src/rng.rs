//! Seed derivation and deterministic Monte-Carlo reduction.
//!
//! Every random quantity in the crate comes from a [`ChaCha8Rng`] seeded from a
//! `u64` derived by [`derive_seed`]. Monte-Carlo loops are cut into fixed-size
//! chunks, each with its own substream, and the per-chunk partial sums are
//! reduced in chunk order; the result does not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Rng = ChaCha8Rng;

/// Samples per Monte-Carlo chunk.
pub const MC_CHUNK: usize = 1 << 14;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `base` together with an ordered list of indices.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Mean and standard error of a scalar statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_moments(sum: f64, sum_sq: f64, n: usize) -> Self {
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / nf).sqrt(),
            n,
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::from_moments(0.0, 0.0, 0);
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / nf).sqrt(),
            n,
        }
    }
}

/// Runs `body(rng, count)` over fixed chunks of `total` samples, each chunk on
/// its own substream, and returns the per-chunk results in chunk order.
pub fn chunked_map<T, E, F>(total: usize, seed: u64, body: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(&mut Rng, usize) -> Result<T, E> + Sync,
{
    let chunks = total.div_ceil(MC_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = MC_CHUNK.min(total - c * MC_CHUNK);
            let mut rng = rng_from(derive_seed(seed, &[c as u64]));
            body(&mut rng, count)
        })
        .collect()
}

/// [`chunked_map`] for scalar statistics: `body` returns the `(Σv, Σv²)`
/// moments of its chunk and the sums are reduced in chunk order.
pub fn chunked_moments<E, F>(total: usize, seed: u64, body: F) -> Result<(f64, f64), E>
where
    E: Send,
    F: Fn(&mut Rng, usize) -> Result<(f64, f64), E> + Sync,
{
    let partials = chunked_map(total, seed, body)?;
    Ok(partials
        .into_iter()
        .fold((0.0, 0.0), |acc, (s, q)| (acc.0 + s, acc.1 + q)))
}
