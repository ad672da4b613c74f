//! Seeded random number generation.
//!
//! Every stochastic routine takes a [`ModelRng`], a ChaCha20 stream cipher
//! generator (counter based, platform independent). Seeds are plain `u64`s.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::math;

pub type ModelRng = ChaCha20Rng;

/// Recorded in run manifests so results can be tied to the generator.
pub const RNG_NAME: &str = "chacha20/rand_chacha-0.9";

pub fn seeded(seed: u64) -> ModelRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task from a base seed.
pub fn derived(seed: u64, stream: u64) -> ModelRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal(rng: &mut ModelRng, mean: f64, std_dev: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + std_dev * z
}

pub fn normal_vec(rng: &mut ModelRng, n: usize, std_dev: f64) -> Vec<f64> {
    (0..n).map(|_| normal(rng, 0.0, std_dev)).collect()
}

/// Uniform draw in `(0, 1]`.
fn open_unit(rng: &mut ModelRng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Draws `k` distinct indices from `0..n` (partial Fisher-Yates).
pub fn sample_without_replacement(rng: &mut ModelRng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k.min(n));
    pool
}

/// Inverse-CDF draw from a probability vector.
pub fn categorical(rng: &mut ModelRng, probs: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u beyond the accumulated mass; take the last positive entry
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Symmetric Dirichlet draw via normalized Gamma variates.
///
/// Gamma draws are taken in log space (`G(a) = G(a + 1) · U^{1/a}` for
/// `a < 1`) so tiny concentrations do not underflow to an all-zero vector.
pub fn dirichlet(rng: &mut ModelRng, concentration: f64, k: usize) -> Vec<f64> {
    let (shape, boosted) = if concentration < 1.0 {
        (concentration + 1.0, true)
    } else {
        (concentration, false)
    };
    let gamma = Gamma::new(shape, 1.0).expect("positive gamma shape");
    let logs: Vec<f64> = (0..k)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let mut lg = math::ln(g);
            if boosted {
                lg += math::ln(open_unit(rng)) / concentration;
            }
            lg
        })
        .collect();
    let m = math::max(&logs);
    let w: Vec<f64> = logs.iter().map(|&l| math::exp(l - m)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}
