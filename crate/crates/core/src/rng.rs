//! The single pseudo-random generator used across the crate.
//!
//! Every consumer draws from `Pcg64` (PCG XSL-RR 128/64) seeded with
//! `mix(seed, stream)`, so independent streams (epochs, permutation trials,
//! dataset generation) never depend on the order in which they are created.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

pub type Rng64 = Pcg64;

/// Stream id reserved for synthetic Gaussian data.
pub const GAUSSIAN_STREAM: u64 = 0x6761_7573_7369_616e;
/// Stream id reserved for power-iteration start vectors.
pub const POWER_STREAM: u64 = 0x706f_7765_7269_7472;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of stream `stream` under the master `seed`.
pub fn mix(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_mul(0xd1b5_4a32_d192_ed03)))
}

pub fn stream(seed: u64, stream_id: u64) -> Rng64 {
    Rng64::seed_from_u64(mix(seed, stream_id))
}

/// In-place Fisher–Yates shuffle.
pub fn fisher_yates<T, R: Rng + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Uniform permutation of `0..n` drawn from stream `(seed, stream_id)`.
pub fn permutation(n: usize, seed: u64, stream_id: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    fisher_yates(&mut stream(seed, stream_id), &mut perm);
    perm
}

/// Two independent standard normals via the Box–Muller transform.
pub fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

/// A uniformly random unit vector of length `dim`.
pub fn unit_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, POWER_STREAM);
    let mut v = Vec::with_capacity(dim + 1);
    while v.len() < dim {
        let (a, b) = box_muller(&mut rng);
        v.push(a);
        v.push(b);
    }
    v.truncate(dim);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}
