//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit `&mut R: Rng`. Work that is
//! split into independent pieces (trials, Monte-Carlo chunks) derives one
//! child stream per piece from a base seed and the piece's coordinates, so
//! results never depend on execution order or thread count.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// The generator used throughout the crate.
pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a base seed together with a tuple of coordinates into a child seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Child stream for the given coordinates.
pub fn child(base: u64, parts: &[u64]) -> Stream {
    stream(derive_seed(base, parts))
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Row-major fill, so the draw order is the natural reading order.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Uniform point on the unit sphere of dimension `n - 1`.
pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let g = gaussian_vector(rng, n);
        let norm = g.norm();
        if norm > 1e-300 {
            return g / norm;
        }
    }
}

/// Uniform random subset of `{0, .., n-1}` with `k` elements, sorted.
pub fn random_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}
