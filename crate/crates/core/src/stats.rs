//! Streaming mean/variance (Welford) with an associative merge.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{child, Stream};

/// Samples per Monte-Carlo chunk. Each chunk owns a child stream, so the
/// estimate depends only on the base seed and the sample count.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let nf = n as f64;
        self.mean += delta * other.n as f64 / nf;
        self.m2 += other.m2 + delta * delta * self.n as f64 * other.n as f64 / nf;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> WidthEstimate {
        WidthEstimate {
            mean: self.mean,
            std_err: self.std_err(),
            n_samples: self.n as usize,
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Monte-Carlo estimate of an expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n_samples: usize,
}

/// Runs `n` draws of `sample` in fixed-size chunks, in parallel, and merges
/// the chunk statistics in chunk order.
pub fn monte_carlo<F>(n: usize, base_seed: u64, sample: F) -> RunningStats
where
    F: Fn(&mut Stream) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<RunningStats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = child(base_seed, &[c as u64]);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| sample(&mut rng)).collect()
        })
        .collect();
    parts.iter().fold(RunningStats::new(), |mut acc, part| {
        acc.merge(part);
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 3.5, 0.25, 9.0];
        let s: RunningStats = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((s.mean() - mean).abs() < 1e-14);
        assert!((s.variance() - var).abs() < 1e-13);
    }

    #[test]
    fn merge_equals_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let all: RunningStats = xs.iter().copied().collect();
        let mut left: RunningStats = xs[..31].iter().copied().collect();
        let right: RunningStats = xs[31..].iter().copied().collect();
        left.merge(&right);
        assert_eq!(left.count(), 100);
        assert!((left.mean() - all.mean()).abs() < 1e-13);
        assert!((left.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_ignores_thread_count() {
        use rand::Rng;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo(3 * CHUNK + 17, 9, |r| r.random::<f64>()))
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a, b);
        assert_eq!(a.count(), (3 * CHUNK + 17) as u64);
        assert!((a.mean() - 0.5).abs() < 0.02);
    }
}
