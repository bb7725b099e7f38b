//! Seeded, splittable random streams. Stream `k` of seed `s` is independent of how work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform on [0, 1).
pub fn unit(rng: &mut Stream) -> f64 {
    rng.random::<f64>()
}

/// A draw from the flat Dirichlet on the n-simplex.
pub fn dirichlet_flat(rng: &mut Stream, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -(1.0 - unit(rng)).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Inverse-CDF sampler over nonnegative weights; zero-weight cells are never returned.
#[derive(Clone, Debug)]
pub struct Cumulative {
    acc: Vec<f64>,
    last: usize,
}

impl Cumulative {
    pub fn new(weights: &[f64]) -> Self {
        let mut t = 0.0;
        let acc = weights
            .iter()
            .map(|&w| {
                t += w.max(0.0);
                t
            })
            .collect();
        let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        Self { acc, last }
    }

    /// Index of the first cumulative weight exceeding `u * total`.
    pub fn index(&self, u: f64) -> usize {
        let total = self.acc.last().copied().unwrap_or(0.0);
        let i = self.acc.partition_point(|&c| c <= u * total);
        i.min(self.last)
    }

    pub fn sample(&self, rng: &mut Stream) -> usize {
        self.index(unit(rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, 3).random()).collect();
        let mut s = stream(7, 3);
        let b: Vec<u64> = (0..4).map(|_| s.random()).collect();
        assert_eq!(a[0], b[0]);
        let mut t = stream(7, 4);
        assert_ne!(b[0], t.random::<u64>());
    }

    #[test]
    fn inverse_cdf_skips_zero_cells() {
        let c = Cumulative::new(&[0.0, 0.5, 0.0, 0.5, 0.0]);
        assert_eq!(c.index(0.0), 1);
        assert_eq!(c.index(0.49), 1);
        assert_eq!(c.index(0.5), 3);
        assert_eq!(c.index(0.51), 3);
        assert_eq!(c.index(0.999_999_999), 3);
        assert_eq!(c.index(1.0), 3);
    }

    #[test]
    fn dirichlet_on_simplex() {
        let mut s = stream(1, 0);
        let w = dirichlet_flat(&mut s, 5);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(w.iter().all(|&v| v > 0.0));
    }
}
