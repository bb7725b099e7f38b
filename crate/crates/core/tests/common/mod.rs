#![allow(dead_code)]

use mdk::instances::{random_chain, random_pi, random_reversible};
use mdk::rng::{stream, unit, Stream};
use mdk::{ProbabilityVector, StateSpace, TransitionMatrix};

pub fn space(n: usize) -> StateSpace {
    StateSpace::indexed(n).unwrap()
}

pub fn rng(seed: u64, idx: u64) -> Stream {
    stream(seed, idx)
}

pub fn positive_chain(rng: &mut Stream, n: usize) -> TransitionMatrix {
    random_chain(rng, n)
}

/// Random chain with roughly `holes` of its off-diagonal entries zeroed, rows renormalized.
pub fn sparse_chain(rng: &mut Stream, n: usize, holes: f64) -> TransitionMatrix {
    let base = random_chain(rng, n);
    let mut rows = base.to_rows();
    for (x, row) in rows.iter_mut().enumerate() {
        for (y, v) in row.iter_mut().enumerate() {
            if y != x && unit(rng) < holes {
                *v = 0.0;
            }
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    TransitionMatrix::new(space(n), rows).unwrap()
}

pub fn pi(rng: &mut Stream, n: usize) -> ProbabilityVector {
    random_pi(rng, &space(n))
}

pub fn reversible(
    rng: &mut Stream,
    n: usize,
    sparsity: f64,
) -> (TransitionMatrix, ProbabilityVector) {
    let p = pi(rng, n);
    let m = random_reversible(rng, &p, sparsity);
    (m, p)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Relative slack for sums of n^2 terms of size |scale|.
pub fn slack(abs: f64, scale: f64) -> f64 {
    abs * scale.abs().max(1.0)
}
pub mod invariants;
