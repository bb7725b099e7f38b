//! Seeded random instances and small named chains used by tests, the CLI and the demo.

use crate::chain::{metropolis_chain, ProbabilityVector, StateSpace, TransitionMatrix};
use crate::error::Result;
use crate::rng::{dirichlet_flat, unit, Stream};

/// Rows drawn from the flat Dirichlet; strictly positive almost surely.
pub fn random_chain(rng: &mut Stream, n: usize) -> TransitionMatrix {
    let data: Vec<f64> = (0..n).flat_map(|_| dirichlet_flat(rng, n)).collect();
    TransitionMatrix::from_flat_unchecked(StateSpace::indexed(n).expect("n >= 1"), data)
}

/// Half flat Dirichlet, half uniform, so the smallest mass stays at least 1/(2n).
pub fn random_pi(rng: &mut Stream, space: &StateSpace) -> ProbabilityVector {
    let n = space.len();
    let w = dirichlet_flat(rng, n)
        .into_iter()
        .map(|v| 0.5 * v + 0.5 / n as f64)
        .collect();
    ProbabilityVector::from_unnormalized(space.clone(), w).expect("positive weights")
}

/// A pi-reversible chain with a positive diagonal somewhere. With `sparsity` > 0 each off-path edge
/// is dropped with that probability; the path 0-1-...-(n-1) is kept so the chain stays irreducible.
pub fn random_reversible(
    rng: &mut Stream,
    pi: &ProbabilityVector,
    sparsity: f64,
) -> TransitionMatrix {
    let n = pi.len();
    let w = pi.weights();
    let mut sym = vec![0.0; n * n];
    for x in 0..n {
        for y in x + 1..n {
            let keep = y == x + 1 || unit(rng) >= sparsity;
            let v = if keep { 0.05 + unit(rng) } else { 0.0 };
            sym[x * n + y] = v;
            sym[y * n + x] = v;
        }
    }
    // lazy factor in (0, 1] leaves room on the diagonal
    let lazy = 0.2 + 0.8 * unit(rng);
    let scale = (0..n)
        .map(|x| sym[x * n..(x + 1) * n].iter().sum::<f64>() / w[x])
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut data = vec![0.0; n * n];
    for x in 0..n {
        let mut off = 0.0;
        for y in 0..n {
            if y != x {
                let v = lazy * sym[x * n + y] / (scale * w[x]);
                data[x * n + y] = v;
                off += v;
            }
        }
        data[x * n + x] = (1.0 - off).max(0.0);
    }
    TransitionMatrix::from_flat_unchecked(pi.space().clone(), data)
}

/// Three-state double well: energies (0, 1, 0), nearest-neighbour proposals, uniform base measure.
pub fn double_well(beta: f64) -> Result<(TransitionMatrix, ProbabilityVector)> {
    let space = StateSpace::new(vec!["left".into(), "barrier".into(), "right".into()])?;
    let q = TransitionMatrix::new(
        space.clone(),
        vec![
            vec![0.5, 0.5, 0.0],
            vec![0.5, 0.0, 0.5],
            vec![0.0, 0.5, 0.5],
        ],
    )?;
    metropolis_chain(
        &q,
        &ProbabilityVector::uniform(space),
        &[0.0, 1.0, 0.0],
        beta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::classify;
    use crate::rng::stream;

    #[test]
    fn reversible_instances_classify() {
        for k in 0..50 {
            let mut rng = stream(7, k);
            let n = 2 + (k as usize % 6);
            let pi = random_pi(&mut rng, &StateSpace::indexed(n).unwrap());
            let p = random_reversible(&mut rng, &pi, 0.4);
            let c = classify(&p, &pi, 1e-10).unwrap();
            assert!(c.reversible && c.irreducible && c.aperiodic, "{c:?}");
        }
    }

    #[test]
    fn double_well_is_reversible() {
        let (p, pi) = double_well(2.0).unwrap();
        assert!(classify(&p, &pi, 1e-12).unwrap().reversible);
        assert!(pi.weights()[1] < pi.weights()[0]);
    }
}
