mod common;

use common::*;
use mdk::classify;
use mdk::rng::{unit, Stream};
use mdk::spectral::spectrum_reversible;
use mdk::{ProbabilityVector, TransitionMatrix};
use proptest::prelude::*;

/// Chain of a random symmetric edge measure: P(x, y) = W(x, y) / W(x, .), pi(x) = W(x, .).
/// Without loops a bipartite support gives a periodic chain; holes can disconnect it.
fn from_edge_measure(
    rng: &mut Stream,
    n: usize,
    holes: f64,
    loops: bool,
) -> (TransitionMatrix, ProbabilityVector) {
    let mut w = vec![0.0; n * n];
    for x in 0..n {
        for y in x..n {
            let keep = if x == y { loops } else { unit(rng) >= holes };
            if keep {
                let v = 0.05 + unit(rng);
                w[x * n + y] = v;
                w[y * n + x] = v;
            }
        }
    }
    for x in 0..n {
        if w[x * n..(x + 1) * n].iter().all(|&v| v == 0.0) {
            w[x * n + x] = 1.0;
        }
    }
    let mass: Vec<f64> = (0..n).map(|x| w[x * n..(x + 1) * n].iter().sum()).collect();
    let rows = (0..n)
        .map(|x| w[x * n..(x + 1) * n].iter().map(|v| v / mass[x]).collect())
        .collect();
    let p = TransitionMatrix::new(space(n), rows).unwrap();
    let pi = ProbabilityVector::from_unnormalized(space(n), mass).unwrap();
    (p, pi)
}

proptest! {
    #[test]
    fn spectrum_in_unit_interval_with_matching_trace(
        seed in any::<u64>(),
        n in 1usize..=8,
        holes in 0.0..0.9f64,
        loops in any::<bool>(),
    ) {
        let (p, w) = from_edge_measure(&mut rng(seed, 0), n, holes, loops);
        let s = spectrum_reversible(&p, &w).unwrap();
        for &ev in &s.eigenvalues {
            prop_assert!((-1.0 - 1e-10..=1.0 + 1e-10).contains(&ev), "{ev}");
        }
        let trace: f64 = (0..n).map(|x| p.get(x, x)).sum();
        let sum: f64 = s.eigenvalues.iter().sum();
        prop_assert!((trace - sum).abs() < 1e-9, "{trace} vs {sum}");
    }

    #[test]
    fn gap_positive_exactly_when_irreducible_and_aperiodic(
        seed in any::<u64>(),
        n in 2usize..=8,
        holes in 0.0..0.9f64,
        loops in any::<bool>(),
    ) {
        let (p, w) = from_edge_measure(&mut rng(seed, 1), n, holes, loops);
        let c = classify(&p, &w, 1e-10).unwrap();
        let s = spectrum_reversible(&p, &w).unwrap();
        if c.irreducible && c.aperiodic {
            prop_assert!(s.gamma_star > 0.0, "{s:?}");
        } else {
            prop_assert!(s.gamma_star.abs() < 1e-9, "{c:?} {s:?}");
        }
    }

    #[test]
    fn random_reversible_instances(seed in any::<u64>(), n in 1usize..=8, sparsity in 0.0..0.9f64) {
        let (p, w) = reversible(&mut rng(seed, 2), n, sparsity);
        let s = spectrum_reversible(&p, &w).unwrap();
        prop_assert!(s.eigenvalues.iter().all(|ev| ev.abs() <= 1.0 + 1e-10));
        if n > 1 {
            prop_assert!(s.gamma_star > 0.0);
        }
    }
}
