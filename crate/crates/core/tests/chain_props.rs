mod common;

use common::*;
use mdk::chain::detailed_balance_residual;
use mdk::instances::random_reversible;
use mdk::rng::unit;
use mdk::{edge_measure, hypercube_walk, matrix_power, metropolis_chain};
use proptest::prelude::*;

proptest! {
    #[test]
    fn edge_measure_has_unit_mass(seed in any::<u64>(), n in 1usize..=8, holes in 0.0..0.9f64) {
        let mut r = rng(seed, 0);
        let m = sparse_chain(&mut r, n, holes);
        let p = pi(&mut r, n);
        let e = edge_measure(&m, &p).unwrap();
        prop_assert!((e.total() - 1.0).abs() < 1e-12, "{}", e.total());
    }

    #[test]
    fn powers_add(seed in any::<u64>(), n in 1usize..=8, a in 0u64..=16, b in 0u64..=16) {
        let mut r = rng(seed, 1);
        let p = sparse_chain(&mut r, n, 0.3);
        let lhs = matrix_power(&p, a + b);
        let rhs = matrix_power(&p, a).mul(&matrix_power(&p, b)).unwrap();
        prop_assert!(max_abs_diff(lhs.as_slice(), rhs.as_slice()) < 1e-10);
    }

    #[test]
    fn metropolis_is_reversible(seed in any::<u64>(), n in 1usize..=8, beta in 0.0..8.0f64) {
        let mut r = rng(seed, 2);
        let mu = pi(&mut r, n);
        let q = random_reversible(&mut r, &mu, 0.3);
        let energy: Vec<f64> = (0..n).map(|_| 4.0 * unit(&mut r) - 2.0).collect();
        let (p, gibbs) = metropolis_chain(&q, &mu, &energy, beta).unwrap();
        prop_assert!(detailed_balance_residual(&p, &gibbs) < 1e-10);
        let total: f64 = gibbs.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn hypercube_structure() {
    for dim in 1..=8 {
        let (p, pi) = hypercube_walk(dim).unwrap();
        let n = p.n();
        assert_eq!(n, 1 << dim);
        for x in 0..n {
            let row = p.row(x);
            let sum: f64 = row.iter().sum();
            // 1/(2 dim) is a binary fraction only when dim is a power of two
            if dim.is_power_of_two() {
                assert_eq!(sum, 1.0, "dim {dim} row {x}");
            } else {
                assert!(
                    (sum - 1.0).abs() <= dim as f64 * f64::EPSILON,
                    "dim {dim} row {x}"
                );
            }
            assert_eq!(row[x], 0.5);
            for y in 0..n {
                assert_eq!(p.get(x, y), p.get(y, x));
            }
        }
        assert!(pi.weights().iter().all(|&w| w == 1.0 / n as f64));
    }
}
