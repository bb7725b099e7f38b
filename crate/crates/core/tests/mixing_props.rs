mod common;

use common::*;
use mdk::mixing::{
    cesaro_bound_check, divergence_trajectory, mixing_time, transport_epsilon, MixingDivergence,
    MixingMode, MixingQuery, MixingTime, Verdict,
};
use proptest::prelude::*;

const CAP: u64 = 200_000;

fn query(div: MixingDivergence, eps: f64, mode: MixingMode) -> MixingQuery {
    MixingQuery::new(div, eps, mode).with_cap(CAP)
}

fn divergences() -> Vec<MixingDivergence> {
    vec![
        MixingDivergence::Tv,
        MixingDivergence::DAlpha { alpha: 0.5 },
        MixingDivergence::DAlpha { alpha: 2.0 },
        MixingDivergence::RAlpha { alpha: 0.5 },
        MixingDivergence::RAlpha { alpha: 2.0 },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_sandwich(seed in any::<u64>(), n in 2usize..=6, sparsity in 0.0..0.8f64) {
        let (p, w) = reversible(&mut rng(seed, 0), n, sparsity);
        for alpha in [0.5, 2.0] {
            for eps in [1e-2, 1e-3] {
                let q = query(MixingDivergence::DAlpha { alpha }, eps, MixingMode::Average);
                let r = mixing_time(&p, &w, &q).unwrap();
                prop_assert!(r.sandwich_holds != Some(false), "{r:?}");
                if r.bounds_applicable {
                    if let MixingTime::Exact(t) = r.t_exact {
                        prop_assert!(r.bound_lower.unwrap() <= t as f64);
                        prop_assert!(t as f64 <= r.bound_upper.unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn renyi_time_is_transported_alpha_time(
        seed in any::<u64>(),
        n in 2usize..=6,
        alpha in prop::sample::select(vec![0.25, 0.5, 0.75, 1.5, 2.0, 4.0]),
        eps in prop::sample::select(vec![1e-1, 1e-2, 1e-3]),
        worst in any::<bool>(),
    ) {
        let (p, w) = reversible(&mut rng(seed, 1), n, 0.3);
        let mode = if worst { MixingMode::WorstCase } else { MixingMode::Average };
        let r = mixing_time(&p, &w, &query(MixingDivergence::RAlpha { alpha }, eps, mode)).unwrap();
        let eps_d = transport_epsilon(alpha, eps).unwrap();
        let d = mixing_time(&p, &w, &query(MixingDivergence::DAlpha { alpha }, eps_d, mode)).unwrap();
        prop_assert_eq!(r.t_exact, d.t_exact);
    }

    #[test]
    fn average_never_exceeds_worst_case(
        seed in any::<u64>(),
        n in 2usize..=6,
        eps in prop::sample::select(vec![0.3, 1e-1, 1e-2, 1e-3]),
    ) {
        let p = sparse_chain(&mut rng(seed, 2), n, 0.3);
        let w = mdk::chain::stationary_distribution(&p);
        prop_assume!(w.as_ref().is_ok_and(|w| w.is_strictly_positive()));
        let w = w.unwrap();
        for div in divergences() {
            let avg = mixing_time(&p, &w, &query(div, eps, MixingMode::Average)).unwrap();
            let worst = mixing_time(&p, &w, &query(div, eps, MixingMode::WorstCase)).unwrap();
            match (avg.t_exact, worst.t_exact) {
                (MixingTime::Exact(a), MixingTime::Exact(b)) => prop_assert!(a <= b, "{div:?}: {a} > {b}"),
                (MixingTime::ExceededCap, MixingTime::Exact(b)) => prop_assert!(false, "{div:?}: average capped, worst {b}"),
                _ => {}
            }
        }
    }

    #[test]
    fn cesaro_tv_bound(seed in any::<u64>(), n in 2usize..=6, sparsity in 0.0..0.8f64) {
        let (p, w) = reversible(&mut rng(seed, 3), n, sparsity);
        for eps in [0.1, 0.01] {
            let rec = cesaro_bound_check(&p, &w, eps, None, &[]).unwrap();
            let first = &rec.bounds[0];
            prop_assert!(first.holds != Verdict::Violated, "{first:?}");
        }
    }

    #[test]
    fn worst_case_tv_non_increasing(seed in any::<u64>(), n in 2usize..=6, holes in 0.0..0.8f64) {
        let p = sparse_chain(&mut rng(seed, 4), n, holes);
        let w = mdk::chain::stationary_distribution(&p);
        prop_assume!(w.as_ref().is_ok_and(|w| w.is_strictly_positive()));
        let w = w.unwrap();
        let d = divergence_trajectory(&p, &w, MixingDivergence::Tv, MixingMode::WorstCase, 64).unwrap();
        for k in 1..d.len() {
            prop_assert!(d[k] <= d[k - 1] + 1e-12, "t = {}: {} > {}", k + 1, d[k], d[k - 1]);
        }
    }
}
