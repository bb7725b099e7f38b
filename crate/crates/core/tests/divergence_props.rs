mod common;

use common::invariants::*;
use proptest::prelude::*;

macro_rules! props {
    ($($name:ident => $check:ident),* $(,)?) => {
        proptest! {
            $(
                #[test]
                fn $name(seed in any::<u64>(), idx in 0u64..1 << 20) {
                    if let Err(e) = $check(seed, idx) {
                        prop_assert!(false, "{}", e);
                    }
                }
            )*
        }
    };
}

props! {
    nonnegative_and_zero_only_at_equality => div_nonnegative,
    chain_value_equals_edge_measure_value => div_edge_equality,
    renyi_non_decreasing_in_order => div_monotone,
    limit_orders_match_nearby_orders => div_limits,
    pinsker => div_pinsker,
    hellinger_renyi_chi_squared_chain => div_chain,
    skew_symmetry => div_skew,
    equivalence_below_one => div_equivalence,
    jointly_convex_and_quasi_convex => div_convexity,
    weak_triangle => div_weak_triangle,
}
