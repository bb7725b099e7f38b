mod common;

use common::invariants::*;
use proptest::prelude::*;

macro_rules! props {
    ($cases:expr; $($name:ident => $check:ident),* $(,)?) => {
        proptest! {
            #![proptest_config(ProptestConfig::with_cases($cases))]
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

props! { 48;
    estimates_ordered_in_unit_interval => erg_bounds,
    matrix_pairs_match_distribution_pairs => erg_pair_consistency,
}

props! { 256;
    dobrushin_submultiplicative => erg_submultiplicative,
    scrambling_iff_below_one => erg_scrambling,
    unit_rank_iff_zero => erg_unit_rank,
    dobrushin_convex => erg_convex,
}
