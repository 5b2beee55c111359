mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sampler_invariants((g, cfg, it) in common::sampler_case()) {
        common::check_sampler(&g, &cfg, it)?;
    }
}
