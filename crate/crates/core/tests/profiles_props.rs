mod common;

use graphlim::graphon::cut_semidistance;
use graphlim::measures::hausdorff_by;
use graphlim::measures::lp_measures;
use graphlim::partition::FunctionPartition;
use graphlim::profiles::{dm_estimate, kprofile, partition_profile};
use graphlim::strategy::{CutMode, Strategy};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn exhaustive_profiles_ignore_relabeling(n in 1usize..=6, k in 1usize..=2, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let w = common::random_pvariable(&mut rng, n, 2);
        let v = w.relabel(&common::random_permutation(&mut rng, n)).unwrap();
        let a = kprofile(&w, k, &Strategy::Exhaustive).unwrap();
        let b = kprofile(&v, k, &Strategy::Exhaustive).unwrap();
        prop_assert_eq!(hausdorff_by(a.members(), b.members(), lp_measures), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampled_bounds_bracket_exhaustive(n in 2usize..=5, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let u = common::random_01(&mut rng, n);
        let w = common::random_01(&mut rng, n);
        let exact = dm_estimate(&u, &w, 2, &Strategy::Exhaustive).unwrap();
        prop_assert_eq!(exact.lower, exact.upper);
        for s in [Strategy::Random { samples: 6, seed }, Strategy::Local { restarts: 2, seed }] {
            let d = dm_estimate(&u, &w, 2, &s).unwrap();
            prop_assert!(d.lower <= exact.lower + 1e-9, "{s}: lower {} > {}", d.lower, exact.lower);
            prop_assert!(d.upper >= exact.upper - 1e-9, "{s}: upper {} < {}", d.upper, exact.upper);
        }
    }

    #[test]
    fn zero_cut_distance_forces_equal_profiles(n in 1usize..=4, same in any::<bool>(), seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let u = common::random_pvariable(&mut rng, n, 2);
        let w = if same {
            graphlim::pvariable::StepPVariable::quantile_from_kernel(u.cell_rows()).unwrap()
        } else {
            common::random_pvariable(&mut rng, n, 2)
        };
        if cut_semidistance(&u, &w, &CutMode::Exhaustive).unwrap().upper <= 1e-9 {
            for idx in 0..(2u64.pow(n as u32)) {
                let p = FunctionPartition::from_index(n, 2, idx);
                prop_assert!(lp_measures(&partition_profile(&u, &p), &partition_profile(&w, &p)) <= 1e-6);
            }
        }
    }
}
