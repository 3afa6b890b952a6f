//! Property tests pinning the reference algorithms to exhaustive search and
//! the core predicates to their algebraic laws.

use dynis::domain::{compatible, contains, precedes, Endpoint, Interval, IntervalId};
use dynis::oracle;
use proptest::prelude::*;

fn arb_set(max_n: usize, coord: i64, maxlen: i64) -> impl Strategy<Value = Vec<Interval>> {
    prop::collection::vec((0..coord, 1..=maxlen), 0..=max_n).prop_map(|pairs| {
        pairs
            .into_iter()
            .enumerate()
            .map(|(i, (s, len))| {
                Interval::new(
                    IntervalId(i as u64),
                    Endpoint::new(s, i as u64 * 2),
                    Endpoint::new(s + len, i as u64 * 2 + 1),
                    1,
                )
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn greedy_matches_exhaustive(set in arb_set(12, 40, 15)) {
        prop_assert_eq!(oracle::static_is(&set), oracle::exhaustive_is(&set));
    }

    #[test]
    fn multi_greedy_matches_exhaustive(set in arb_set(9, 30, 12), m in 1usize..=3) {
        prop_assert_eq!(
            oracle::static_multi(&set, m).count as u64,
            oracle::exhaustive_multi(&set, m)
        );
    }

    #[test]
    fn wis_matches_exhaustive(set in arb_set(12, 40, 15), weights in prop::collection::vec(0u64..50, 12)) {
        let weighted: Vec<Interval> = set
            .iter()
            .zip(weights.iter().chain(std::iter::repeat(&1)))
            .map(|(iv, w)| Interval { weight: *w, ..*iv })
            .collect();
        prop_assert_eq!(oracle::static_wis(&weighted), oracle::exhaustive_wis(&weighted));
    }

    #[test]
    fn machine_lists_are_compatible_chains(set in arb_set(16, 50, 20), m in 1usize..=4) {
        let asg = oracle::static_multi(&set, m);
        let find = |id: IntervalId| *set.iter().find(|iv| iv.id == id).unwrap();
        for machine in &asg.machines {
            for w in machine.windows(2) {
                let (a, b) = (find(w[0]), find(w[1]));
                prop_assert!(compatible(&a, &b));
                prop_assert!(precedes(&a, &b));
            }
        }
        prop_assert_eq!(asg.count, asg.machines.iter().map(|v| v.len()).sum::<usize>());
    }

    #[test]
    fn compatibility_laws(set in arb_set(10, 30, 12)) {
        for a in &set {
            for b in &set {
                prop_assert_eq!(compatible(a, b), compatible(b, a));
                if a.id != b.id {
                    // containment is antisymmetric on distinct intervals
                    prop_assert!(!(contains(a, b) && contains(b, a)));
                    // precedes totally orders distinct intervals
                    prop_assert!(precedes(a, b) ^ precedes(b, a));
                }
            }
        }
    }

    #[test]
    fn global_lc_equals_linear_scan(set in arb_set(20, 60, 20), cutoff in 0i64..70) {
        let mut idx = dynis::index::GlobalIndex::new();
        for iv in &set {
            idx.insert(*iv).unwrap();
        }
        let c = Endpoint::new(cutoff, 10_000);
        prop_assert_eq!(
            idx.global_lc(c).map(|iv| iv.id),
            oracle::lc_scan(&set, c).map(|iv| iv.id)
        );
    }

    #[test]
    fn greedy_chain_runs_to_exhaustion(set in arb_set(15, 50, 20)) {
        prop_assume!(!set.is_empty());
        let earliest = set.iter().min_by_key(|iv| iv.end).unwrap();
        let chain = oracle::greedy_chain(&set, earliest.id).unwrap();
        prop_assert_eq!(chain.len() as u64, oracle::static_is(&set));
        for w in chain.windows(2) {
            prop_assert!(compatible(&w[0], &w[1]) && precedes(&w[0], &w[1]));
        }
    }
}
