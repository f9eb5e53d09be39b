//! Single-threaded behaviour against a sequential dictionary.

use std::collections::HashMap;

use proptest::prelude::*;
use wfext::{Config, HashFn, HashTable, LockTable, Outcome};

#[derive(Clone, Debug)]
enum Op {
    Insert(u64, u64),
    Delete(u64),
    Lookup(u64),
}

fn op_strategy(keys: u64) -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..keys, any::<u64>()).prop_map(|(k, v)| Op::Insert(k, v)),
        (0..keys).prop_map(Op::Delete),
        (0..keys).prop_map(Op::Lookup),
    ]
}

/// The reference semantics: insert replaces an existing value.
fn oracle(map: &mut HashMap<u64, u64>, op: &Op) -> (Option<Outcome>, Option<u64>) {
    match *op {
        Op::Insert(k, v) => {
            let o = if map.insert(k, v).is_some() { Outcome::Updated } else { Outcome::Inserted };
            (Some(o), None)
        }
        Op::Delete(k) => {
            let o = if map.remove(&k).is_some() { Outcome::Deleted } else { Outcome::Absent };
            (Some(o), None)
        }
        Op::Lookup(k) => (None, map.get(&k).copied()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_sequential_dictionary(
        ops in prop::collection::vec(op_strategy(64), 1..600),
        b in 1usize..6,
        identity in any::<bool>(),
    ) {
        let hash = if identity { HashFn::Identity } else { HashFn::Mix };
        // Identity hashing of small keys shares all leading bits; keep them apart.
        let spread = |k: u64| if identity { k.reverse_bits() } else { k };
        let t = HashTable::with_config(Config::new(1, b).hash(hash).poison(true)).unwrap();
        let mut c = t.register().unwrap();
        let mut map = HashMap::new();
        for op in &ops {
            let op = match *op {
                Op::Insert(k, v) => Op::Insert(spread(k), v),
                Op::Delete(k) => Op::Delete(spread(k)),
                Op::Lookup(k) => Op::Lookup(spread(k)),
            };
            let (want_o, want_v) = oracle(&mut map, &op);
            match op {
                Op::Insert(k, v) => prop_assert_eq!(Some(c.insert(k, v).unwrap()), want_o),
                Op::Delete(k) => prop_assert_eq!(Some(c.delete(k).unwrap()), want_o),
                Op::Lookup(k) => prop_assert_eq!(c.lookup(k), want_v),
            }
        }
        t.check_invariants().map_err(TestCaseError::fail)?;
        let mut want: Vec<(u64, u64)> = map.into_iter().collect();
        want.sort_unstable();
        prop_assert_eq!(t.snapshot().entries(), want);
        prop_assert_eq!(c.stats().apply_unresolved, 0);
        drop(c);
        prop_assert_eq!(t.poison_hits(), 0);
    }

    #[test]
    fn lock_table_matches_sequential_dictionary(ops in prop::collection::vec(op_strategy(64), 1..400)) {
        let t = LockTable::new(3, HashFn::Mix);
        let mut map = HashMap::new();
        for op in &ops {
            let (want_o, want_v) = oracle(&mut map, op);
            match *op {
                Op::Insert(k, v) => prop_assert_eq!(Some(t.insert(k, v)), want_o),
                Op::Delete(k) => prop_assert_eq!(Some(t.delete(k)), want_o),
                Op::Lookup(k) => prop_assert_eq!(t.lookup(k), want_v),
            }
        }
    }

    #[test]
    fn directory_invariants_hold_after_random_splits(
        keys in prop::collection::hash_set(any::<u64>(), 1..300),
        b in 2usize..5,
        depth in 1u8..4,
    ) {
        let t = HashTable::with_config(Config::new(1, b).initial_depth(depth)).unwrap();
        let mut c = t.register().unwrap();
        for (i, &k) in keys.iter().enumerate() {
            c.insert(k, i as u64).unwrap();
            if i % 37 == 0 {
                t.check_invariants().map_err(TestCaseError::fail)?;
            }
        }
        t.check_invariants().map_err(TestCaseError::fail)?;
        prop_assert_eq!(t.snapshot().len(), keys.len());
    }

    #[test]
    fn split_conserves_items_and_results_never_regress(
        keys in prop::collection::vec(any::<u64>(), 1..200),
    ) {
        let t = HashTable::with_config(Config::new(1, 2)).unwrap();
        let mut c = t.register().unwrap();
        for &k in &keys {
            c.insert(k, k).unwrap();
            // Every bucket's result slot for thread 0 is bounded by the latest seqnum,
            // and the bucket holding k carries exactly that seqnum.
            let snap = t.snapshot();
            prop_assert!(snap.buckets.iter().all(|b| b.results[0] <= c.seqnum()));
            prop_assert_eq!(t.result_seqnum(k, 0), c.seqnum());
        }
    }

    #[test]
    fn random_merges_conserve_items(
        keys in prop::collection::hash_set(any::<u64>(), 1..120),
        merges in prop::collection::vec((1u8..6, any::<u64>()), 1..40),
    ) {
        let t = HashTable::with_config(Config::new(1, 4).poison(true)).unwrap();
        let mut c = t.register().unwrap();
        for &k in &keys {
            c.insert(k, k).unwrap();
        }
        for (len, bits) in merges {
            let parent = wfext::Prefix::new(bits, len);
            let _ = c.request_merge(parent).unwrap();
            t.check_invariants().map_err(TestCaseError::fail)?;
            let got: Vec<u64> = t.snapshot().entries().into_iter().map(|(k, _)| k).collect();
            let mut want: Vec<u64> = keys.iter().copied().collect();
            want.sort_unstable();
            prop_assert_eq!(got, want);
        }
    }
}
