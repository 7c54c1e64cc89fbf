mod common;

use std::collections::BTreeSet;

use common::merge::{date, run};
use proptest::prelude::*;
use pvlens_core::{EventKey, EventTable};

fn keys(t: &EventTable) -> BTreeSet<EventKey> {
    t.iter().map(|e| e.key()).collect()
}

proptest! {
    #[test]
    fn remerging_a_run_changes_no_keys(r in run(), later in 0u32..100) {
        let mut t = EventTable::new();
        t.merge_run(r.clone(), date(10)).unwrap();
        let before = t.clone();
        let out = t.merge_run(r.clone(), date(10)).unwrap();
        prop_assert_eq!(&t, &before);
        prop_assert_eq!(out.report.inserted, 0);
        prop_assert_eq!(out.report.updated, r.len());

        t.merge_run(r, date(10 + later)).unwrap();
        prop_assert_eq!(keys(&t), keys(&before));
        for e in t.iter() {
            let old = before.get(&e.key()).unwrap();
            prop_assert_eq!(e.first_seen_date, old.first_seen_date);
            prop_assert_eq!(e.last_seen_date, date(10 + later));
            prop_assert_eq!(&e.provenance, &old.provenance);
        }
    }

    #[test]
    fn later_runs_never_delete(r1 in run(), r2 in run()) {
        let mut t = EventTable::new();
        t.merge_run(r1, date(1)).unwrap();
        let before = keys(&t);
        let incoming: BTreeSet<EventKey> = r2.iter().map(|e| e.key()).collect();
        let out = t.merge_run(r2, date(2)).unwrap();
        let after = keys(&t);
        prop_assert!(before.is_subset(&after));
        prop_assert_eq!(&after, &before.union(&incoming).cloned().collect());
        let missing: Vec<EventKey> = before.difference(&incoming).cloned().collect();
        prop_assert_eq!(out.report.not_reconfirmed, missing.len());
        prop_assert_eq!(out.report.not_reconfirmed_keys, missing.clone());
        prop_assert_eq!(out.report.inserted, incoming.difference(&before).count());
        for k in &missing {
            prop_assert_eq!(t.get(k).unwrap().last_seen_date, date(1));
        }
        for e in t.iter() {
            prop_assert!(e.first_seen_date <= e.last_seen_date);
        }
    }

    #[test]
    fn run_order_does_not_matter(r in run(), seed in any::<u64>()) {
        let mut shuffled = r.clone();
        // Cheap deterministic permutation.
        let n = shuffled.len();
        for i in (1..n).rev() {
            let j = (seed.wrapping_mul(i as u64 + 1) >> 7) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let mut a = EventTable::new();
        let mut b = EventTable::new();
        a.merge_run(r, date(3)).unwrap();
        b.merge_run(shuffled, date(3)).unwrap();
        prop_assert_eq!(a, b);
    }
}
