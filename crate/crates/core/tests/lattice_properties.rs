use std::collections::HashSet;

use parking_core::{LatticeConfig, LatticeState};
use proptest::prelude::*;

/// Cell-set model of the deposition rule.
struct Naive {
    n: usize,
    cells: HashSet<(usize, u32)>,
}

impl Naive {
    fn new(n: usize) -> Self {
        Self {
            n,
            cells: HashSet::new(),
        }
    }

    fn deposit(&mut self, x: usize) -> u32 {
        let lo = x.saturating_sub(1);
        let hi = (x + 1).min(self.n - 1);
        let layer = (1..)
            .find(|&l| (lo..=hi).all(|y| !self.cells.contains(&(y, l))))
            .unwrap();
        self.cells.insert((x, layer));
        layer
    }
}

fn sites_and_sequence() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (1usize..12).prop_flat_map(|n| (Just(n), prop::collection::vec(0..n, 0..300)))
}

proptest! {
    #[test]
    fn matches_naive_rule((n, seq) in sites_and_sequence()) {
        let mut fast = LatticeState::new(LatticeConfig::new(n).unwrap());
        let mut naive = Naive::new(n);
        for &x in &seq {
            prop_assert_eq!(fast.deposit(x).unwrap(), naive.deposit(x));
        }
        for &(x, l) in &naive.cells {
            prop_assert!(fast.occupied(x as i64, l));
        }
        prop_assert_eq!(fast.occupied_cells(), naive.cells.len() as u64);
        prop_assert!(fast.check_invariants().is_ok());
    }

    #[test]
    fn exclusion_and_conservation((n, seq) in sites_and_sequence()) {
        let mut s = LatticeState::new(LatticeConfig::new(n).unwrap());
        for &x in &seq {
            s.deposit(x).unwrap();
        }
        prop_assert_eq!(s.occupied_cells(), seq.len() as u64);
        prop_assert_eq!(s.total_arrivals(), seq.len() as u64);
        for x in 0..n.saturating_sub(1) {
            for l in 1..=s.top_layer() {
                prop_assert!(!(s.occupied(x as i64, l) && s.occupied(x as i64 + 1, l)));
            }
        }
    }

    #[test]
    fn three_site_height_identity(seq in prop::collection::vec(0usize..3, 0..400)) {
        let mut s = LatticeState::new(LatticeConfig::three_site());
        for &x in &seq {
            s.deposit(x).unwrap();
            let c = s.arrival_counts();
            prop_assert_eq!(u64::from(s.height_center().unwrap()), c[1] + c[0].max(c[2]));
            prop_assert_eq!(s.height_center().unwrap(), s.nonempty_layers());
        }
    }

    #[test]
    fn frozen_cells_never_change((n, seq) in sites_and_sequence(), split in 0usize..300) {
        let split = split.min(seq.len());
        let mut s = LatticeState::new(LatticeConfig::new(n).unwrap());
        for &x in &seq[..split] {
            s.deposit(x).unwrap();
        }
        let frozen: Vec<u32> = (0..n).map(|x| s.frozen_layers(x)).collect();
        let before: Vec<Vec<bool>> = (0..n)
            .map(|x| (1..=frozen[x]).map(|l| s.occupied(x as i64, l)).collect())
            .collect();
        for &x in &seq[split..] {
            s.deposit(x).unwrap();
        }
        for x in 0..n {
            let after: Vec<bool> = (1..=frozen[x]).map(|l| s.occupied(x as i64, l)).collect();
            prop_assert_eq!(&before[x], &after);
        }
    }
}
