//! Lattice configuration and the deposition rule.
//!
//! Each column is a growable bitset of occupied layers. Next to it we keep the
//! "blocked" bitset of the column: the OR of the occupancy of the column and
//! its two neighbours. A deposit at `x` lands on the lowest zero bit of
//! `blocked[x]`, which is exactly the lowest layer free across the whole
//! neighbourhood, holes included.

use std::hash::{Hash, Hasher};
use std::ops::RangeInclusive;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// Lattice geometry: `n_sites` positions receive arrivals, everything outside
/// `0..n_sites` is a permanently empty boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeConfig {
    n_sites: usize,
}

impl LatticeConfig {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::input("n_sites must be at least 1"));
        }
        Ok(Self { n_sites })
    }

    /// The three-site system with sites left = 0, centre = 1, right = 2.
    pub fn three_site() -> Self {
        Self { n_sites: 3 }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Middle site for odd sizes, the two middle sites for even sizes.
    pub fn center_sites(&self) -> Vec<usize> {
        let n = self.n_sites;
        if n % 2 == 1 {
            vec![n / 2]
        } else {
            vec![n / 2 - 1, n / 2]
        }
    }

    pub fn neighborhood(&self, x: usize) -> Result<Neighborhood> {
        self.check_site(x)?;
        Ok(Neighborhood {
            center: x,
            lo: x.saturating_sub(1),
            hi: (x + 1).min(self.n_sites - 1),
        })
    }

    fn check_site(&self, x: usize) -> Result<()> {
        if x >= self.n_sites {
            return Err(Error::SiteOutOfRange {
                site: x,
                n_sites: self.n_sites,
            });
        }
        Ok(())
    }
}

/// The site itself plus its occupiable horizontal neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighborhood {
    center: usize,
    lo: usize,
    hi: usize,
}

impl Neighborhood {
    pub fn center(&self) -> usize {
        self.center
    }

    pub fn members(&self) -> RangeInclusive<usize> {
        self.lo..=self.hi
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A full configuration of the lattice together with the arrival counts that
/// produced it.
///
/// Layer arguments and return values are 1-based. Columns are stored in one
/// flat buffer with a shared stride of `stride` words per column, framed by
/// two guard columns standing for the boundary positions `-1` and `n_sites`.
/// Guards are never occupied; their blocked words are written but never read.
#[derive(Debug, Clone)]
pub struct LatticeState {
    config: LatticeConfig,
    stride: usize,
    occupied: Vec<u64>,
    blocked: Vec<u64>,
    // blocked words of column x below floor[x] are all ones
    floor: Vec<usize>,
    arrivals: Vec<u64>,
    total_arrivals: u64,
    top_layer: u32,
}

impl LatticeState {
    pub fn new(config: LatticeConfig) -> Self {
        let n = config.n_sites;
        Self {
            config,
            stride: 1,
            occupied: vec![0; n + 2],
            blocked: vec![0; n + 2],
            floor: vec![0; n],
            arrivals: vec![0; n],
            total_arrivals: 0,
            top_layer: 0,
        }
    }

    /// Empties the lattice, keeping allocations.
    pub fn reset(&mut self) {
        self.occupied.iter_mut().for_each(|w| *w = 0);
        self.blocked.iter_mut().for_each(|w| *w = 0);
        self.floor.iter_mut().for_each(|f| *f = 0);
        self.arrivals.iter_mut().for_each(|a| *a = 0);
        self.total_arrivals = 0;
        self.top_layer = 0;
    }

    pub fn config(&self) -> &LatticeConfig {
        &self.config
    }

    fn grow(&mut self) {
        let (old, new) = (self.stride, self.stride * 2);
        let n = self.config.n_sites + 2;
        for buf in [&mut self.occupied, &mut self.blocked] {
            let mut next = vec![0; n * new];
            for x in 0..n {
                next[x * new..x * new + old].copy_from_slice(&buf[x * old..(x + 1) * old]);
            }
            *buf = next;
        }
        self.stride = new;
    }

    #[inline]
    fn offset(&self, x: usize) -> usize {
        (x + 1) * self.stride
    }

    fn column(&self, x: usize) -> &[u64] {
        let start = self.offset(x);
        &self.occupied[start..start + self.stride]
    }

    /// Drops a particle at site `x` and returns the layer it settles in.
    pub fn deposit(&mut self, x: usize) -> Result<u32> {
        self.config.check_site(x)?;
        Ok(self.deposit_unchecked(x))
    }

    /// Hot-loop variant of [`deposit`](Self::deposit); panics if `x` is out of range.
    #[inline]
    pub fn deposit_unchecked(&mut self, x: usize) -> u32 {
        let mut w = self.floor[x];
        let word = loop {
            if w == self.stride {
                self.grow();
            }
            let word = self.blocked[self.offset(x) + w];
            if word != u64::MAX {
                break word;
            }
            w += 1;
        };
        self.floor[x] = w;
        let bit = (!word).trailing_zeros() as usize;
        let mask = 1u64 << bit;

        let at = self.offset(x) + w;
        self.occupied[at] |= mask;
        self.blocked[at - self.stride] |= mask;
        self.blocked[at] |= mask;
        self.blocked[at + self.stride] |= mask;
        self.arrivals[x] += 1;
        self.total_arrivals += 1;

        let layer = (w * WORD_BITS + bit) as u32 + 1;
        self.top_layer = self.top_layer.max(layer);
        layer
    }

    /// Number of consecutive layers, from layer 1 up, in which site `x` can
    /// no longer change: each is occupied by `x` or by a neighbour.
    pub fn frozen_layers(&mut self, x: usize) -> u32 {
        let start = self.offset(x);
        let mut w = self.floor[x];
        while w < self.stride && self.blocked[start + w] == u64::MAX {
            w += 1;
        }
        self.floor[x] = w;
        let ones = if w < self.stride {
            self.blocked[start + w].trailing_ones() as usize
        } else {
            0
        };
        (w * WORD_BITS + ones) as u32
    }

    /// Occupancy of `(x, layer)`. Positions off the lattice and layer 0 are
    /// always empty.
    #[inline]
    pub fn occupied(&self, x: i64, layer: u32) -> bool {
        if x < 0 || x as usize >= self.config.n_sites || layer == 0 {
            return false;
        }
        let bit = layer as usize - 1;
        let w = bit / WORD_BITS;
        w < self.stride && self.occupied[self.offset(x as usize) + w] >> (bit % WORD_BITS) & 1 == 1
    }

    /// Occupied layers of column `x` in increasing order.
    pub fn column_layers(&self, x: usize) -> impl Iterator<Item = u32> + '_ {
        self.column(x).iter().enumerate().flat_map(|(w, &word)| {
            (0..WORD_BITS)
                .filter(move |b| word >> b & 1 == 1)
                .map(move |b| (w * WORD_BITS + b) as u32 + 1)
        })
    }

    pub fn arrivals(&self, x: usize) -> u64 {
        self.arrivals[x]
    }

    pub fn arrival_counts(&self) -> &[u64] {
        &self.arrivals
    }

    pub fn total_arrivals(&self) -> u64 {
        self.total_arrivals
    }

    /// Highest occupied layer, 0 on an empty lattice.
    pub fn top_layer(&self) -> u32 {
        self.top_layer
    }

    pub fn occupied_cells(&self) -> u64 {
        self.occupied
            .iter()
            .map(|w| u64::from(w.count_ones()))
            .sum()
    }

    /// Number of layers holding at least one particle.
    pub fn nonempty_layers(&self) -> u32 {
        (0..self.stride)
            .map(|w| {
                let union = (0..self.config.n_sites)
                    .fold(0u64, |acc, x| acc | self.occupied[self.offset(x) + w]);
                union.count_ones()
            })
            .sum()
    }

    /// Height of the centre of the three-site system: the number of layers
    /// containing one or two particles.
    pub fn height_center(&self) -> Result<u32> {
        if self.config.n_sites != 3 {
            return Err(Error::Unsupported(format!(
                "the centre height is only defined for 3 sites, got {}",
                self.config.n_sites
            )));
        }
        Ok(self.nonempty_layers())
    }

    /// Checks exclusion, conservation and the consistency of the cached
    /// neighbourhood bitsets.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.config.n_sites;
        for x in 0..n.saturating_sub(1) {
            let (a, b) = (self.column(x), self.column(x + 1));
            if let Some(w) = (0..self.stride).find(|&w| a[w] & b[w] != 0) {
                let bit = w * WORD_BITS + (a[w] & b[w]).trailing_zeros() as usize;
                return Err(Error::Invariant(format!(
                    "adjacent sites {x} and {} both occupied at layer {}",
                    x + 1,
                    bit + 1
                )));
            }
        }
        let guards = [self.offset(0) - self.stride, self.offset(n)];
        if guards
            .iter()
            .any(|&g| self.occupied[g..g + self.stride].iter().any(|&w| w != 0))
        {
            return Err(Error::Invariant("boundary column occupied".into()));
        }
        let cells = self.occupied_cells();
        let counted: u64 = self.arrivals.iter().sum();
        if cells != self.total_arrivals || counted != self.total_arrivals {
            return Err(Error::Invariant(format!(
                "{cells} occupied cells, {counted} counted arrivals, {} total arrivals",
                self.total_arrivals
            )));
        }
        for x in 0..n {
            let members = x.saturating_sub(1)..=(x + 1).min(n - 1);
            for w in 0..self.stride {
                let union = members
                    .clone()
                    .fold(0u64, |acc, y| acc | self.occupied[self.offset(y) + w]);
                if union != self.blocked[self.offset(x) + w] {
                    return Err(Error::Invariant(format!(
                        "stale neighbourhood cache at site {x}, word {w}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Occupancy words of every column with trailing empty words removed;
    /// equal for equal configurations regardless of buffer sizes.
    fn canonical_columns(&self) -> impl Iterator<Item = &[u64]> + '_ {
        (0..self.config.n_sites).map(|x| {
            let col = self.column(x);
            let len = col.iter().rposition(|&w| w != 0).map_or(0, |i| i + 1);
            &col[..len]
        })
    }
}

impl PartialEq for LatticeState {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.canonical_columns().eq(other.canonical_columns())
    }
}

impl Eq for LatticeState {}

impl Hash for LatticeState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.config.hash(state);
        for col in self.canonical_columns() {
            col.hash(state);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEFT: usize = 0;
    const CENTER: usize = 1;
    const RIGHT: usize = 2;

    // Arrivals at centre, left, centre.
    fn figure_state() -> LatticeState {
        let mut s = LatticeState::new(LatticeConfig::three_site());
        assert_eq!(s.deposit(CENTER).unwrap(), 1);
        assert_eq!(s.deposit(LEFT).unwrap(), 2);
        assert_eq!(s.deposit(CENTER).unwrap(), 3);
        s
    }

    #[test]
    fn empty_lattice_deposits_at_layer_one() {
        let mut s = LatticeState::new(LatticeConfig::three_site());
        assert_eq!(s.deposit(CENTER).unwrap(), 1);
    }

    #[test]
    fn figure_next_positions() {
        let mut c = figure_state();
        assert_eq!(c.deposit(RIGHT).unwrap(), 2);
        assert!(!c.occupied(RIGHT as i64, 1));

        let mut a = figure_state();
        assert_eq!(a.deposit(LEFT).unwrap(), 4);
        let mut b = figure_state();
        assert_eq!(b.deposit(CENTER).unwrap(), 4);
    }

    #[test]
    fn figure_occupancy_and_height() {
        let s = figure_state();
        assert!(s.occupied(CENTER as i64, 1));
        assert!(s.occupied(LEFT as i64, 2));
        assert!(s.occupied(CENTER as i64, 3));
        assert!(!s.occupied(CENTER as i64, 2));
        assert!(!s.occupied(RIGHT as i64, 1));
        assert_eq!(s.height_center().unwrap(), 3);
        assert_eq!(s.arrival_counts(), &[1, 2, 0]);
        s.check_invariants().unwrap();
    }

    #[test]
    fn boundary_and_layer_zero_are_empty() {
        let s = figure_state();
        assert!(!s.occupied(-1, 1));
        assert!(!s.occupied(3, 1));
        assert!(!s.occupied(CENTER as i64, 0));
        let e = LatticeState::new(LatticeConfig::three_site());
        assert_eq!(e.height_center().unwrap(), 0);
        assert!(!e.occupied(1, 1));
    }

    #[test]
    fn deposit_can_land_below_lattice_top() {
        let mut s = figure_state();
        assert_eq!(s.top_layer(), 3);
        assert_eq!(s.deposit(RIGHT).unwrap(), 2);
        assert_eq!(s.top_layer(), 3);
        // the hole at (right, 1) stays blocked by the centre particle
        assert_eq!(s.deposit(RIGHT).unwrap(), 4);
        assert!(!s.occupied(RIGHT as i64, 1));
    }

    #[test]
    fn side_column_below_centre_top() {
        let mut s = LatticeState::new(LatticeConfig::three_site());
        s.deposit(LEFT).unwrap();
        s.deposit(CENTER).unwrap();
        s.deposit(CENTER).unwrap();
        assert_eq!(s.column_layers(CENTER).collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(s.deposit(RIGHT).unwrap(), 1);
        // the centre hole at layer 1 is now permanent
        assert_eq!(s.deposit(CENTER).unwrap(), 4);
        s.check_invariants().unwrap();
    }

    #[test]
    fn out_of_range_site_is_rejected() {
        let mut s = LatticeState::new(LatticeConfig::three_site());
        assert_eq!(
            s.deposit(3),
            Err(Error::SiteOutOfRange {
                site: 3,
                n_sites: 3
            })
        );
        assert!(LatticeConfig::new(0).is_err());
    }

    #[test]
    fn height_requires_three_sites() {
        let s = LatticeState::new(LatticeConfig::new(5).unwrap());
        assert!(matches!(s.height_center(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn neighborhoods_are_clipped() {
        let cfg = LatticeConfig::new(4).unwrap();
        assert_eq!(cfg.neighborhood(0).unwrap().members(), 0..=1);
        assert_eq!(cfg.neighborhood(2).unwrap().members(), 1..=3);
        assert_eq!(cfg.neighborhood(3).unwrap().len(), 2);
        let single = LatticeConfig::new(1).unwrap();
        assert_eq!(single.neighborhood(0).unwrap().members(), 0..=0);
        assert_eq!(cfg.center_sites(), vec![1, 2]);
        assert_eq!(LatticeConfig::new(9).unwrap().center_sites(), vec![4]);
    }

    #[test]
    fn single_site_stacks() {
        let mut s = LatticeState::new(LatticeConfig::new(1).unwrap());
        for expected in 1..=130 {
            assert_eq!(s.deposit(0).unwrap(), expected);
        }
        s.check_invariants().unwrap();
    }

    #[test]
    fn reset_clears_everything() {
        let mut s = figure_state();
        s.reset();
        assert_eq!(s, LatticeState::new(LatticeConfig::three_site()));
    }
}
