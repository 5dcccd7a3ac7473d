//! Exact small-scale computations used as ground truth for the analytic
//! formulas and the simulator.
//!
//! All `n^m` arrival sequences of length `m` are equally likely. The
//! enumeration functions replay every sequence through the lattice; the `_dp`
//! variants group sequences by the lattice state they produce, which reaches
//! the same rationals with far fewer replays.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::analytic::{
    binomial, poisson_pmfs, poisson_tail_bound, poisson_truncation_point, DiscreteDist, Rational,
};
use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::lattice::{LatticeConfig, LatticeState};

/// Largest number of sequences the enumerators will replay.
pub const ENUMERATION_BUDGET: u64 = 1 << 24;

/// Largest number of distinct lattice states the DP will hold at once.
pub const STATE_BUDGET: usize = 1 << 22;

/// Per-site arrival counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountVector {
    counts: Vec<u64>,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    /// Counts of a sequence of arrival sites on `n_sites` sites.
    pub fn from_sequence(n_sites: usize, sequence: &[usize]) -> Result<Self> {
        let mut counts = vec![0; n_sites];
        for &x in sequence {
            *counts
                .get_mut(x)
                .ok_or(Error::SiteOutOfRange { site: x, n_sites })? += 1;
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of sequences with these counts.
    pub fn multinomial(&self) -> BigUint {
        let mut left = self.total() as usize;
        let mut out = BigUint::from(1u32);
        for &c in &self.counts {
            out *= binomial(left, c as usize);
            left -= c as usize;
        }
        out
    }

    /// Every count vector with `n_sites` entries summing to `m`, in
    /// lexicographic order.
    pub fn compositions(n_sites: usize, m: u64) -> Vec<CountVector> {
        fn go(prefix: &mut Vec<u64>, n: usize, left: u64, out: &mut Vec<CountVector>) {
            if prefix.len() + 1 == n {
                prefix.push(left);
                out.push(CountVector::new(prefix.clone()));
                prefix.pop();
                return;
            }
            for c in 0..=left {
                prefix.push(c);
                go(prefix, n, left - c, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if n_sites > 0 {
            go(&mut Vec::with_capacity(n_sites), n_sites, m, &mut out);
        }
        out
    }
}

/// Expected occupancy of every cell, as exact rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactOccupancy {
    n_sites: usize,
    layers: u32,
    // [site][layer - 1]
    values: Vec<Rational>,
}

impl ExactOccupancy {
    fn from_counts(n_sites: usize, layers: u32, counts: &[BigUint], total: &BigUint) -> Self {
        let total = BigInt::from(total.clone());
        let values = counts
            .iter()
            .map(|c| Rational::new(BigInt::from(c.clone()), total.clone()))
            .collect();
        Self {
            n_sites,
            layers,
            values,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Highest layer that can be occupied.
    pub fn layers(&self) -> u32 {
        self.layers
    }

    /// Expected occupancy of `(site, layer)`; zero outside the stored range.
    pub fn get(&self, site: usize, layer: u32) -> Rational {
        if site >= self.n_sites || layer == 0 || layer > self.layers {
            return Rational::zero();
        }
        self.values[site * self.layers as usize + layer as usize - 1].clone()
    }

    /// `site,layer,numerator,denominator,decimal` rows, sites outermost.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(OCCUPANCY_CSV_HEADER);
        out.push('\n');
        for site in 0..self.n_sites {
            for layer in 1..=self.layers {
                let v = self.get(site, layer);
                let _ = writeln!(
                    out,
                    "{site},{layer},{},{},{}",
                    v.numer(),
                    v.denom(),
                    sig(v.to_f64().unwrap_or(f64::NAN), 10)
                );
            }
        }
        out
    }
}

pub const OCCUPANCY_CSV_HEADER: &str = "site,layer,numerator,denominator,decimal";

fn sequence_count(n_sites: usize, m: u64) -> Result<u64> {
    let count = u32::try_from(m)
        .ok()
        .and_then(|m| (n_sites as u64).checked_pow(m))
        .filter(|&c| c <= ENUMERATION_BUDGET);
    count.ok_or_else(|| {
        Error::SizeExceeded(format!(
            "{n_sites}^{m} sequences exceed the enumeration budget of {ENUMERATION_BUDGET}; \
             use the state DP instead"
        ))
    })
}

// Decodes sequence `index` into base-`n` digits and replays it, first
// digit first.
fn replay(state: &mut LatticeState, n: u64, m: u64, mut index: u64) {
    state.reset();
    let mut digits = [0usize; 64];
    for d in digits.iter_mut().take(m as usize) {
        *d = (index % n) as usize;
        index /= n;
    }
    for &x in digits[..m as usize].iter().rev() {
        state.deposit_unchecked(x);
    }
}

/// Exact expected occupancy after `m` uniform arrivals, by replaying all
/// `n_sites^m` sequences.
pub fn exact_after_m_arrivals(n_sites: usize, m: u64) -> Result<ExactOccupancy> {
    let config = LatticeConfig::new(n_sites)?;
    let total = sequence_count(n_sites, m)?;
    let layers = m as usize;
    let n = n_sites as u64;
    let counts = (0..total)
        .into_par_iter()
        .fold(
            || (LatticeState::new(config), vec![0u64; n_sites * layers]),
            |(mut state, mut counts), index| {
                replay(&mut state, n, m, index);
                for x in 0..n_sites {
                    for layer in state.column_layers(x) {
                        counts[x * layers + layer as usize - 1] += 1;
                    }
                }
                (state, counts)
            },
        )
        .map(|(_, counts)| counts)
        .reduce(
            || vec![0u64; n_sites * layers],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(a, b)| *a += b);
                a
            },
        );
    let counts: Vec<BigUint> = counts.into_iter().map(BigUint::from).collect();
    Ok(ExactOccupancy::from_counts(
        n_sites,
        m as u32,
        &counts,
        &BigUint::from(total),
    ))
}

/// Grouped lattice states after each number of arrivals.
///
/// With a layer cap, arrivals that would land above the cap are dropped.
/// Layers up to the cap never depend on anything above them, so their
/// occupancy is still exact, and the number of states stays bounded.
struct StateDp {
    n_sites: usize,
    cap: Option<u32>,
    arrivals: u64,
    states: HashMap<LatticeState, BigUint>,
}

impl StateDp {
    fn new(n_sites: usize, cap: Option<u32>) -> Result<Self> {
        let config = LatticeConfig::new(n_sites)?;
        let mut states = HashMap::new();
        states.insert(LatticeState::new(config), BigUint::from(1u32));
        Ok(Self {
            n_sites,
            cap,
            arrivals: 0,
            states,
        })
    }

    fn step(&mut self) -> Result<()> {
        let mut next: HashMap<LatticeState, BigUint> = HashMap::with_capacity(self.states.len());
        for (state, count) in &self.states {
            for x in 0..self.n_sites {
                let mut s = state.clone();
                let above_cap = self.cap.is_some_and(|cap| s.frozen_layers(x) >= cap);
                if !above_cap {
                    s.deposit_unchecked(x);
                }
                *next.entry(s).or_default() += count;
            }
        }
        if next.len() > STATE_BUDGET {
            return Err(Error::SizeExceeded(format!(
                "{} lattice states after {} arrivals exceed the budget of {STATE_BUDGET}",
                next.len(),
                self.arrivals + 1
            )));
        }
        self.states = next;
        self.arrivals += 1;
        Ok(())
    }

    fn total(&self) -> BigUint {
        BigUint::from(self.n_sites).pow(self.arrivals as u32)
    }

    fn occupancy(&self) -> ExactOccupancy {
        let layers = self.arrivals as usize;
        let mut counts = vec![BigUint::zero(); self.n_sites * layers];
        for (state, count) in &self.states {
            for x in 0..self.n_sites {
                for layer in state.column_layers(x) {
                    counts[x * layers + layer as usize - 1] += count;
                }
            }
        }
        ExactOccupancy::from_counts(self.n_sites, layers as u32, &counts, &self.total())
    }

    fn cell(&self, x: usize, layer: u32) -> Rational {
        let hits: BigUint = self
            .states
            .iter()
            .filter(|(s, _)| s.occupied(x as i64, layer))
            .map(|(_, c)| c)
            .sum();
        Rational::new(BigInt::from(hits), BigInt::from(self.total()))
    }
}

fn check_arrivals(m: u64) -> Result<()> {
    if m > u64::from(u32::MAX) {
        return Err(Error::SizeExceeded(format!("{m} arrivals")));
    }
    Ok(())
}

/// Same result as [`exact_after_m_arrivals`], computed over distinct lattice
/// states instead of sequences.
pub fn exact_after_m_arrivals_dp(n_sites: usize, m: u64) -> Result<ExactOccupancy> {
    check_arrivals(m)?;
    let mut dp = StateDp::new(n_sites, None)?;
    for _ in 0..m {
        dp.step()?;
    }
    Ok(dp.occupancy())
}

/// Poissonized density with the mass it leaves out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poissonized {
    pub value: f64,
    /// Upper bound on `Pr(Poisson(n t) > m_max)`; the exact density lies in
    /// `[value, value + tail_bound]` up to rounding.
    pub tail_bound: f64,
    pub m_max: u64,
}

/// Smallest `m_max` whose Poisson(`n_sites * t`) tail bound is below `eps`.
pub fn choose_m_max(n_sites: usize, t: f64, eps: f64) -> u64 {
    poisson_truncation_point(n_sites as f64 * t, eps) as u64
}

/// Exact density at `(x, layer)` and time `t`: the occupancy after `m`
/// arrivals averaged over `m ~ Poisson(n_sites * t)`, summed up to `m_max`.
pub fn exact_density_poissonized(
    n_sites: usize,
    t: f64,
    layer: u32,
    x: usize,
    m_max: u64,
) -> Result<Poissonized> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "time must be finite and nonnegative, got {t}"
        )));
    }
    LatticeConfig::new(n_sites)?.neighborhood(x)?;
    if layer == 0 {
        return Err(Error::InvalidInput("layers start at 1".into()));
    }
    check_arrivals(m_max)?;
    let lambda = n_sites as f64 * t;
    let weights = poisson_pmfs(m_max as usize, lambda);
    let mut dp = StateDp::new(n_sites, Some(layer))?;
    let mut value = 0.0;
    for (m, w) in weights.iter().enumerate() {
        if m > 0 {
            dp.step()?;
        }
        // the occupancy is zero until there are enough arrivals to reach the layer
        if m as u64 >= u64::from(layer) {
            value += w * dp.cell(x, layer).to_f64().unwrap_or(f64::NAN);
        }
    }
    Ok(Poissonized {
        value,
        tail_bound: poisson_tail_bound(m_max as usize + 1, lambda),
        m_max,
    })
}

fn check_height_size(m: u64) -> Result<()> {
    check_arrivals(m)
}

/// Law of the three-site centre height after `m` arrivals, by replaying all
/// `3^m` sequences.
pub fn exact_height_dist(m: u64) -> Result<DiscreteDist<Rational>> {
    let total = sequence_count(3, m)?;
    let config = LatticeConfig::three_site();
    let hist = (0..total)
        .into_par_iter()
        .fold(
            || (LatticeState::new(config), vec![0u64; m as usize + 1]),
            |(mut state, mut hist), index| {
                replay(&mut state, 3, m, index);
                hist[state.nonempty_layers() as usize] += 1;
                (state, hist)
            },
        )
        .map(|(_, hist)| hist)
        .reduce(
            || vec![0u64; m as usize + 1],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(a, b)| *a += b);
                a
            },
        );
    let total = BigInt::from(total);
    Ok(DiscreteDist {
        offset: 0,
        probabilities: hist
            .into_iter()
            .map(|c| Rational::new(BigInt::from(c), total.clone()))
            .collect(),
        tail: 0.0,
    })
}

/// Law of `m_0 + max(m_left, m_right)` for multinomial counts of `m` uniform
/// arrivals on three sites.
pub fn multinomial_height_dist(m: u64) -> Result<DiscreteDist<Rational>> {
    check_height_size(m)?;
    let mut weights = vec![BigUint::zero(); m as usize + 1];
    for counts in CountVector::compositions(3, m) {
        let [l, c, r] = counts.counts() else {
            unreachable!("three sites")
        };
        weights[(c + l.max(r)) as usize] += counts.multinomial();
    }
    let total = BigInt::from(BigUint::from(3u32).pow(m as u32));
    Ok(DiscreteDist {
        offset: 0,
        probabilities: weights
            .into_iter()
            .map(|w| Rational::new(BigInt::from(w), total.clone()))
            .collect(),
        tail: 0.0,
    })
}
