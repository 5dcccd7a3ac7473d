use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// Sites hit by successive arrivals, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArrivalSequence {
    pub sites: Vec<usize>,
}

impl ArrivalSequence {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Number of arrivals at each of `n_sites` sites.
    pub fn counts(&self, n_sites: usize) -> Vec<u64> {
        let mut counts = vec![0; n_sites];
        for &x in &self.sites {
            counts[x] += 1;
        }
        counts
    }
}

/// Arrivals of independent rate-1 Poisson processes at every site up to time
/// `t`, merged in time order.
///
/// Given the per-site counts the merged order is a uniformly random
/// arrangement of the multiset of labels, and the final configuration only
/// depends on that order, so no timestamps are drawn.
pub fn sample_arrivals_fixed_time<R: Rng + ?Sized>(
    n_sites: usize,
    t: f64,
    rng: &mut R,
) -> Result<ArrivalSequence> {
    let mut seq = ArrivalSequence::default();
    fill_fixed_time(n_sites, t, rng, &mut seq.sites)?;
    Ok(seq)
}

/// `m` independent uniformly chosen sites.
pub fn sample_arrivals_fixed_count<R: Rng + ?Sized>(
    n_sites: usize,
    m: u64,
    rng: &mut R,
) -> ArrivalSequence {
    let mut seq = ArrivalSequence::default();
    fill_fixed_count(n_sites, m, rng, &mut seq.sites);
    seq
}

pub(crate) fn poisson_sampler(t: f64) -> Result<Option<Poisson<f64>>> {
    if t.is_nan() || t < 0.0 || t.is_infinite() {
        return Err(Error::input(format!(
            "time must be finite and nonnegative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(None);
    }
    Poisson::new(t)
        .map(Some)
        .map_err(|e| Error::input(format!("cannot sample Poisson({t}): {e}")))
}

pub(crate) fn fill_fixed_time_with<R: Rng + ?Sized>(
    n_sites: usize,
    sampler: Option<&Poisson<f64>>,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    out.clear();
    let Some(poisson) = sampler else {
        return;
    };
    for x in 0..n_sites {
        let count = poisson.sample(rng) as usize;
        out.extend(std::iter::repeat_n(x, count));
    }
    out.shuffle(rng);
}

fn fill_fixed_time<R: Rng + ?Sized>(
    n_sites: usize,
    t: f64,
    rng: &mut R,
    out: &mut Vec<usize>,
) -> Result<()> {
    let sampler = poisson_sampler(t)?;
    fill_fixed_time_with(n_sites, sampler.as_ref(), rng, out);
    Ok(())
}

pub(crate) fn fill_fixed_count<R: Rng + ?Sized>(
    n_sites: usize,
    m: u64,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    out.clear();
    out.extend((0..m).map(|_| rng.random_range(0..n_sites)));
}
