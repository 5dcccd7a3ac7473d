use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::binomial::binomial;
use super::Rational;
use crate::error::{Error, Result};

/// A distribution on consecutive integers `offset, offset + 1, ...`, possibly
/// truncated. `tail` bounds the probability mass left out by truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist<P> {
    pub offset: i64,
    pub probabilities: Vec<P>,
    pub tail: f64,
}

impl<P> DiscreteDist<P> {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Probability of `value`, `None` outside the stored support.
    pub fn get(&self, value: i64) -> Option<&P> {
        let i = value.checked_sub(self.offset)?;
        usize::try_from(i)
            .ok()
            .and_then(|i| self.probabilities.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &P)> {
        let offset = self.offset;
        self.probabilities
            .iter()
            .enumerate()
            .map(move |(i, p)| (offset + i as i64, p))
    }
}

impl DiscreteDist<f64> {
    /// Poisson(`t`) truncated so that the omitted mass is below `tail_bound`.
    pub fn poisson(t: f64, tail_bound: f64) -> Result<Self> {
        check_time(t)?;
        let m = poisson_truncation_point(t, tail_bound);
        Ok(Self {
            offset: 0,
            probabilities: poisson_pmfs(m, t),
            tail: poisson_tail_bound(m + 1, t),
        })
    }

    /// Law of the maximum of two independent Poisson(`t`) counts.
    pub fn max_poisson(t: f64, tail_bound: f64) -> Result<Self> {
        check_time(t)?;
        let m = poisson_truncation_point(t, tail_bound / 2.0);
        let p = poisson_pmfs(m, t);
        Ok(Self {
            offset: 0,
            probabilities: max_from_pmfs(&p),
            // max > m needs one of the two counts above m
            tail: 2.0 * poisson_tail_bound(m + 1, t),
        })
    }

    /// Law of the centre height of the three-site system at time `t`.
    pub fn height(t: f64, tail_bound: f64) -> Result<Self> {
        check_time(t)?;
        // the height never exceeds the total count, which is Poisson(3t)
        let m = poisson_truncation_point(3.0 * t, tail_bound);
        let p = poisson_pmfs(m, t);
        let max = max_from_pmfs(&p);
        let probabilities = (0..=m).map(|h| convolve_at(&p, &max, h)).collect();
        Ok(Self {
            offset: 0,
            probabilities,
            tail: poisson_tail_bound(m + 1, 3.0 * t),
        })
    }
}

impl DiscreteDist<Rational> {
    /// Binomial(`n`, `p`) over its full support.
    pub fn binomial(n: usize, p: &Rational) -> Self {
        Self {
            offset: 0,
            probabilities: (0..=n).map(|k| binomial_pmf(n, k, p)).collect(),
            tail: 0.0,
        }
    }

    pub fn total(&self) -> Rational {
        self.probabilities.iter().sum()
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::input(format!("time must be nonnegative, got {t}")));
    }
    if t.is_infinite() {
        return Err(Error::input("time must be finite"));
    }
    Ok(())
}

// ln(n!) - (n + 1/2) ln n + n - ln sqrt(2 pi)
#[allow(clippy::excessive_precision)]
const STIRLING_ERR: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_22,
    0.041_340_695_955_409_294_09,
    0.027_677_925_684_998_339_15,
    0.020_790_672_103_765_093_11,
    0.016_644_691_189_821_192_16,
    0.013_876_128_823_070_747_99,
    0.011_896_709_945_891_770_10,
    0.010_411_265_261_972_096_50,
    0.009_255_462_182_712_732_918,
    0.008_330_563_433_362_871_256,
    0.007_573_675_487_951_840_795,
    0.006_942_840_107_209_529_866,
    0.006_408_994_188_004_207_068,
    0.005_951_370_112_758_847_736,
    0.005_554_733_551_962_801_371,
];

fn stirling_err(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n < 16 {
        return STIRLING_ERR[n as usize];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / m) + m - x`, evaluated by series when `x` is
/// close to `m`.
fn deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let next = s + ej / f64::from(2 * j + 1);
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

fn poisson_pmf_raw(k: u64, t: f64) -> f64 {
    if t == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-t).exp();
    }
    let x = k as f64;
    (-stirling_err(k) - deviance(x, t)).exp() / (std::f64::consts::TAU * x).sqrt()
}

/// `e^{-t} t^k / k!`, accurate to a few ulps for large `k` and `t`.
pub fn poisson_pmf(k: u64, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(poisson_pmf_raw(k, t))
}

/// Poisson(`t`) probabilities for `0..=upto`. `t` must be valid.
pub fn poisson_pmfs(upto: usize, t: f64) -> Vec<f64> {
    (0..=upto as u64).map(|k| poisson_pmf_raw(k, t)).collect()
}

/// Upper bound on `Pr(Poisson(t) >= k)`.
///
/// Past the mode the pmf ratios `t / (i + 1)` are at most `t / (k + 1)`, so
/// the tail is dominated by a geometric series started at `pmf(k)`.
pub fn poisson_tail_bound(k: usize, t: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let ratio = t / (k as f64 + 1.0);
    if ratio >= 1.0 {
        return 1.0;
    }
    (poisson_pmf_raw(k as u64, t) / (1.0 - ratio)).min(1.0)
}

/// Smallest `m` with `Pr(Poisson(t) > m) < eps` according to
/// [`poisson_tail_bound`].
pub fn poisson_truncation_point(t: f64, eps: f64) -> usize {
    let mut m = t.floor() as usize;
    while poisson_tail_bound(m + 1, t) >= eps {
        m += 1;
    }
    m
}

fn max_from_pmfs(p: &[f64]) -> Vec<f64> {
    let mut below = 0.0;
    p.iter()
        .map(|&pn| {
            let v = pn * pn + 2.0 * pn * below;
            below += pn;
            v
        })
        .collect()
}

fn convolve_at(a: &[f64], b: &[f64], h: usize) -> f64 {
    (0..=h).map(|k| a[h - k] * b[k]).sum()
}

/// `Pr(max(N, N') = n)` for independent `N, N' ~ Poisson(t)`:
/// `p_n^2 + 2 p_n Pr(N < n)`.
pub fn max_poisson_pmf(n: u64, t: f64) -> Result<f64> {
    check_time(t)?;
    let p = poisson_pmfs(n as usize, t);
    Ok(max_from_pmfs(&p)[n as usize])
}

/// `Pr(H = h)` where `H = N_0 + max(N_left, N_right)` is the centre height of
/// the three-site system at time `t`. This is also the time derivative of the
/// centre density at layer `h + 1`.
pub fn height_pmf(h: u64, t: f64) -> Result<f64> {
    check_time(t)?;
    let p = poisson_pmfs(h as usize, t);
    let max = max_from_pmfs(&p);
    Ok(convolve_at(&p, &max, h as usize))
}

fn pow(base: &Rational, exp: usize) -> Rational {
    num_traits::pow(base.clone(), exp)
}

/// `C(n, k) (1 - p)^(n - k) p^k`, zero outside `0..=n`.
pub fn binomial_pmf(n: usize, k: usize, p: &Rational) -> Rational {
    if k > n {
        return Rational::zero();
    }
    let q = Rational::one() - p;
    Rational::from_integer(BigInt::from(binomial(n, k))) * pow(&q, n - k) * pow(p, k)
}

/// Probability of `k` successes before the `r`-th failure, success
/// probability `p`: `C(r + k - 1, k) (1 - p)^r p^k`.
pub fn neg_binomial_pmf(r: usize, k: usize, p: &Rational) -> Rational {
    if r == 0 {
        return if k == 0 {
            Rational::one()
        } else {
            Rational::zero()
        };
    }
    let q = Rational::one() - p;
    Rational::from_integer(BigInt::from(binomial(r + k - 1, k))) * pow(&q, r) * pow(p, k)
}
