use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::binomial::binomial_row;
use super::distributions::{binomial_pmf, neg_binomial_pmf, poisson_pmfs};
use super::Rational;
use crate::error::{Error, Result};

/// Total arrival rate of the three-site system; every density decays as
/// `e^{-3t}`.
pub const EXP_RATE: u32 = 3;

/// A density of the form `constant - (c_0 + c_1 t + ... + c_d t^d) e^{-3t}`
/// with exact rational coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPolyDensity {
    constant: Rational,
    poly: Vec<Rational>,
    constant_f64: f64,
    // g_i = constant - c_i i! / 3^i, so that the density equals
    // sum_i g_i Pr(Poisson(3t) = i) + constant Pr(Poisson(3t) > d)
    poisson_weights: Vec<f64>,
}

impl ExpPolyDensity {
    fn new(constant: Rational, mut poly: Vec<Rational>) -> Self {
        while poly.len() > 1 && poly.last().is_some_and(Zero::is_zero) {
            poly.pop();
        }
        let rate = Rational::from_integer(BigInt::from(EXP_RATE));
        let mut scale = Rational::one(); // i! / 3^i
        let poisson_weights = poly
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i > 0 {
                    scale = &scale * Rational::from_integer(BigInt::from(i)) / &rate;
                }
                to_f64(&(&constant - c * &scale))
            })
            .collect();
        Self {
            constant_f64: to_f64(&constant),
            constant,
            poly,
            poisson_weights,
        }
    }

    /// The `t -> infinity` limit.
    pub fn constant(&self) -> &Rational {
        &self.constant
    }

    /// Coefficients `c_0 ..= c_d` of the polynomial multiplying `e^{-3t}`.
    pub fn poly(&self) -> &[Rational] {
        &self.poly
    }

    pub fn degree(&self) -> usize {
        self.poly.len() - 1
    }

    /// Coefficients `b_i` with `d/dt density = (sum_i b_i t^i) e^{-3t}`.
    pub fn derivative_coefficients(&self) -> Vec<Rational> {
        let rate = Rational::from_integer(BigInt::from(EXP_RATE));
        (0..self.poly.len())
            .map(|i| {
                let next = self
                    .poly
                    .get(i + 1)
                    .map(|c| c * Rational::from_integer(BigInt::from(i + 1)))
                    .unwrap_or_else(Rational::zero);
                &rate * &self.poly[i] - next
            })
            .collect()
    }

    /// Evaluates the density at `t >= 0`.
    ///
    /// The expression is regrouped as a mixture of Poisson(3t) probabilities
    /// with nonnegative weights, so small `t` suffers no cancellation between
    /// the constant and the decaying part, and large `t` never forms
    /// `e^{3t}`-sized intermediates.
    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let lambda = f64::from(EXP_RATE) * t;
        let d = self.degree();
        let pmf = poisson_pmfs(d, lambda);
        let body: f64 = self
            .poisson_weights
            .iter()
            .zip(&pmf)
            .skip(1)
            .map(|(g, p)| g * p)
            .sum();
        let value = body + self.constant_f64 * poisson_upper_tail(d, lambda, &pmf);
        value.clamp(0.0, self.constant_f64)
    }
}

/// `Pr(Poisson(lambda) > d)` given the pmf on `0..=d`.
fn poisson_upper_tail(d: usize, lambda: f64, pmf: &[f64]) -> f64 {
    if lambda >= d as f64 + 1.0 {
        return (1.0 - pmf.iter().sum::<f64>()).max(0.0);
    }
    if lambda == 0.0 {
        return 0.0;
    }
    // terms decrease from d + 1 on
    let mut term = pmf[d] * lambda / (d as f64 + 1.0);
    let mut sum = 0.0;
    let mut i = d + 1;
    while term > sum * 1e-18 && term > 0.0 {
        sum += term;
        i += 1;
        term *= lambda / i as f64;
    }
    sum
}

fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn check_layer(layer: usize) -> Result<usize> {
    if layer == 0 {
        return Err(Error::input("layers are numbered from 1"));
    }
    Ok(layer - 1)
}

fn factorials(upto: usize) -> Vec<BigInt> {
    let mut f = Vec::with_capacity(upto + 1);
    f.push(BigInt::one());
    for i in 1..=upto {
        let next = &f[i - 1] * BigInt::from(i);
        f.push(next);
    }
    f
}

/// Coefficients `a_s` with `Pr(H_t = h) = (sum_s a_s t^s) e^{-3t}` for the
/// centre height of the three-site system.
///
/// Conditioning on the centre count, `Pr(H = h)` is the convolution of a
/// Poisson pmf with the law of the maximum of the two side counts; after
/// collecting powers of `t` the only nonzero coefficients are `s = h..=2h`.
pub fn height_pmf_coefficients(h: usize) -> Vec<Rational> {
    let fact = factorials(h);
    let mut a = vec![Rational::zero(); 2 * h + 1];
    let inv = |d: BigInt| Rational::new(BigInt::one(), d);
    // suffix[j] = sum_{k >= j} 1 / (k! (h - k)!)
    let mut suffix = vec![Rational::zero(); h + 2];
    for k in (0..=h).rev() {
        suffix[k] = &suffix[k + 1] + inv(&fact[k] * &fact[h - k]);
    }
    for j in 0..=h {
        let both = inv(&fact[j] * &fact[j] * &fact[h - j]);
        let side = Rational::from_integer(BigInt::from(2)) * &suffix[j + 1] / &fact[j];
        a[h + j] = both + side;
    }
    a
}

/// Integrates `f(t) = (sum_s a_s t^s) e^{-3t}` from 0 using
/// `int_0^t x^s e^{-ax} dx = s!/a^{s+1} (1 - e^{-at} sum_{i<=s} (at)^i / i!)`.
pub fn integrate_exp_poly(a: &[Rational]) -> ExpPolyDensity {
    let rate = BigInt::from(EXP_RATE);
    let fact = factorials(a.len());
    // w_s = a_s s! / 3^{s+1}, the mass that term s contributes at t = infinity
    let weights: Vec<Rational> = a
        .iter()
        .enumerate()
        .map(|(s, a_s)| a_s * &fact[s] / num_traits::pow(rate.clone(), s + 1))
        .collect();
    let constant: Rational = weights.iter().sum();
    let mut poly = vec![Rational::zero(); a.len().max(1)];
    let mut suffix = Rational::zero();
    for i in (0..a.len()).rev() {
        suffix += &weights[i];
        poly[i] = &suffix * num_traits::pow(rate.clone(), i) / &fact[i];
    }
    ExpPolyDensity::new(constant, poly)
}

/// Exact time-dependent centre density of layer `layer` in the three-site
/// system.
pub fn density_symbolic(layer: usize) -> Result<ExpPolyDensity> {
    let h = check_layer(layer)?;
    Ok(integrate_exp_poly(&height_pmf_coefficients(h)))
}

/// Centre density of layer `layer` at time `t`.
pub fn density_time(layer: usize, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 || t.is_infinite() {
        return Err(Error::input(format!(
            "time must be finite and nonnegative, got {t}"
        )));
    }
    Ok(density_symbolic(layer)?.eval(t))
}

/// Limiting (`t -> infinity`) centre density of layer `layer`:
///
/// `sum_k C(h,k) [ C(h+k,k) 3^-(h+k+1) + 2 sum_{j<k} C(h+j,j) 3^-(h+j+1) ]`
/// with `h = layer - 1`. Evaluated over the common denominator `3^(2h+1)`.
pub fn end_density(layer: usize) -> Result<Rational> {
    let h = check_layer(layer)?;
    let three = BigInt::from(3);
    let pow3: Vec<BigInt> = std::iter::successors(Some(BigInt::one()), |p| Some(p * &three))
        .take(h + 1)
        .collect();
    let row_h = binomial_row(h);
    // diag[k] = C(h+k, k) 3^(h-k)
    let diag: Vec<BigInt> = (0..=h)
        .map(|k| BigInt::from(binomial_row(h + k)[k].clone()) * &pow3[h - k])
        .collect();

    let mut numer = BigInt::zero();
    let mut prefix = BigInt::zero();
    for k in 0..=h {
        let c = BigInt::from(row_h[k].clone());
        numer += &c * (&diag[k] + BigInt::from(2) * &prefix);
        prefix += &diag[k];
    }
    let denom = num_traits::pow(three, 2 * h + 1);
    Ok(Rational::new(numer, denom))
}

/// Splits the end-density of `layer` (`r`) into
///
/// * `term1 = 1/2 sum_k Pr(X = k) Pr(Y = k)` and
/// * `term2 = sum_k Pr(X = k) Pr(Y < k)`,
///
/// with `X ~ Binomial(r - 1, 1/2)` and `Y ~ NegativeBinomial(r, 1/3)`
/// counting successes before the `r`-th failure. `term1` is half the
/// probability that the two counts coincide.
pub fn end_density_split(layer: usize) -> Result<(Rational, Rational)> {
    let h = check_layer(layer)?;
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let third = Rational::new(BigInt::one(), BigInt::from(3));
    let mut term1 = Rational::zero();
    let mut term2 = Rational::zero();
    let mut y_below = Rational::zero(); // Pr(Y < k)
    for k in 0..=h {
        let x_k = binomial_pmf(h, k, &half);
        let y_k = neg_binomial_pmf(layer, k, &third);
        term1 += &x_k * &y_k;
        term2 += &x_k * &y_below;
        y_below += y_k;
    }
    Ok((term1 * half, term2))
}

pub(crate) fn is_strictly_between_zero_and_half(x: &Rational) -> bool {
    x.is_positive() && x < &Rational::new(BigInt::one(), BigInt::from(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn first_layers_closed_forms() {
        let expected: [(Rational, Vec<Rational>); 4] = [
            (q(1, 3), vec![q(1, 3)]),
            (q(11, 27), vec![q(11, 27), q(11, 9), q(1, 3)]),
            (
                q(35, 81),
                vec![q(35, 81), q(35, 27), q(35, 18), q(7, 9), q(1, 12)],
            ),
            (
                q(971, 2187),
                vec![
                    q(971, 2187),
                    q(971, 729),
                    q(971, 486),
                    q(971, 486),
                    q(283, 324),
                    q(17, 108),
                    q(1, 108),
                ],
            ),
        ];
        for (r, (constant, poly)) in expected.iter().enumerate() {
            let d = density_symbolic(r + 1).unwrap();
            assert_eq!(d.constant(), constant);
            assert_eq!(d.poly(), poly.as_slice(), "layer {}", r + 1);
        }
    }

    #[test]
    fn degree_is_twice_layer_below() {
        for r in 1..=30 {
            let d = density_symbolic(r).unwrap();
            assert_eq!(d.degree(), 2 * (r - 1));
            assert_eq!(d.poly()[0], *d.constant());
            assert!(d.poly().iter().all(|c| !c.is_negative()));
        }
    }

    #[test]
    fn derivative_matches_height_coefficients_exactly() {
        for r in 1..=25 {
            let d = density_symbolic(r).unwrap();
            assert_eq!(d.derivative_coefficients(), height_pmf_coefficients(r - 1));
        }
    }

    #[test]
    fn height_coefficients_at_small_h() {
        // h = 0: Pr(H = 0) = e^{-3t}
        assert_eq!(height_pmf_coefficients(0), vec![q(1, 1)]);
        // h = 1: one arrival anywhere, or one on each side: (3t + t^2) e^{-3t}
        assert_eq!(height_pmf_coefficients(1), vec![q(0, 1), q(3, 1), q(1, 1)]);
    }

    #[test]
    fn end_density_table_values() {
        let table = [
            (1, q(1, 3)),
            (2, q(11, 27)),
            (3, q(35, 81)),
            (4, q(971, 2187)),
            (5, q(8881, 19683)),
            (6, q(80811, 177147)),
            (7, q(733209, 1594323)),
            (8, q(6640491, 14348907)),
            (9, q(60067809, 129140163)),
            (10, q(542880971, 1162261467)),
        ];
        for (r, v) in table {
            assert_eq!(end_density(r).unwrap(), v, "layer {r}");
        }
    }

    #[test]
    fn end_density_denominator_is_power_of_three() {
        for r in 1..=60 {
            let v = end_density(r).unwrap();
            let mut d = v.denom().clone();
            let three = BigInt::from(3);
            let mut e = 0;
            while (&d % &three).is_zero() {
                d /= &three;
                e += 1;
            }
            assert!(d.is_one());
            assert!(e < 2 * r);
        }
    }

    #[test]
    fn symbolic_constant_equals_end_density() {
        for r in 1..=100 {
            assert_eq!(
                *density_symbolic(r).unwrap().constant(),
                end_density(r).unwrap()
            );
        }
    }

    #[test]
    fn split_at_first_layer() {
        let (t1, t2) = end_density_split(1).unwrap();
        assert_eq!(t1, q(1, 3));
        assert_eq!(t2, q(0, 1));
    }

    #[test]
    fn split_sums_to_end_density() {
        for r in 1..=20 {
            let (t1, t2) = end_density_split(r).unwrap();
            assert_eq!(t1 + t2, end_density(r).unwrap(), "layer {r}");
        }
    }

    #[test]
    fn collision_term_shrinks() {
        let t10 = end_density_split(10).unwrap().0;
        let t50 = end_density_split(50).unwrap().0;
        let t100 = end_density_split(100).unwrap().0;
        assert!(t50 < t10);
        assert!(t100 < t50);
        // exact value is 0.020028668786...
        let v = t100.to_f64().unwrap();
        assert!((v - 0.020_028_668_786_8).abs() < 1e-12, "{v}");
    }

    #[test]
    fn layer_zero_is_rejected() {
        assert!(end_density(0).is_err());
        assert!(density_symbolic(0).is_err());
        assert!(end_density_split(0).is_err());
        assert!(density_time(0, 1.0).is_err());
    }

    #[test]
    fn density_time_closed_forms() {
        for &t in &[0.0f64, 0.01, 0.3, 1.0, 4.0, 30.0] {
            let e = (-3.0 * t).exp();
            let l1 = 1.0 / 3.0 - e / 3.0;
            assert!((density_time(1, t).unwrap() - l1).abs() < 1e-15, "t={t}");
            let l2 = 11.0 / 27.0 - (11.0 / 27.0 + 11.0 / 9.0 * t + t * t / 3.0) * e;
            assert!((density_time(2, t).unwrap() - l2).abs() < 1e-14, "t={t}");
        }
        let at_one = 11.0 / 27.0 - 53.0 / 27.0 * (-3.0f64).exp();
        assert!((density_time(2, 1.0).unwrap() - at_one).abs() < 1e-15);
        assert_eq!(density_time(4, 0.0).unwrap(), 0.0);
        assert!(density_time(2, -1.0).is_err());
    }

    #[test]
    fn small_time_has_no_cancellation() {
        // layer 1: (1 - e^{-3t}) / 3 ~ t for tiny t
        let t = 1e-9;
        let v = density_time(1, t).unwrap();
        assert!((v / t - 1.0).abs() < 1e-8);
        // layer 3 grows like 7/6 t^3 near zero (Pr(H = 2) ~ 7/2 t^2)
        let v3 = density_time(3, 1e-3).unwrap();
        assert!((v3 / (7.0 / 6.0 * 1e-9) - 1.0).abs() < 0.01, "{v3}");
    }

    #[test]
    fn large_time_reaches_constant() {
        let d = density_symbolic(40).unwrap();
        let c = d.constant().to_f64().unwrap();
        assert!((d.eval(1e4) - c).abs() < 1e-15);
        assert!(d.eval(200.0) <= c);
        assert!(d.eval(5.0) < d.eval(50.0));
    }
}
