use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use parking_core::analytic::{
    density_symbolic, density_time, height_pmf, integrate_exp_poly, poisson_pmf, Rational,
};

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adapt(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let f = &f as &dyn Fn(f64) -> f64;
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adapt(f, a, b, fa, fm, fb, whole, 1e-14, 50)
}

fn h(h: u64, t: f64) -> f64 {
    height_pmf(h, t).unwrap()
}

#[test]
fn layer_three_is_integral_of_height_two() {
    let q = quad(|s| h(2, s), 0.0, 2.5);
    assert!((density_time(3, 2.5).unwrap() - q).abs() < 1e-9);
}

#[test]
fn layer_five_constant_and_value() {
    let d = density_symbolic(5).unwrap();
    assert_eq!(*d.constant(), Rational::new(8881.into(), 19683.into()));
    let q = quad(|s| h(4, s), 0.0, 1.0);
    assert!((d.eval(1.0) - q).abs() < 1e-10, "{} vs {q}", d.eval(1.0));
}

#[test]
fn every_layer_is_integral_of_height_below() {
    for r in 1..=8u64 {
        for t in [0.3, 1.7, 4.0] {
            let q = quad(|s| h(r - 1, s), 0.0, t);
            let v = density_time(r as usize, t).unwrap();
            assert!((v - q).abs() < 1e-9, "r={r} t={t}: {v} vs {q}");
        }
    }
}

#[test]
fn monomial_integration_identity() {
    for s in 0..=10usize {
        let mut a = vec![Rational::zero(); s + 1];
        a[s] = Rational::one();
        let integral = integrate_exp_poly(&a);
        for t in [0.5, 2.0] {
            let q = quad(|x| x.powi(s as i32) * (-3.0 * x).exp(), 0.0, t);
            let v = integral.eval(t);
            assert!(
                (v - q).abs() <= 1e-12 * q.abs().max(1e-3),
                "s={s} t={t}: {v} vs {q}"
            );
        }
    }
}

#[test]
fn finite_difference_derivative() {
    let step = 1e-4;
    for r in 1..=6usize {
        for t in [0.5, 1.0, 2.0] {
            let d = (density_time(r, t + step).unwrap() - density_time(r, t - step).unwrap())
                / (2.0 * step);
            let expected = h(r as u64 - 1, t);
            assert!(
                (d - expected).abs() < 1e-6,
                "r={r} t={t}: {d} vs {expected}"
            );
        }
    }
}

// e^x as an exact rational partial sum; the omitted tail is below
// x^(n+1)/(n+1)! / (1 - x/(n+2)).
fn exp_series(x: i64, terms: u32) -> BigRational {
    let x = BigRational::from_integer(x.into());
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    for k in 1..=terms {
        term = term * &x / BigRational::from_integer(k.into());
        sum += &term;
    }
    sum
}

#[test]
fn poisson_pmf_matches_exact_rational() {
    // 50^100 / 100! / e^50
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for k in 1..=100 {
        num *= 50;
        den *= k;
    }
    let exact = BigRational::new(num, den) / exp_series(50, 400);
    let exact = exact.to_f64().unwrap();
    let got = poisson_pmf(100, 50.0).unwrap();
    assert!(((got - exact) / exact).abs() < 1e-14, "{got} vs {exact}");
}

// Far in the tail the exponent is large and its rounding error is
// amplified, hence the looser bound.
#[test]
fn poisson_pmf_small_arguments_exact() {
    for k in 0..=30u64 {
        for x in [1i64, 3, 7] {
            let mut num = BigInt::one();
            let mut den = BigInt::one();
            for j in 1..=k {
                num *= x;
                den *= j;
            }
            let exact = (BigRational::new(num, den) / exp_series(x, 200))
                .to_f64()
                .unwrap();
            let got = poisson_pmf(k, x as f64).unwrap();
            let rel = ((got - exact) / exact).abs();
            assert!(rel < 1e-13, "k={k} x={x}: {got:e} vs {exact:e}");
        }
    }
}
