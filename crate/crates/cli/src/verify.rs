//! Cross-checks between the exact formulas, the oracle and the simulator.

use std::fmt;

use num_traits::{ToPrimitive, Zero};
use parking_core::analytic::{
    density_symbolic, density_time, end_density, height_pmf, limit_diagnostics, Rational,
};
use parking_core::oracle::{
    choose_m_max, exact_after_m_arrivals, exact_density_poissonized, exact_height_dist,
    multinomial_height_dist,
};
use parking_core::simulator::{run, Mode, Observe, RunConfig, SiteLabel};

use crate::args::{Fault, Level};

/// Reference end-densities of layers 1 to 10.
pub const TABLE_I: [(i64, i64); 10] = [
    (1, 3),
    (11, 27),
    (35, 81),
    (971, 2187),
    (8881, 19683),
    (80811, 177147),
    (733209, 1594323),
    (6640491, 14348907),
    (60067809, 129140163),
    (542880971, 1162261467),
];

/// Displayed closed forms of layers 1 to 4: the constant, then the
/// polynomial coefficients multiplying `e^{-3t}`, lowest power first.
pub const CLOSED_FORMS: [&[(i64, i64)]; 4] = [
    &[(1, 3)],
    &[(11, 27), (11, 9), (1, 3)],
    &[(35, 81), (35, 27), (35, 18), (7, 9), (1, 12)],
    &[
        (971, 2187),
        (971, 729),
        (971, 486),
        (971, 486),
        (283, 324),
        (17, 108),
    ],
];

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub tolerance: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<20} measured {}; tolerated {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

struct Sizes {
    oracle_m: u64,
    reps: u64,
    limit_layers: usize,
}

fn sizes(level: Level) -> Sizes {
    match level {
        Level::Quick => Sizes {
            oracle_m: 8,
            reps: 100_000,
            limit_layers: 50,
        },
        Level::Full => Sizes {
            oracle_m: 12,
            reps: 1_000_000,
            limit_layers: 200,
        },
    }
}

fn q((n, d): (i64, i64)) -> Rational {
    Rational::new(n.into(), d.into())
}

fn check(name: &'static str, passed: bool, measured: String, tolerance: &str) -> Check {
    Check {
        name,
        passed,
        measured,
        tolerance: tolerance.to_string(),
    }
}

fn failed(name: &'static str, err: impl fmt::Display) -> Check {
    check(name, false, format!("error: {err}"), "no error")
}

pub fn verify(level: Level, fault: Option<Fault>) -> Report {
    let s = sizes(level);
    let checks = vec![
        table_i(fault),
        closed_forms(),
        limit_trend(s.limit_layers),
        derivative(),
        oracle_vs_analytic(level),
        height_law(s.oracle_m),
        oracle_exclusion(s.oracle_m),
        oracle_vs_simulator(s.reps),
    ];
    let mut report = Report { checks };
    report.checks.extend(simulator_vs_table(s.reps));
    report
}

fn table_i(fault: Option<Fault>) -> Check {
    let name = "table-i";
    let mut equal = 0;
    for (i, &expected) in TABLE_I.iter().enumerate() {
        let mut v = match end_density(i + 1) {
            Ok(v) => v,
            Err(e) => return failed(name, e),
        };
        if fault == Some(Fault::EndDensity) {
            v += Rational::new(1.into(), 3i64.pow(30).into());
        }
        equal += usize::from(v == q(expected));
    }
    check(
        name,
        equal == TABLE_I.len(),
        format!("{equal}/{} layers equal", TABLE_I.len()),
        "exact equality",
    )
}

fn closed_forms() -> Check {
    let name = "closed-forms";
    let mut mismatches = 0;
    for (i, coeffs) in CLOSED_FORMS.iter().enumerate() {
        let d = match density_symbolic(i + 1) {
            Ok(d) => d,
            Err(e) => return failed(name, e),
        };
        mismatches += usize::from(*d.constant() != q(coeffs[0]));
        let poly = d.poly();
        for (k, &c) in coeffs.iter().enumerate() {
            mismatches += usize::from(poly.get(k) != Some(&q(c)));
        }
    }
    check(
        name,
        mismatches == 0,
        format!("{mismatches} mismatched coefficients"),
        "exact equality",
    )
}

fn limit_trend(layers: usize) -> Check {
    let name = "limit-trend";
    match limit_diagnostics(layers) {
        Ok(rows) => {
            let term1_decreasing = rows.windows(2).all(|w| w[1].term1 < w[0].term1);
            let last = rows.last().map(|r| r.value()).unwrap_or(f64::NAN);
            check(
                name,
                term1_decreasing,
                format!("increasing below 1/2 up to layer {layers}, value there {last:.6}"),
                "strict monotonicity",
            )
        }
        Err(e) => failed(name, e),
    }
}

fn derivative() -> Check {
    let name = "derivative";
    let step = 1e-4;
    let mut worst: f64 = 0.0;
    for r in 1..=6usize {
        for t in [0.5, 1.0, 2.0] {
            let fd = match (density_time(r, t + step), density_time(r, t - step)) {
                (Ok(a), Ok(b)) => (a - b) / (2.0 * step),
                (Err(e), _) | (_, Err(e)) => return failed(name, e),
            };
            let p = height_pmf(r as u64 - 1, t).unwrap_or(f64::NAN);
            worst = worst.max((fd - p).abs());
        }
    }
    check(
        name,
        worst < 1e-6,
        format!("max deviation {worst:.3e}"),
        "1e-6",
    )
}

fn oracle_vs_analytic(level: Level) -> Check {
    let name = "oracle-analytic";
    let mut worst: f64 = 0.0;
    let mut excess: f64 = f64::NEG_INFINITY;
    for t in [0.25, 0.5, 1.0] {
        let m_max = match level {
            Level::Quick => 8,
            Level::Full => choose_m_max(3, t, 1e-13),
        };
        for r in 1..=3 {
            let p = match exact_density_poissonized(3, t, r, 1, m_max) {
                Ok(p) => p,
                Err(e) => return failed(name, e),
            };
            let d = density_time(r as usize, t).unwrap_or(f64::NAN);
            let dev = (p.value - d).abs();
            worst = worst.max(dev);
            excess = excess.max(dev - p.tail_bound - 1e-12);
        }
    }
    check(
        name,
        excess <= 0.0,
        format!("max deviation {worst:.3e}"),
        "Poisson tail bound + 1e-12",
    )
}

fn height_law(m_max: u64) -> Check {
    let name = "height-law";
    for m in 0..=m_max {
        match (exact_height_dist(m), multinomial_height_dist(m)) {
            (Ok(a), Ok(b)) if a == b => {}
            (Ok(_), Ok(_)) => {
                return check(name, false, format!("differs at m={m}"), "exact equality")
            }
            (Err(e), _) | (_, Err(e)) => return failed(name, e),
        }
    }
    check(
        name,
        true,
        format!("equal for m <= {m_max}"),
        "exact equality",
    )
}

fn oracle_exclusion(m: u64) -> Check {
    let name = "oracle-exclusion";
    let mut worst = Rational::zero();
    for n in [3usize, 4] {
        let m = if n == 4 { m.min(10) } else { m };
        let occ = match exact_after_m_arrivals(n, m) {
            Ok(o) => o,
            Err(e) => return failed(name, e),
        };
        for x in 0..n - 1 {
            for r in 1..=occ.layers() {
                worst = worst.max(occ.get(x, r) + occ.get(x + 1, r));
            }
        }
    }
    check(
        name,
        worst <= Rational::from_integer(1.into()),
        format!("max adjacent sum {worst}"),
        "at most 1",
    )
}

fn oracle_vs_simulator(reps: u64) -> Check {
    let name = "oracle-simulator";
    let m = 8;
    let occ = match exact_after_m_arrivals(3, m) {
        Ok(o) => o,
        Err(e) => return failed(name, e),
    };
    let mut cfg = RunConfig::new(3, Mode::FixedArrivals(m), reps, m as u32, 8);
    cfg.observe = Observe::Sites(vec![0, 1, 2]);
    let out = match run(&cfg) {
        Ok(o) => o,
        Err(e) => return failed(name, e),
    };
    let mut worst: f64 = 0.0;
    for x in 0..3 {
        for r in 1..=m as u32 {
            let p = occ.get(x, r).to_f64().unwrap_or(f64::NAN);
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            let est = out
                .estimate(SiteLabel::Site(x), r)
                .map_or(f64::NAN, |e| e.mean);
            let z = if se > 0.0 {
                (est - p).abs() / se
            } else if est == p {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
    }
    check(
        name,
        worst <= 4.0,
        format!("max |z| {worst:.2} over {reps} replications"),
        "4 standard errors",
    )
}

fn simulator_vs_table(reps: u64) -> Vec<Check> {
    let cfg = RunConfig::new(3, Mode::FixedArrivals(600), reps, 10, 42);
    let out = match run(&cfg) {
        Ok(o) => o,
        Err(e) => return vec![failed("simulator-table-i", e)],
    };
    let mut worst: f64 = 0.0;
    for (i, &f) in TABLE_I.iter().enumerate() {
        let exact = f.0 as f64 / f.1 as f64;
        let e = out.estimate(SiteLabel::Site(1), i as u32 + 1);
        let z = e.map_or(f64::INFINITY, |e| (e.mean - exact).abs() / e.stderr);
        worst = worst.max(z);
    }
    let violations = out.heights.map_or(u64::MAX, |h| h.identity_violations);
    vec![
        check(
            "simulator-table-i",
            worst <= 4.0,
            format!("max |z| {worst:.2} over {reps} replications"),
            "4 standard errors",
        ),
        check(
            "height-identity",
            violations == 0,
            format!("{violations} violations in {reps} replications"),
            "0",
        ),
    ]
}
