//! Closed-form results for the three-site system.
//!
//! Everything that does not depend on time is computed in exact big-rational
//! arithmetic; time-dependent probabilities are plain `f64`.

mod binomial;
mod density;
mod distributions;
mod limit;

pub use binomial::{binomial, binomial_row};
pub use density::{
    density_symbolic, density_time, end_density, end_density_split, height_pmf_coefficients,
    integrate_exp_poly, ExpPolyDensity, EXP_RATE,
};
pub use distributions::{
    binomial_pmf, height_pmf, max_poisson_pmf, neg_binomial_pmf, poisson_pmf, poisson_pmfs,
    poisson_tail_bound, poisson_truncation_point, DiscreteDist,
};
pub use limit::{limit_diagnostics, limit_table_csv, LimitRow, LIMIT_CSV_HEADER};

/// Exact rational with arbitrary-precision numerator and denominator, always
/// kept in lowest terms with a positive denominator.
pub type Rational = num_rational::BigRational;
