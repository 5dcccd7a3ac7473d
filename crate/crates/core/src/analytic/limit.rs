use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};

use super::density::{end_density, end_density_split, is_strictly_between_zero_and_half};
use super::Rational;
use crate::error::{Error, Result};
use crate::fmt::sig;

/// One layer of the end-density table.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub layer: usize,
    pub end_density: Rational,
    pub term1: Rational,
    pub term2: Rational,
}

impl LimitRow {
    pub fn value(&self) -> f64 {
        self.end_density.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact `1/2 - end_density`.
    pub fn gap(&self) -> Rational {
        Rational::new(BigInt::one(), BigInt::from(2)) - &self.end_density
    }

    /// The end-density written over `3^(2r - 1)`, without reducing.
    pub fn over_power_of_three(&self) -> String {
        let denom = num_traits::pow(BigInt::from(3), 2 * self.layer - 1);
        let numer = self.end_density.numer() * (&denom / self.end_density.denom());
        format!("{numer}/{denom}")
    }
}

/// End-densities, gaps to one half and the two-term split for layers
/// `1..=r_max`.
///
/// Fails with [`Error::Invariant`] if the split does not add up, if the
/// sequence is not strictly increasing, or if a value leaves `(0, 1/2)`.
pub fn limit_diagnostics(r_max: usize) -> Result<Vec<LimitRow>> {
    if r_max == 0 {
        return Err(Error::input("r_max must be at least 1"));
    }
    let mut rows: Vec<LimitRow> = Vec::with_capacity(r_max);
    for layer in 1..=r_max {
        let end_density = end_density(layer)?;
        let (term1, term2) = end_density_split(layer)?;
        if &term1 + &term2 != end_density {
            return Err(Error::Invariant(format!(
                "split terms do not add up to the end-density at layer {layer}"
            )));
        }
        if !is_strictly_between_zero_and_half(&end_density) {
            return Err(Error::Invariant(format!(
                "end-density {end_density} at layer {layer} is outside (0, 1/2)"
            )));
        }
        if let Some(prev) = rows.last() {
            if end_density <= prev.end_density {
                return Err(Error::Invariant(format!(
                    "end-density does not increase from layer {} to {layer}",
                    prev.layer
                )));
            }
        }
        rows.push(LimitRow {
            layer,
            end_density,
            term1,
            term2,
        });
    }
    Ok(rows)
}

pub const LIMIT_CSV_HEADER: &str =
    "r,exact_fraction,decimal,gap_to_half,term1,term2,fraction_over_3pow";

/// CSV rendering of [`limit_diagnostics`] rows, header included. Decimals
/// carry 10 significant digits.
pub fn limit_table_csv(rows: &[LimitRow]) -> String {
    let mut out = String::from(LIMIT_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let f = |x: &Rational| sig(x.to_f64().unwrap_or(f64::NAN), 10);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.layer,
            row.end_density,
            f(&row.end_density),
            f(&row.gap()),
            f(&row.term1),
            f(&row.term2),
            row.over_power_of_three(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let rows = limit_diagnostics(10).unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(sig(rows[1].value(), 4), "0.4074");
        assert_eq!(sig(rows[9].value(), 4), "0.4671");
        assert_eq!(rows[5].over_power_of_three(), "80811/177147");
        assert_eq!(rows[5].end_density.to_string(), "2993/6561");
        assert_eq!(rows[0].over_power_of_three(), "1/3");
    }

    #[test]
    fn csv_layout() {
        let csv = limit_table_csv(&limit_diagnostics(2).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], LIMIT_CSV_HEADER);
        assert_eq!(
            lines[1],
            "1,1/3,0.3333333333,0.1666666667,0.3333333333,0,1/3"
        );
        assert!(lines[2].starts_with("2,11/27,0.4074074074,"));
    }

    #[test]
    fn hundredth_layer_is_closer_to_half() {
        let rows = limit_diagnostics(100).unwrap();
        assert!(rows[99].gap() < rows[9].gap());
        assert!(rows[99].term1 < rows[9].term1);
    }

    #[test]
    fn zero_layers_rejected() {
        assert!(limit_diagnostics(0).is_err());
    }
}
