/// One-sided 95% critical value of the standard normal distribution.
pub const MANN_KENDALL_Z_95: f64 = 1.644_853_626_951_472_2;

/// Mann–Kendall trend statistic of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendTest {
    /// `sum_{i<j} sign(x_j - x_i)`
    pub s: i64,
    pub variance: f64,
    /// Continuity-corrected normal score.
    pub z: f64,
}

impl TrendTest {
    /// Increasing trend at the one-sided 95% level.
    pub fn increasing_at_95(&self) -> bool {
        self.z > MANN_KENDALL_Z_95
    }
}

pub fn mann_kendall(values: &[f64]) -> TrendTest {
    let n = values.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += match values[j].partial_cmp(&values[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * (t - 1.0) * (2.0 * t + 5.0);
        i = j + 1;
    }
    let nf = n as f64;
    let variance = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - ties) / 18.0;

    let z = if variance <= 0.0 {
        0.0
    } else if s > 0 {
        (s - 1) as f64 / variance.sqrt()
    } else if s < 0 {
        (s + 1) as f64 / variance.sqrt()
    } else {
        0.0
    };
    TrendTest { s, variance, z }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_series() {
        let up: Vec<f64> = (0..10).map(f64::from).collect();
        let t = mann_kendall(&up);
        assert_eq!(t.s, 45);
        assert!((t.variance - 125.0).abs() < 1e-12);
        assert!(t.increasing_at_95());
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert!(mann_kendall(&down).z < -MANN_KENDALL_Z_95);
    }

    #[test]
    fn flat_and_tied() {
        let t = mann_kendall(&[1.0; 6]);
        assert_eq!(t.s, 0);
        assert_eq!(t.z, 0.0);
        let t = mann_kendall(&[1.0, 1.0, 2.0]);
        assert_eq!(t.s, 2);
        assert!(!t.increasing_at_95());
    }
}
