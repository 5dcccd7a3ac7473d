use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigUint;
use num_traits::One;

type Row = Arc<[BigUint]>;

fn table() -> &'static RwLock<Vec<Row>> {
    static TABLE: OnceLock<RwLock<Vec<Row>>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(Vec::new()))
}

/// Row `n` of Pascal's triangle, `C(n, 0) ..= C(n, n)`.
///
/// Rows are built with the multiplicative recurrence
/// `C(n, k + 1) = C(n, k) * (n - k) / (k + 1)` and memoized process-wide.
pub fn binomial_row(n: usize) -> Row {
    if let Some(row) = table().read().unwrap().get(n) {
        return Arc::clone(row);
    }
    let mut rows = table().write().unwrap();
    while rows.len() <= n {
        let m = rows.len();
        let mut row = Vec::with_capacity(m + 1);
        let mut c = BigUint::one();
        row.push(c.clone());
        for k in 0..m {
            c = c * BigUint::from(m - k) / BigUint::from(k + 1);
            row.push(c.clone());
        }
        rows.push(row.into());
    }
    Arc::clone(&rows[n])
}

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    binomial_row(n)[k].clone()
}
