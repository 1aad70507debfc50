//! One-sided Fisher exact test for positive association in a 2×2 table.

use std::sync::OnceLock;

const TABLE_SIZE: usize = 1024;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_SIZE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for i in 1..TABLE_SIZE {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`: exact summation below 1024, Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < TABLE_SIZE {
        return table()[n as usize];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `ln P(A ≥ a)` under the hypergeometric law fixed by the table margins.
pub fn ln_fisher_p(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let row = a + b;
    let col = a + c;
    let n = a + b + c + d;
    let hi = row.min(col);
    let denom = ln_choose(n, col);
    let terms: Vec<f64> = (a..=hi)
        .map(|k| ln_choose(row, k) + ln_choose(n - row, col - k) - denom)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + sum.ln()).min(0.0)
}

/// One-sided Fisher exact p-value, `P(A ≥ a)`.
pub fn fisher_p(a: u64, b: u64, c: u64, d: u64) -> f64 {
    ln_fisher_p(a, b, c, d).exp().clamp(0.0, 1.0)
}
