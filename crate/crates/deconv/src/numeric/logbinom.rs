//! Log-space binomial coefficients and exact binomial tail sums.
//!
//! Binomial coefficients overflow `f64` long before the lengths treated
//! here (n = 300 gives central coefficients near 10^88 and partial sums
//! near 2^300), so all coefficient arithmetic happens on logarithms of
//! factorials, and probability sums accumulate the exponentiated terms
//! with compensated summation.

use super::CompensatedSum;

/// Table of `ln(k!)` for `k = 0..=n`, built by prefix summation of
/// `ln(k)`. For the lengths used here (n <= a few thousand) the
/// accumulated rounding stays far below the 1e-12 relative tolerance the
/// callers rely on.
#[derive(Clone, Debug)]
pub struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub fn up_to(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        let mut acc = CompensatedSum::new();
        table.push(0.0);
        for k in 1..=n {
            acc.add((k as f64).ln());
            table.push(acc.value());
        }
        Self { table }
    }

    pub fn ln_factorial(&self, k: usize) -> f64 {
        self.table[k]
    }

    /// `ln C(n, k)`; requires `k <= n <=` the table size.
    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        debug_assert!(k <= n);
        self.table[n] - self.table[k] - self.table[n - k]
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Exact upper tail `P(Binomial(n, r) >= m)` for integer `m`, summed
/// term by term in log space. `m <= 0` is the certain event and `m > n`
/// the impossible one.
pub fn binomial_upper_tail(n: usize, r: f64, m: i64) -> f64 {
    assert!((0.0..=1.0).contains(&r), "binomial rate must lie in [0,1]");
    if m <= 0 {
        return 1.0;
    }
    let m = m as usize;
    if m > n {
        return 0.0;
    }
    if r == 0.0 {
        return 0.0; // m >= 1 cannot happen with rate 0
    }
    if r == 1.0 {
        return 1.0; // all n trials succeed and m <= n
    }
    let lf = LnFactorials::up_to(n);
    let (ln_r, ln_1r) = (r.ln(), (1.0 - r).ln());
    let mut acc = CompensatedSum::new();
    for i in m..=n {
        let ln_term = lf.ln_choose(n, i) + i as f64 * ln_r + (n - i) as f64 * ln_1r;
        acc.add(ln_term.exp());
    }
    acc.value().min(1.0)
}
