//! Scalar helpers shared by the field, measure and quadrature code: exact and
//! log-domain binomial coefficients, compensated accumulation and a weighted
//! exponential sum that never exponentiates a positive argument on its own.

use crate::error::{Error, Result};

/// Largest `n` for which [`binomial_exact`] is guaranteed to succeed.
pub const MAX_EXACT_BINOMIAL_N: u64 = 60;

/// Exact binomial coefficient `C(n, k)`.
///
/// Uses the multiplicative recurrence `C(n, j) = C(n, j-1) (n-j+1) / j`, whose
/// intermediate values are `j C(n, j)` and therefore stay far inside `u128` for
/// every `n <= 60`. Larger `n` work until the checked arithmetic overflows.
pub fn binomial_exact(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Err(Error::domain("k", format!("k = {k} lies outside [0, {n}]")));
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 1..=k as u128 {
        acc = acc
            .checked_mul(n as u128 - j + 1)
            .map(|v| v / j)
            .ok_or_else(|| Error::domain("n", format!("C({n}, {k}) overflows 128-bit arithmetic")))?;
    }
    Ok(acc)
}

/// Natural logarithm of `C(n, k)`.
///
/// Rounds the exact integer once when it is available; otherwise sums
/// `ln((n-k+j)/j)` over the shorter side with compensation.
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::domain("k", format!("k = {k} lies outside [0, {n}]")));
    }
    if let Ok(exact) = binomial_exact(n, k) {
        return Ok((exact as f64).ln());
    }
    let k = k.min(n - k);
    let mut acc = NeumaierSum::new();
    for j in 1..=k {
        acc.add(((n - k + j) as f64 / j as f64).ln());
    }
    Ok(acc.total())
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// `Σ cᵢ·exp(eᵢ)` evaluated as `exp(m)·Σ cᵢ·exp(eᵢ − m)` with `m = max eᵢ`.
///
/// No scaled exponential exceeds `exp(0)`. The final rescaling goes through the
/// log domain, so a representable result is returned even when `exp(m)` alone
/// would overflow. Terms with a zero coefficient are skipped.
pub fn stable_weighted_exp_sum(terms: &[(f64, f64)]) -> f64 {
    let max_exponent = terms
        .iter()
        .filter(|(c, _)| *c != 0.0)
        .map(|&(_, e)| e)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_exponent == f64::NEG_INFINITY {
        return 0.0;
    }
    let scaled: NeumaierSum = terms
        .iter()
        .filter(|(c, _)| *c != 0.0)
        .map(|&(c, e)| c * (e - max_exponent).exp())
        .collect();
    let s = scaled.total();
    if s == 0.0 {
        return 0.0;
    }
    if max_exponent.abs() < 700.0 {
        s * max_exponent.exp()
    } else {
        s.signum() * (max_exponent + s.abs().ln()).exp()
    }
}
