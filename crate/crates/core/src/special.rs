//! Log-domain special functions: binomial coefficients and log-sum-exp.

use crate::error::{domain, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(m!)` for `m <= 15`, from exactly representable factorials.
fn ln_factorial_small(m: u64) -> f64 {
    debug_assert!(m <= 15);
    let f: f64 = (2..=m).map(|i| i as f64).product();
    f.ln()
}

/// Stirling remainder `ln(m!) - (m ln m - m + ln sqrt(2 pi m))` for `m >= 1`.
fn stirling_remainder(m: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let x = m as f64;
    if m <= 15 {
        ln_factorial_small(m) - (x * x.ln() - x + LN_SQRT_2PI + 0.5 * x.ln())
    } else {
        let xx = x * x;
        (S0 - (S1 - (S2 - (S3 - S4 / xx) / xx) / xx) / xx) / x
    }
}

/// Natural log of the binomial coefficient `C(n, k)`.
///
/// Small arguments use exact factorials. Otherwise the coefficient is
/// assembled from Stirling's series with an explicit remainder, so that no
/// two large log-gamma values are subtracted. Relative error stays at a few
/// ulps well beyond `n = 10^6`.
pub fn log_binomial_coeff(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(domain(format!("binomial coefficient C({n}, {k}) needs k <= n")));
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(0.0);
    }
    if n <= 15 {
        return Ok(ln_factorial_small(n) - ln_factorial_small(k) - ln_factorial_small(n - k));
    }
    let m = n - k;
    let (nf, kf, mf) = (n as f64, k as f64, m as f64);
    // k ln(n/k) + m ln(n/m), both terms nonnegative
    let main = kf * (nf / kf).ln() - mf * (-kf / nf).ln_1p();
    let prefactor = 0.5 * (nf / (kf * mf)).ln() - LN_SQRT_2PI;
    Ok(main + prefactor + stirling_remainder(n) - stirling_remainder(k) - stirling_remainder(m))
}

/// `ln(sum(exp(v)))` over `values`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }

    /// `1 - value`, evaluated without first rounding `value` to a double.
    pub(crate) fn complement_of_one(&self) -> f64 {
        (1.0 - self.sum) - self.carry
    }
}
