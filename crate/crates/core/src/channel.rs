//! Binomial and negative binomial channels from a positive input `X` to a count `Y`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::pmf::{self, OutputPMF};
use crate::prior::DiscretePrior;
use crate::special::log_binomial_coeff;

/// Minimum relative gap `(min support - a) / a` for binomial compatibility.
pub const COMPATIBILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Binomial,
    #[serde(rename = "negbinomial")]
    NegBinomial,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Binomial => "binomial",
            Family::NegBinomial => "negbinomial",
        })
    }
}

/// Operations shared by both channel families.
pub trait Channel: Copy + Send + Sync + fmt::Debug {
    fn family(&self) -> Family;

    /// Trial count `n` or failure count `r`.
    fn count(&self) -> u64;

    /// Scaling parameter `a` or `b`.
    fn param(&self) -> f64;

    /// Same channel with a different scaling parameter.
    fn with_param(&self, param: f64) -> Result<Self>;

    /// `ln P(Y = y | X = x)`.
    fn log_likelihood(&self, x: f64, y: u64) -> Result<f64>;

    /// Fails unless every support point of `prior` is admissible.
    fn check_prior(&self, prior: &DiscretePrior) -> Result<()>;

    /// Largest possible outcome, if the outcome space is finite.
    fn max_outcome(&self) -> Option<u64>;

    /// Output law of the mixture; `eps` is the truncation budget for infinite supports.
    fn output_pmf(&self, prior: &DiscretePrior, eps: f64) -> Result<OutputPMF>;

    /// Output law represented on exactly `0..=y_max`.
    fn output_pmf_upto(&self, prior: &DiscretePrior, y_max: u64) -> Result<OutputPMF>;

    /// Shifted conditional mean entering the mismatch ratio: `m - a` or `m + b`.
    fn shift_estimate(&self, mean: f64) -> f64;

    /// Largest parameter perturbation that keeps all `priors` compatible.
    fn probe_cap(&self, priors: &[&DiscretePrior]) -> f64;

    /// Upper bound on `sum_{k > y} k P_Y(k)` given `next_mass = P_Y(y + 1)`;
    /// `inf` when no bound is available yet.
    fn tail_moment_bound(&self, prior: &DiscretePrior, y: u64, next_mass: f64) -> f64;

    fn check_outcome(&self, y: u64) -> Result<()> {
        match self.max_outcome() {
            Some(n) if y > n => Err(domain(format!("outcome y = {y} exceeds n = {n}"))),
            _ => Ok(()),
        }
    }
}

/// `Y | X = x ~ Binomial(n, a / x)`, defined for `x > a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialChannel {
    n: u64,
    a: f64,
}

impl BinomialChannel {
    pub fn new(n: u64, a: f64) -> Result<Self> {
        if n < 1 {
            return Err(domain("binomial channel needs n >= 1"));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(domain(format!("binomial scaling a = {a} must be positive")));
        }
        Ok(Self { n, a })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

/// `ln[C(n,y) (a/x)^y (1 - a/x)^(n-y)]`.
pub fn binomial_loglik(ch: &BinomialChannel, x: f64, y: u64) -> Result<f64> {
    if !(x > ch.a) {
        return Err(domain(format!(
            "binomial input x = {x} must exceed a = {}; otherwise a/x leaves (0,1)",
            ch.a
        )));
    }
    if y > ch.n {
        return Err(domain(format!("outcome y = {y} exceeds n = {}", ch.n)));
    }
    let p = ch.a / x;
    let (y_f, rest) = (y as f64, (ch.n - y) as f64);
    Ok(log_binomial_coeff(ch.n, y)? + y_f * p.ln() + rest * (-p).ln_1p())
}

impl Channel for BinomialChannel {
    fn family(&self) -> Family {
        Family::Binomial
    }

    fn count(&self) -> u64 {
        self.n
    }

    fn param(&self) -> f64 {
        self.a
    }

    fn with_param(&self, param: f64) -> Result<Self> {
        Self::new(self.n, param)
    }

    fn log_likelihood(&self, x: f64, y: u64) -> Result<f64> {
        binomial_loglik(self, x, y)
    }

    fn check_prior(&self, prior: &DiscretePrior) -> Result<()> {
        let gap = prior.min_support() - self.a;
        if gap < COMPATIBILITY_MARGIN * self.a {
            return Err(domain(format!(
                "binomial channel needs min support > a with margin {COMPATIBILITY_MARGIN:e}*a: \
                 min support {} vs a = {}",
                prior.min_support(),
                self.a
            )));
        }
        Ok(())
    }

    fn max_outcome(&self) -> Option<u64> {
        Some(self.n)
    }

    fn output_pmf(&self, prior: &DiscretePrior, _eps: f64) -> Result<OutputPMF> {
        pmf::output_pmf_binomial(prior, self)
    }

    fn output_pmf_upto(&self, prior: &DiscretePrior, y_max: u64) -> Result<OutputPMF> {
        if y_max != self.n {
            return Err(domain(format!("binomial output is represented on 0..={}", self.n)));
        }
        pmf::output_pmf_binomial(prior, self)
    }

    fn shift_estimate(&self, mean: f64) -> f64 {
        mean - self.a
    }

    fn probe_cap(&self, priors: &[&DiscretePrior]) -> f64 {
        let min = priors.iter().map(|p| p.min_support()).fold(f64::INFINITY, f64::min);
        (min - self.a) / 4.0
    }

    fn tail_moment_bound(&self, _prior: &DiscretePrior, y: u64, _next_mass: f64) -> f64 {
        if y >= self.n {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `Y | X = x ~ NegBinomial(r, b / (b + x))`, defined for `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBinomialChannel {
    r: u64,
    b: f64,
}

impl NegBinomialChannel {
    pub fn new(r: u64, b: f64) -> Result<Self> {
        if r < 1 {
            return Err(domain("negative binomial channel needs r >= 1"));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(domain(format!("negative binomial scaling b = {b} must be positive")));
        }
        Ok(Self { r, b })
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `(r ln(x/(b+x)), ln(b/(b+x)))`, the per-input constants of the log-likelihood.
    pub(crate) fn log_factors(&self, x: f64) -> (f64, f64) {
        let ln_fail = -(self.b / x).ln_1p();
        let ln_succ = -(x / self.b).ln_1p();
        (self.r as f64 * ln_fail, ln_succ)
    }
}

/// `ln[C(y+r-1, y) (x/(b+x))^r (b/(b+x))^y]`.
pub fn negbinomial_loglik(ch: &NegBinomialChannel, x: f64, y: u64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(domain(format!("negative binomial input x = {x} must be positive")));
    }
    let (head, ln_succ) = ch.log_factors(x);
    Ok(log_binomial_coeff(y + ch.r - 1, y)? + head + y as f64 * ln_succ)
}

impl Channel for NegBinomialChannel {
    fn family(&self) -> Family {
        Family::NegBinomial
    }

    fn count(&self) -> u64 {
        self.r
    }

    fn param(&self) -> f64 {
        self.b
    }

    fn with_param(&self, param: f64) -> Result<Self> {
        Self::new(self.r, param)
    }

    fn log_likelihood(&self, x: f64, y: u64) -> Result<f64> {
        negbinomial_loglik(self, x, y)
    }

    fn check_prior(&self, prior: &DiscretePrior) -> Result<()> {
        if !(prior.min_support() > 0.0) {
            return Err(domain(format!(
                "negative binomial channel needs min support > 0, got {}",
                prior.min_support()
            )));
        }
        Ok(())
    }

    fn max_outcome(&self) -> Option<u64> {
        None
    }

    fn output_pmf(&self, prior: &DiscretePrior, eps: f64) -> Result<OutputPMF> {
        pmf::output_pmf_negbinomial(prior, self, eps)
    }

    fn output_pmf_upto(&self, prior: &DiscretePrior, y_max: u64) -> Result<OutputPMF> {
        pmf::output_pmf_negbinomial_upto(prior, self, y_max)
    }

    fn shift_estimate(&self, mean: f64) -> f64 {
        mean + self.b
    }

    fn probe_cap(&self, _priors: &[&DiscretePrior]) -> f64 {
        self.b / 4.0
    }

    // P(k+1)/P(k) = q (k+r)/(k+1) decreases in k, so past y every component
    // is dominated by a geometric series with ratio q (y+1+r)/(y+2).
    fn tail_moment_bound(&self, prior: &DiscretePrior, y: u64, next_mass: f64) -> f64 {
        if next_mass == 0.0 {
            return 0.0;
        }
        let q = self.b / (self.b + prior.min_support());
        let yf = y as f64;
        let rho = q * (yf + 1.0 + self.r as f64) / (yf + 2.0);
        if rho >= 1.0 {
            return f64::INFINITY;
        }
        let gap = 1.0 - rho;
        next_mass * ((yf + 1.0) / gap + rho / (gap * gap))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14 * b.abs().max(1.0)
    }

    #[test]
    fn binomial_examples() {
        let ch = BinomialChannel::new(1, 1.0).unwrap();
        assert!(close(binomial_loglik(&ch, 2.0, 0).unwrap(), 0.5f64.ln()));
        let ch = BinomialChannel::new(2, 1.0).unwrap();
        assert!(close(binomial_loglik(&ch, 2.0, 1).unwrap(), 0.5f64.ln()));
        let ch = BinomialChannel::new(3, 1.0).unwrap();
        // 3 * 0.25^2 * 0.75
        let direct: f64 = 3.0 * 0.25f64.powi(2) * 0.75;
        assert_eq!(direct, 0.140625);
        assert!(close(binomial_loglik(&ch, 4.0, 2).unwrap(), direct.ln()));
    }

    #[test]
    fn binomial_normalizes() {
        let ch = BinomialChannel::new(37, 0.7).unwrap();
        let total: f64 = (0..=37).map(|y| binomial_loglik(&ch, 3.3, y).unwrap().exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_domain_errors() {
        let ch = BinomialChannel::new(3, 1.0).unwrap();
        assert!(binomial_loglik(&ch, 1.0, 0).is_err());
        assert!(binomial_loglik(&ch, 0.5, 0).is_err());
        assert!(binomial_loglik(&ch, 2.0, 4).is_err());
        assert!(BinomialChannel::new(0, 1.0).is_err());
        assert!(BinomialChannel::new(1, 0.0).is_err());
        assert!(BinomialChannel::new(1, f64::NAN).is_err());
    }

    #[test]
    fn negbinomial_examples() {
        let ch = NegBinomialChannel::new(1, 1.0).unwrap();
        assert!(close(negbinomial_loglik(&ch, 1.0, 0).unwrap(), 0.5f64.ln()));
        assert!(close(negbinomial_loglik(&ch, 1.0, 3).unwrap(), 0.0625f64.ln()));
        let ch = NegBinomialChannel::new(2, 2.0).unwrap();
        let direct: f64 = 2.0 * 0.5f64.powi(2) * 0.5;
        assert!(close(negbinomial_loglik(&ch, 2.0, 1).unwrap(), direct.ln()));
    }

    #[test]
    fn negbinomial_normalizes_by_truncated_sum() {
        let ch = NegBinomialChannel::new(4, 1.5).unwrap();
        let total: f64 = (0..2000).map(|y| negbinomial_loglik(&ch, 0.8, y).unwrap().exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negbinomial_domain_errors() {
        let ch = NegBinomialChannel::new(1, 1.0).unwrap();
        assert!(negbinomial_loglik(&ch, 0.0, 0).is_err());
        assert!(negbinomial_loglik(&ch, -1.0, 0).is_err());
        assert!(NegBinomialChannel::new(0, 1.0).is_err());
        assert!(NegBinomialChannel::new(1, -1.0).is_err());
    }

    #[test]
    fn compatibility_margin() {
        let ch = BinomialChannel::new(2, 1.0).unwrap();
        let ok = DiscretePrior::point_mass(1.0 + 2e-9).unwrap();
        let tight = DiscretePrior::point_mass(1.0 + 1e-10).unwrap();
        let below = DiscretePrior::point_mass(0.5).unwrap();
        assert!(ch.check_prior(&ok).is_ok());
        assert!(ch.check_prior(&tight).is_err());
        assert!(ch.check_prior(&below).is_err());
        let nb = NegBinomialChannel::new(2, 1.0).unwrap();
        assert!(nb.check_prior(&below).is_ok());
    }

    #[test]
    fn negbinomial_tail_bound_dominates() {
        let ch = NegBinomialChannel::new(3, 2.0).unwrap();
        let prior = DiscretePrior::new(vec![0.5, 4.0], vec![0.4, 0.6]).unwrap();
        let mass = |y: u64| -> f64 {
            prior.iter().map(|(x, w)| w * negbinomial_loglik(&ch, x, y).unwrap().exp()).sum()
        };
        for y in [5u64, 20, 40, 80] {
            let exact: f64 = (y + 1..4000).map(|k| k as f64 * mass(k)).sum();
            let bound = ch.tail_moment_bound(&prior, y, mass(y + 1));
            assert!(bound >= exact, "y={y}: {bound} < {exact}");
            if bound.is_finite() {
                assert!(bound < 50.0 * exact, "y={y}: bound {bound} too loose for {exact}");
            }
        }
        let bin = BinomialChannel::new(4, 1.0).unwrap();
        assert_eq!(bin.tail_moment_bound(&prior, 4, 0.0), 0.0);
    }
}
