//! Output laws `P_Y(y) = E[P(y | X)]` of a channel driven by a discrete prior.

use serde::Serialize;

use crate::channel::{BinomialChannel, Channel, Family, NegBinomialChannel};
use crate::error::{domain, Error, Result};
use crate::prior::DiscretePrior;
use crate::special::{log_binomial_coeff, log_sum_exp, CompensatedSum};

/// Tolerance on `sum(masses) + tail_mass = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Default negative binomial truncation budget.
pub const DEFAULT_TRUNCATION: f64 = 1e-12;

/// Hard cap on the number of represented negative binomial outcomes.
pub const MAX_REPRESENTED: u64 = 10_000_000;

/// An output law on `0..=y_max`, plus the probability left unrepresented beyond `y_max`.
///
/// Log masses are the primary representation; `masses` holds their
/// exponentials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputPMF {
    family: Family,
    count: u64,
    param: f64,
    log_masses: Vec<f64>,
    masses: Vec<f64>,
    tail_mass: f64,
}

impl OutputPMF {
    /// Wraps explicit masses, e.g. for hand-built laws. Zero masses are allowed here.
    pub fn from_masses(
        family: Family,
        count: u64,
        param: f64,
        masses: Vec<f64>,
        tail_mass: f64,
    ) -> Result<Self> {
        if masses.is_empty() {
            return Err(domain("output pmf needs at least one mass"));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(domain(format!("output mass {m} is not a probability")));
        }
        if !(tail_mass.is_finite() && tail_mass >= 0.0) {
            return Err(domain(format!("tail mass {tail_mass} is not a probability")));
        }
        if family == Family::Binomial && tail_mass != 0.0 {
            return Err(domain("binomial output has no tail"));
        }
        let total: f64 = masses.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(domain(format!("output masses plus tail sum to {total}, expected 1")));
        }
        let log_masses = masses.iter().map(|m| m.ln()).collect();
        Ok(Self { family, count, param, log_masses, masses, tail_mass })
    }

    fn from_log_masses(
        family: Family,
        count: u64,
        param: f64,
        log_masses: Vec<f64>,
        tail_mass: f64,
    ) -> Self {
        let masses = log_masses.iter().map(|l| l.exp()).collect();
        Self { family, count, param, log_masses, masses, tail_mass }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// `n` or `r` of the generating channel.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// `a` or `b` of the generating channel.
    pub fn param(&self) -> f64 {
        self.param
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn log_masses(&self) -> &[f64] {
        &self.log_masses
    }

    pub fn y_max(&self) -> u64 {
        self.masses.len() as u64 - 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `P(y)`, zero beyond the represented range.
    pub fn mass(&self, y: u64) -> f64 {
        self.masses.get(y as usize).copied().unwrap_or(0.0)
    }

    pub fn log_mass(&self, y: u64) -> f64 {
        self.log_masses.get(y as usize).copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.tail_mass
    }

    /// Copy restricted to `0..=y_max`; the dropped masses move into the tail.
    pub fn truncated(&self, y_max: u64) -> Self {
        if y_max >= self.y_max() {
            return self.clone();
        }
        let keep = y_max as usize + 1;
        let mut tail = CompensatedSum::default();
        tail.add(self.tail_mass);
        self.masses[keep..].iter().for_each(|m| tail.add(*m));
        Self {
            family: self.family,
            count: self.count,
            param: self.param,
            log_masses: self.log_masses[..keep].to_vec(),
            masses: self.masses[..keep].to_vec(),
            tail_mass: tail.value(),
        }
    }

    /// True when both laws come from the same channel family and parameters.
    pub fn same_channel(&self, other: &Self) -> bool {
        self.family == other.family && self.count == other.count && self.param == other.param
    }
}

/// `ln P_Y(y)` for the mixture of `ch` over `prior`.
pub fn mixture_log_mass<C: Channel>(prior: &DiscretePrior, ch: &C, y: u64) -> Result<f64> {
    ch.check_prior(prior)?;
    ch.check_outcome(y)?;
    let terms = prior
        .iter()
        .map(|(x, w)| Ok(w.ln() + ch.log_likelihood(x, y)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_sum_exp(&terms))
}

/// Exact output law of the binomial channel on `0..=n`.
pub fn output_pmf_binomial(prior: &DiscretePrior, ch: &BinomialChannel) -> Result<OutputPMF> {
    ch.check_prior(prior)?;
    let n = ch.n();
    let per_point: Vec<(f64, f64, f64)> = prior
        .iter()
        .map(|(x, w)| {
            let p = ch.a() / x;
            (w.ln(), p.ln(), (-p).ln_1p())
        })
        .collect();
    let mut terms = vec![0.0; per_point.len()];
    let mut log_masses = Vec::with_capacity(n as usize + 1);
    for y in 0..=n {
        let coeff = log_binomial_coeff(n, y)?;
        let (yf, rest) = (y as f64, (n - y) as f64);
        for (t, (lw, lp, lq)) in terms.iter_mut().zip(&per_point) {
            *t = lw + coeff + yf * lp + rest * lq;
        }
        log_masses.push(log_sum_exp(&terms));
    }
    Ok(OutputPMF::from_log_masses(Family::Binomial, n, ch.a(), log_masses, 0.0))
}

struct NegBinomialMixture {
    r: u64,
    per_point: Vec<(f64, f64)>,
    terms: Vec<f64>,
}

impl NegBinomialMixture {
    fn new(prior: &DiscretePrior, ch: &NegBinomialChannel) -> Result<Self> {
        ch.check_prior(prior)?;
        let per_point: Vec<(f64, f64)> = prior
            .iter()
            .map(|(x, w)| {
                let (head, ln_succ) = ch.log_factors(x);
                (w.ln() + head, ln_succ)
            })
            .collect();
        let terms = vec![0.0; per_point.len()];
        Ok(Self { r: ch.r(), per_point, terms })
    }

    fn log_mass(&mut self, y: u64) -> Result<f64> {
        let coeff = log_binomial_coeff(y + self.r - 1, y)?;
        let yf = y as f64;
        for (t, (head, ls)) in self.terms.iter_mut().zip(&self.per_point) {
            *t = coeff + head + yf * ls;
        }
        Ok(log_sum_exp(&self.terms))
    }
}

/// Negative binomial output law truncated at the smallest `y_max` whose
/// cumulative mass reaches `1 - eps`.
pub fn output_pmf_negbinomial(
    prior: &DiscretePrior,
    ch: &NegBinomialChannel,
    eps: f64,
) -> Result<OutputPMF> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("truncation budget {eps} must lie in (0, 1)")));
    }
    let mut mixture = NegBinomialMixture::new(prior, ch)?;
    let mut cumulative = CompensatedSum::default();
    let mut log_masses = Vec::new();
    for y in 0..MAX_REPRESENTED {
        let lm = mixture.log_mass(y)?;
        log_masses.push(lm);
        cumulative.add(lm.exp());
        let tail = cumulative.complement_of_one();
        if tail <= eps {
            return Ok(OutputPMF::from_log_masses(
                Family::NegBinomial,
                ch.r(),
                ch.b(),
                log_masses,
                tail.max(0.0),
            ));
        }
    }
    Err(Error::Truncation { eps, limit: MAX_REPRESENTED })
}

/// Negative binomial output law represented on exactly `0..=y_max`.
pub fn output_pmf_negbinomial_upto(
    prior: &DiscretePrior,
    ch: &NegBinomialChannel,
    y_max: u64,
) -> Result<OutputPMF> {
    if y_max >= MAX_REPRESENTED {
        return Err(domain(format!("cannot represent {y_max} outcomes")));
    }
    let mut mixture = NegBinomialMixture::new(prior, ch)?;
    let mut cumulative = CompensatedSum::default();
    let mut log_masses = Vec::with_capacity(y_max as usize + 1);
    for y in 0..=y_max {
        let lm = mixture.log_mass(y)?;
        log_masses.push(lm);
        cumulative.add(lm.exp());
    }
    let tail = cumulative.complement_of_one().max(0.0);
    Ok(OutputPMF::from_log_masses(Family::NegBinomial, ch.r(), ch.b(), log_masses, tail))
}
