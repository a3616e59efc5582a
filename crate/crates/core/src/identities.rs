//! Analytic sides of the pmf recursion and of the divergence-derivative
//! identities, with drivers that hold them against the difference oracle.
//!
//! For either family, with scaling parameter `s` (`a` or `b`):
//!
//! ```text
//! d/ds P_Y(y)          = (y P_Y(y) - (y+1) P_Y(y+1)) / s
//! d/ds D(P_Y || Q_Y)   = sum_y P_Y(y) (y / s) g(T(y))
//! ```
//!
//! where `T(y)` compares the shifted conditional means under the true and
//! the mismatched prior: `(E_P[X|y] - a) / (E_Q[X|y] - a)` for the binomial
//! channel and `(E_P[X|y] + b) / (E_Q[X|y] + b)` for the negative binomial one.

use serde::{Deserialize, Serialize};

use crate::channel::{BinomialChannel, Channel, NegBinomialChannel};
use crate::divergence::g;
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::oracle::{central_diff, divergence_on_range, DiffConfig};
use crate::pmf::{mixture_log_mass, OutputPMF, DEFAULT_TRUNCATION, MAX_REPRESENTED};
use crate::posterior::posterior_mean;
use crate::prior::DiscretePrior;
use crate::special::CompensatedSum;

/// Pass policy of a verification run and the difference-oracle settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub fd_step_scale: f64,
    pub richardson_levels: u32,
}

impl ToleranceSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, fd_step_scale: f64, richardson_levels: u32) -> Result<Self> {
        let tol = Self { abs_tol, rel_tol, fd_step_scale, richardson_levels };
        tol.validate()?;
        Ok(tol)
    }

    /// Pmf recursion checks: `rel 1e-6`, `abs 1e-10`.
    pub fn lemma_default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-6, fd_step_scale: 1e-4, richardson_levels: 3 }
    }

    /// Divergence derivative checks: `rel 1e-5`, `abs 1e-9`.
    pub fn theorem_default() -> Self {
        Self { abs_tol: 1e-9, rel_tol: 1e-5, fd_step_scale: 1e-4, richardson_levels: 3 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("abs_tol", self.abs_tol),
            ("rel_tol", self.rel_tol),
            ("fd_step_scale", self.fd_step_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("tolerance {name} = {v} must be positive")));
            }
        }
        if !(1..=4).contains(&self.richardson_levels) {
            return Err(domain(format!(
                "richardson_levels = {} must lie in 1..=4",
                self.richardson_levels
            )));
        }
        Ok(())
    }

    /// Either error bound suffices.
    pub fn accepts(&self, abs_err: f64, rel_err: f64) -> bool {
        abs_err <= self.abs_tol || rel_err <= self.rel_tol
    }

    fn diff_config(&self, cap: f64) -> Result<DiffConfig> {
        DiffConfig::new(self.fd_step_scale, self.richardson_levels, None)?.with_domain_cap(cap)
    }
}

/// One analytic/oracle pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointComparison {
    /// Outcome `y` for pmf checks, scaling parameter for divergence checks.
    pub at: f64,
    pub analytic: f64,
    pub oracle: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

impl PointComparison {
    pub fn new(at: f64, analytic: f64, oracle: f64) -> Self {
        let abs_err = (analytic - oracle).abs();
        let rel_err = if abs_err == 0.0 {
            0.0
        } else if oracle == 0.0 {
            f64::INFINITY
        } else {
            abs_err / oracle.abs()
        };
        Self { at, analytic, oracle, abs_err, rel_err }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub label: String,
    pub per_point: Vec<PointComparison>,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn new(label: impl Into<String>, per_point: Vec<PointComparison>, tol: &ToleranceSpec) -> Self {
        let max_abs_error = per_point.iter().map(|p| p.abs_err).fold(0.0, f64::max);
        let max_rel_error = per_point.iter().map(|p| p.rel_err).fold(0.0, f64::max);
        let pass = per_point.iter().all(|p| tol.accepts(p.abs_err, p.rel_err));
        Self {
            label: label.into(),
            per_point,
            max_abs_error,
            max_rel_error,
            abs_tol: tol.abs_tol,
            rel_tol: tol.rel_tol,
            pass,
        }
    }

    /// Points that fail the tolerance policy.
    pub fn failures(&self) -> impl Iterator<Item = &PointComparison> {
        self.per_point
            .iter()
            .filter(|p| !(p.abs_err <= self.abs_tol || p.rel_err <= self.rel_tol))
    }
}

/// `(y P(y) - (y+1) P(y+1)) / param` for each represented `y`, with `P` taken
/// as zero past `y_max`.
pub fn lemma_recursion_rhs(pmf: &OutputPMF, param: f64) -> Result<Vec<f64>> {
    if !(param > 0.0 && param.is_finite()) {
        return Err(domain(format!("scaling parameter {param} must be positive")));
    }
    Ok((0..=pmf.y_max())
        .map(|y| {
            let here = y as f64 * pmf.mass(y);
            let next = (y + 1) as f64 * pmf.mass(y + 1);
            (here - next) / param
        })
        .collect())
}

/// `T(y)` for either family.
pub fn mismatch_ratio<C: Channel>(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &C,
    y: u64,
) -> Result<f64> {
    if y < 1 {
        return Err(domain("mismatch ratio is defined for y >= 1"));
    }
    let matched = ch.shift_estimate(posterior_mean(p_prior, ch, y)?);
    let mismatched = ch.shift_estimate(posterior_mean(q_prior, ch, y)?);
    Ok(matched / mismatched)
}

/// `(E_P[X|y] - a) / (E_Q[X|y] - a)`.
pub fn mismatch_ratio_binomial(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &BinomialChannel,
    y: u64,
) -> Result<f64> {
    mismatch_ratio(p_prior, q_prior, ch, y)
}

/// `(E_P[X|y] + b) / (E_Q[X|y] + b)`.
pub fn mismatch_ratio_negbinomial(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &NegBinomialChannel,
    y: u64,
) -> Result<f64> {
    mismatch_ratio(p_prior, q_prior, ch, y)
}

/// Value of the derivative expectation, with the truncation it used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremSum {
    pub value: f64,
    /// Last outcome included in the sum.
    pub y_max: u64,
    /// Upper bound on the discarded terms; zero for the binomial channel.
    pub residual_bound: f64,
}

/// `sum_{y >= 1} P_Y(y) (y / s) g(T(y))`.
///
/// The sum runs at least over the `P`-side output range for budget `eps`
/// and then continues until the bound on the discarded terms is at most
/// `eps` times the accumulated value. The bound combines the channel's
/// geometric tail bound with the largest `g(T)` allowed by the supports:
/// `T(y)` always lies between `shift(min P)/shift(max Q)` and
/// `shift(max P)/shift(min Q)`. If every term seen so far is exactly zero
/// the plain `eps` range is used.
pub fn theorem_rhs<C: Channel>(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &C,
    eps: f64,
) -> Result<TheoremSum> {
    ch.check_prior(p_prior)?;
    ch.check_prior(q_prior)?;
    let p = ch.output_pmf(p_prior, eps)?;
    let s = ch.param();
    let lo = ch.shift_estimate(p_prior.min_support()) / ch.shift_estimate(q_prior.max_support());
    let hi = ch.shift_estimate(p_prior.max_support()) / ch.shift_estimate(q_prior.min_support());
    let g_sup = g(lo)?.max(g(hi)?);
    let mass_at = |y: u64| -> Result<f64> {
        if y <= p.y_max() {
            Ok(p.mass(y))
        } else if ch.max_outcome().is_some_and(|n| y > n) {
            Ok(0.0)
        } else {
            Ok(mixture_log_mass(p_prior, ch, y)?.exp())
        }
    };

    let mut acc = CompensatedSum::default();
    let mut g_seen: f64 = 0.0;
    let mut y = 0;
    let mut mass = mass_at(0)?;
    loop {
        let next = mass_at(y + 1)?;
        if y >= 1 && mass > 0.0 {
            let discrepancy = g(mismatch_ratio(p_prior, q_prior, ch, y)?)?;
            g_seen = g_seen.max(discrepancy);
            acc.add(mass * (y as f64 / s) * discrepancy);
        }
        if y >= p.y_max() {
            let residual_bound = ch.tail_moment_bound(p_prior, y, next) * g_sup / s;
            if residual_bound <= eps * acc.value() || g_seen == 0.0 {
                return Ok(TheoremSum { value: acc.value().max(0.0), y_max: y, residual_bound });
            }
        }
        y += 1;
        if y >= MAX_REPRESENTED {
            return Err(Error::Truncation { eps, limit: MAX_REPRESENTED });
        }
        mass = next;
    }
}

pub fn theorem_rhs_binomial(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &BinomialChannel,
) -> Result<f64> {
    Ok(theorem_rhs(p_prior, q_prior, ch, DEFAULT_TRUNCATION)?.value)
}

pub fn theorem_rhs_negbinomial(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &NegBinomialChannel,
    eps: f64,
) -> Result<f64> {
    Ok(theorem_rhs(p_prior, q_prior, ch, eps)?.value)
}

fn probe_config<C: Channel>(ch: &C, priors: &[&DiscretePrior], tol: &ToleranceSpec) -> Result<DiffConfig> {
    tol.validate()?;
    let cap = ch.probe_cap(priors);
    if !(cap > 1e-12 * ch.param()) {
        return Err(domain(format!(
            "no admissible difference step around {} = {}: compatibility gap too small",
            match ch.family() {
                crate::channel::Family::Binomial => "a",
                crate::channel::Family::NegBinomial => "b",
            },
            ch.param()
        )));
    }
    tol.diff_config(cap)
}

/// Pmf recursion against central differences of each output mass.
pub fn verify_lemma<C: Channel>(
    prior: &DiscretePrior,
    ch: &C,
    tol: &ToleranceSpec,
    eps: f64,
) -> Result<IdentityReport> {
    verify_lemma_exec(prior, ch, tol, eps, Exec::default())
}

pub fn verify_lemma_exec<C: Channel>(
    prior: &DiscretePrior,
    ch: &C,
    tol: &ToleranceSpec,
    eps: f64,
    exec: Exec,
) -> Result<IdentityReport> {
    ch.check_prior(prior)?;
    let cfg = probe_config(ch, &[prior], tol)?;
    let pmf = ch.output_pmf(prior, eps)?;
    let y_max = pmf.y_max();
    // Compare on 0..=y_max using the true P(y_max + 1) rather than the
    // zero-past-truncation convention.
    let extended = match ch.max_outcome() {
        Some(_) => pmf,
        None => ch.output_pmf_upto(prior, y_max + 1)?,
    };
    let analytic = lemma_recursion_rhs(&extended, ch.param())?;
    let s0 = ch.param();
    let points = exec.map_range(y_max as usize + 1, |y| {
        let mass = |s: f64| -> Result<f64> {
            Ok(mixture_log_mass(prior, &ch.with_param(s)?, y as u64)?.exp())
        };
        let d = central_diff(mass, s0, &cfg)?;
        Ok(PointComparison::new(y as f64, analytic[y], d.estimate))
    });
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(IdentityReport::new(format!("lemma/{}", ch.family()), points, tol))
}

/// Derivative expectation against a central difference of the divergence.
pub fn verify_theorem<C: Channel>(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &C,
    tol: &ToleranceSpec,
    eps: f64,
) -> Result<IdentityReport> {
    ch.check_prior(p_prior)?;
    ch.check_prior(q_prior)?;
    let cfg = probe_config(ch, &[p_prior, q_prior], tol)?;
    let analytic = theorem_rhs(p_prior, q_prior, ch, eps)?;
    let oracle = theorem_oracle(p_prior, q_prior, ch, eps, &cfg)?;
    let point = PointComparison::new(ch.param(), analytic.value, oracle);
    Ok(IdentityReport::new(format!("theorem/{}", ch.family()), vec![point], tol))
}

/// Central difference of the divergence on a range fixed at the base parameter.
fn theorem_oracle<C: Channel>(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &C,
    eps: f64,
    cfg: &DiffConfig,
) -> Result<f64> {
    let y_fix = match ch.max_outcome() {
        Some(n) => n,
        None => {
            let p = ch.output_pmf(p_prior, eps)?;
            let q = ch.output_pmf(q_prior, eps)?;
            p.y_max().max(q.y_max())
        }
    };
    let divergence = |s: f64| divergence_on_range(p_prior, q_prior, &ch.with_param(s)?, y_fix);
    Ok(central_diff(divergence, ch.param(), cfg)?.estimate)
}

/// Difference-oracle derivative of the divergence at the channel's parameter.
pub fn divergence_derivative<C: Channel>(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &C,
    tol: &ToleranceSpec,
    eps: f64,
) -> Result<f64> {
    let cfg = probe_config(ch, &[p_prior, q_prior], tol)?;
    theorem_oracle(p_prior, q_prior, ch, eps, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Family;
    use crate::pmf::output_pmf_binomial;

    fn two_point() -> (DiscretePrior, DiscretePrior, BinomialChannel) {
        (
            DiscretePrior::uniform(vec![2.0, 4.0]).unwrap(),
            DiscretePrior::point_mass(2.0).unwrap(),
            BinomialChannel::new(1, 1.0).unwrap(),
        )
    }

    #[test]
    fn recursion_point_mass_n1() {
        for x0 in [1.5, 2.0, 7.0] {
            let ch = BinomialChannel::new(1, 1.0).unwrap();
            let p = output_pmf_binomial(&DiscretePrior::point_mass(x0).unwrap(), &ch).unwrap();
            let r = lemma_recursion_rhs(&p, 1.0).unwrap();
            assert!((r[0] + 1.0 / x0).abs() < 1e-15);
            assert!((r[1] - 1.0 / x0).abs() < 1e-15);
        }
    }

    #[test]
    fn recursion_zero_masses() {
        let p = OutputPMF::from_masses(Family::Binomial, 2, 1.0, vec![1.0, 0.0, 0.0], 0.0).unwrap();
        let r = lemma_recursion_rhs(&p, 2.0).unwrap();
        assert_eq!(r[1], 0.0);
        assert_eq!(r[2], 0.0);
        assert!(lemma_recursion_rhs(&p, 0.0).is_err());
    }

    #[test]
    fn recursion_is_family_independent() {
        let masses = vec![0.4, 0.3, 0.2, 0.1];
        let bin = OutputPMF::from_masses(Family::Binomial, 3, 1.7, masses.clone(), 0.0).unwrap();
        let nb = OutputPMF::from_masses(Family::NegBinomial, 2, 1.7, masses, 0.0).unwrap();
        assert_eq!(lemma_recursion_rhs(&bin, 1.7).unwrap(), lemma_recursion_rhs(&nb, 1.7).unwrap());
    }

    #[test]
    fn ratio_examples() {
        let (p, q, ch) = two_point();
        assert_eq!(mismatch_ratio_binomial(&p, &p, &ch, 1).unwrap(), 1.0);
        assert_eq!(mismatch_ratio_binomial(&q, &q, &ch, 1).unwrap(), 1.0);
        let t = mismatch_ratio_binomial(&p, &q, &ch, 1).unwrap();
        assert!((t - 5.0 / 3.0).abs() < 1e-15);
        assert!(mismatch_ratio_binomial(&p, &q, &ch, 0).is_err());

        let nb = NegBinomialChannel::new(3, 1.0).unwrap();
        let p3 = DiscretePrior::point_mass(3.0).unwrap();
        let q1 = DiscretePrior::point_mass(1.0).unwrap();
        for y in [1, 4, 40] {
            assert_eq!(mismatch_ratio_negbinomial(&p3, &q1, &nb, y).unwrap(), 2.0);
        }
    }

    #[test]
    fn theorem_worked_values() {
        let (p, q, ch) = two_point();
        assert_eq!(theorem_rhs_binomial(&p, &p, &ch).unwrap(), 0.0);
        // 0.375 * g(5/3) = 0.375 * (2/3 - ln(5/3))
        let want = 0.375 * (2.0 / 3.0 - (5.0f64 / 3.0).ln());
        let got = theorem_rhs_binomial(&p, &q, &ch).unwrap();
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }

    #[test]
    fn theorem_geometric_point_masses() {
        // Y ~ geometric with success probability 1/4: E[Y] = 1/3, so RHS = g(2) / 3
        let nb = NegBinomialChannel::new(1, 1.0).unwrap();
        let p3 = DiscretePrior::point_mass(3.0).unwrap();
        let q1 = DiscretePrior::point_mass(1.0).unwrap();
        let got = theorem_rhs_negbinomial(&p3, &q1, &nb, 1e-13).unwrap();
        let want = (1.0 - 2f64.ln()) / 3.0;
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert_eq!(theorem_rhs_negbinomial(&p3, &p3, &nb, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn verify_point_mass_lemma() {
        let ch = BinomialChannel::new(1, 1.0).unwrap();
        let prior = DiscretePrior::point_mass(3.0).unwrap();
        let rep = verify_lemma(&prior, &ch, &ToleranceSpec::lemma_default(), 1e-12).unwrap();
        assert!(rep.pass);
        assert!(rep.max_abs_error < 1e-10, "{rep:?}");
        assert_eq!(rep.per_point.len(), 2);
    }

    #[test]
    fn verify_worked_theorem() {
        let (p, q, ch) = two_point();
        let rep = verify_theorem(&p, &q, &ch, &ToleranceSpec::theorem_default(), 1e-12).unwrap();
        assert!(rep.pass, "{rep:?}");
        let pt = rep.per_point[0];
        assert!((pt.oracle - 0.058_440_391_087_753_49).abs() < 1e-9);
        let matched = verify_theorem(&p, &p, &ch, &ToleranceSpec::theorem_default(), 1e-12).unwrap();
        assert_eq!(matched.per_point[0].analytic, 0.0);
        assert!(matched.pass);
    }

    #[test]
    fn verify_rejects_missing_gap() {
        let ch = BinomialChannel::new(2, 1.0).unwrap();
        let prior = DiscretePrior::point_mass(1.0 + 1e-12).unwrap();
        assert!(verify_lemma(&prior, &ch, &ToleranceSpec::lemma_default(), 1e-12).is_err());
    }

    #[test]
    fn tolerance_validation() {
        assert!(ToleranceSpec::new(0.0, 1e-6, 1e-4, 3).is_err());
        assert!(ToleranceSpec::new(1e-9, 1e-6, 1e-4, 0).is_err());
        assert!(ToleranceSpec::new(1e-9, 1e-6, 1e-4, 4).is_ok());
    }

    #[test]
    fn report_policy() {
        let tol = ToleranceSpec::theorem_default();
        let pts = vec![PointComparison::new(0.0, 0.0, 1e-12), PointComparison::new(1.0, 1.0, 1.0 + 1e-6)];
        let rep = IdentityReport::new("x", pts, &tol);
        assert!(rep.pass);
        let pts = vec![PointComparison::new(0.0, 1.0, 1.1)];
        let rep = IdentityReport::new("x", pts, &tol);
        assert!(!rep.pass);
        assert_eq!(rep.failures().count(), 1);
        assert_eq!(PointComparison::new(0.0, 0.0, 0.0).rel_err, 0.0);
        assert_eq!(PointComparison::new(0.0, 1.0, 0.0).rel_err, f64::INFINITY);
    }
}
