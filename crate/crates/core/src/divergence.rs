use crate::channel::Family;
use crate::error::{domain, Error, Result};
use crate::pmf::OutputPMF;
use crate::special::CompensatedSum;

/// `g(t) = t - 1 - ln t`, the discrepancy between an estimate ratio and one.
///
/// Near `t = 1` the alternating series of `d - ln(1 + d)` is summed
/// directly so that tiny discrepancies keep full relative precision.
pub fn g(t: f64) -> Result<f64> {
    if !(t > 0.0) || t.is_nan() {
        return Err(domain(format!("g(t) needs t > 0, got {t}")));
    }
    if t == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let d = t - 1.0;
    if d.abs() < 0.1 {
        // sum_{k>=2} (-1)^k d^k / k
        let mut term = d * d;
        let mut sum: f64 = 0.0;
        let mut k = 2.0;
        while term.abs() > 1e-20 * sum.abs() && k < 64.0 {
            sum += term / k;
            term *= -d;
            k += 1.0;
        }
        Ok(sum)
    } else {
        Ok(d - t.ln())
    }
}

/// Relative entropy `D(P || Q)` in nats over the common represented range.
///
/// Binomial laws must share `n`, so the ranges coincide; truncated negative
/// binomial laws are compared up to the shorter `y_max`.
pub fn kl_divergence(p: &OutputPMF, q: &OutputPMF) -> Result<f64> {
    if !p.same_channel(q) {
        return Err(domain(format!(
            "divergence needs laws from one channel: {} (count {}, param {}) vs {} (count {}, param {})",
            p.family(),
            p.count(),
            p.param(),
            q.family(),
            q.count(),
            q.param()
        )));
    }
    let upper = match p.family() {
        Family::Binomial => {
            if p.y_max() != q.y_max() {
                return Err(domain("binomial laws must cover the same outcomes"));
            }
            p.y_max()
        }
        Family::NegBinomial => p.y_max().min(q.y_max()),
    };
    let mut acc = CompensatedSum::default();
    for y in 0..=upper {
        let pm = p.mass(y);
        if pm == 0.0 {
            continue;
        }
        if q.mass(y) == 0.0 && q.log_mass(y) == f64::NEG_INFINITY {
            return Err(Error::InfiniteDivergence { y });
        }
        acc.add(pm * (p.log_mass(y) - q.log_mass(y)));
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(masses: Vec<f64>) -> OutputPMF {
        OutputPMF::from_masses(Family::Binomial, masses.len() as u64 - 1, 1.0, masses, 0.0).unwrap()
    }

    #[test]
    fn g_values() {
        assert_eq!(g(1.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((g(e).unwrap() - (e - 2.0)).abs() < 1e-15);
        assert!((g(0.5).unwrap() - (-0.5 + 2f64.ln())).abs() < 1e-15);
        assert!(g(0.0).is_err());
        assert!(g(-1.0).is_err());
        assert!(g(f64::NAN).is_err());
    }

    #[test]
    fn g_series_matches_direct_away_from_one() {
        for &t in &[0.91, 0.95, 0.99, 1.01, 1.05, 1.0999] {
            let direct = t - 1.0 - f64::ln(t);
            let s = g(t).unwrap();
            assert!(((s - direct) / direct).abs() < 1e-10, "t={t}");
        }
        // d^2/2 leading order
        let d = 1e-8;
        assert!(((g(1.0 + d).unwrap() - d * d / 2.0) / (d * d / 2.0)).abs() < 1e-7);
        assert!(g(1.0 + f64::EPSILON).unwrap() > 0.0);
    }

    #[test]
    fn kl_examples() {
        let p = law(vec![0.5, 0.5]);
        let q = law(vec![0.25, 0.75]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_divergence(&p, &q).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.143841).abs() < 1e-6);
        let qq = law(vec![0.25 + 5e-16, 0.75 - 5e-16]);
        assert!(kl_divergence(&q, &qq).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_zero_conventions() {
        let p = law(vec![0.0, 1.0]);
        let q = law(vec![0.0, 1.0]);
        assert_eq!(kl_divergence(&p, &q).unwrap(), 0.0);
        let q = law(vec![1.0, 0.0]);
        assert_eq!(kl_divergence(&p, &q), Err(Error::InfiniteDivergence { y: 1 }));
    }

    #[test]
    fn kl_family_mismatch() {
        let p = law(vec![0.5, 0.5]);
        let q = OutputPMF::from_masses(Family::NegBinomial, 1, 1.0, vec![0.5, 0.25], 0.25).unwrap();
        assert!(kl_divergence(&p, &q).is_err());
        let q = OutputPMF::from_masses(Family::Binomial, 1, 2.0, vec![0.5, 0.5], 0.0).unwrap();
        assert!(kl_divergence(&p, &q).is_err());
    }
}
