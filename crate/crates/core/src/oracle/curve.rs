use crate::channel::Channel;
use crate::divergence::kl_divergence;
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::prior::DiscretePrior;

/// `D(P_Y || Q_Y)` for the channel as given.
///
/// For an infinite outcome space both laws are represented on the longer of
/// their two `eps` ranges, so neither loses more than `eps` of its mass.
pub fn divergence_at<C: Channel>(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &C,
    eps: f64,
) -> Result<f64> {
    let p = ch.output_pmf(p_prior, eps)?;
    let q = ch.output_pmf(q_prior, eps)?;
    if ch.max_outcome().is_some() || p.y_max() == q.y_max() {
        return kl_divergence(&p, &q);
    }
    divergence_on_range(p_prior, q_prior, ch, p.y_max().max(q.y_max()))
}

/// `D(P_Y || Q_Y)` with both laws represented on exactly `0..=y_max`.
///
/// A fixed range makes the divergence a smooth function of the scaling
/// parameter, which is what a difference quotient needs.
pub fn divergence_on_range<C: Channel>(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &C,
    y_max: u64,
) -> Result<f64> {
    let p = ch.output_pmf_upto(p_prior, y_max)?;
    let q = ch.output_pmf_upto(q_prior, y_max)?;
    kl_divergence(&p, &q)
}

/// Divergence at every scaling parameter in `grid`, in grid order.
pub fn divergence_curve<C: Channel>(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &C,
    grid: &[f64],
    eps: f64,
) -> Result<Vec<(f64, f64)>> {
    divergence_curve_exec(p_prior, q_prior, ch, grid, eps, Exec::default())
}

pub fn divergence_curve_exec<C: Channel>(
    p_prior: &DiscretePrior,
    q_prior: &DiscretePrior,
    ch: &C,
    grid: &[f64],
    eps: f64,
    exec: Exec,
) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(domain("divergence curve needs at least one grid point"));
    }
    let points = exec.map_slice(grid, |&param| {
        let at = ch.with_param(param).map_err(|e| at_grid_point(param, e))?;
        for prior in [p_prior, q_prior] {
            at.check_prior(prior).map_err(|e| at_grid_point(param, e))?;
        }
        Ok((param, divergence_at(p_prior, q_prior, &at, eps)?))
    });
    points.into_iter().collect()
}

fn at_grid_point(param: f64, e: Error) -> Error {
    match e {
        Error::Domain(msg) => domain(format!("grid point {param}: {msg}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{BinomialChannel, NegBinomialChannel};

    #[test]
    fn matched_priors_vanish() {
        let p = DiscretePrior::uniform(vec![1.0, 3.0]).unwrap();
        let ch = NegBinomialChannel::new(2, 1.0).unwrap();
        let curve = divergence_curve(&p, &p, &ch, &[0.5, 1.0, 2.0], 1e-12).unwrap();
        assert!(curve.iter().all(|&(_, d)| d == 0.0));
    }

    #[test]
    fn two_point_curve_increases() {
        let p = DiscretePrior::uniform(vec![2.0, 4.0]).unwrap();
        let q = DiscretePrior::point_mass(2.0).unwrap();
        let ch = BinomialChannel::new(1, 1.0).unwrap();
        let curve = divergence_curve(&p, &q, &ch, &[0.5, 1.0, 1.5], 1e-12).unwrap();
        assert_eq!(curve.len(), 3);
        assert!(curve[0].1 < curve[1].1 && curve[1].1 < curve[2].1, "{curve:?}");
        // hand evaluation at a = 1: P = [0.625, 0.375], Q = [0.5, 0.5]
        let want = 0.625 * (0.625f64 / 0.5).ln() + 0.375 * (0.375f64 / 0.5).ln();
        assert!((curve[1].1 - want).abs() < 1e-15);
        let single = divergence_curve(&p, &q, &ch, &[1.2], 1e-12).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn grid_violation_names_value() {
        let p = DiscretePrior::uniform(vec![2.0, 4.0]).unwrap();
        let ch = BinomialChannel::new(1, 1.0).unwrap();
        let err = divergence_curve(&p, &p, &ch, &[1.0, 2.5], 1e-12).unwrap_err();
        assert!(err.to_string().contains("2.5"), "{err}");
        assert!(divergence_curve(&p, &p, &ch, &[], 1e-12).is_err());
    }
}
