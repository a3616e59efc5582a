use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::prior::DiscretePrior;

/// Posterior weights of the support points given `Y = y`, in support order.
///
/// Weights are formed in the log domain and normalized against the largest
/// term, so no individual likelihood needs to be representable.
pub fn posterior_weights<C: Channel>(prior: &DiscretePrior, ch: &C, y: u64) -> Result<Vec<f64>> {
    ch.check_prior(prior)?;
    ch.check_outcome(y)?;
    let logs = prior
        .iter()
        .map(|(x, w)| Ok(w.ln() + ch.log_likelihood(x, y)?))
        .collect::<Result<Vec<_>>>()?;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateConditioning { y });
    }
    let mut weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

/// Conditional mean `E[X | Y = y]` under `prior`.
pub fn posterior_mean<C: Channel>(prior: &DiscretePrior, ch: &C, y: u64) -> Result<f64> {
    let weights = posterior_weights(prior, ch, y)?;
    let mean: f64 = prior.support().iter().zip(&weights).map(|(x, w)| x * w).sum();
    Ok(mean.clamp(prior.min_support(), prior.max_support()))
}

/// Conditional variance `Var[X | Y = y]` under `prior`.
pub fn posterior_variance<C: Channel>(prior: &DiscretePrior, ch: &C, y: u64) -> Result<f64> {
    let weights = posterior_weights(prior, ch, y)?;
    let mean = posterior_mean(prior, ch, y)?;
    Ok(prior.support().iter().zip(&weights).map(|(x, w)| w * (x - mean).powi(2)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{BinomialChannel, NegBinomialChannel};

    #[test]
    fn point_mass_posterior_is_constant() {
        let prior = DiscretePrior::point_mass(3.7).unwrap();
        let bin = BinomialChannel::new(5, 1.2).unwrap();
        let nb = NegBinomialChannel::new(2, 0.4).unwrap();
        for y in 0..=5 {
            assert_eq!(posterior_mean(&prior, &bin, y).unwrap(), 3.7);
            assert_eq!(posterior_mean(&prior, &nb, y * 100).unwrap(), 3.7);
        }
    }

    #[test]
    fn two_point_bayes() {
        // brute force: P(Y=1|X=2)=1/2, P(Y=1|X=4)=1/4 with equal prior weights
        let prior = DiscretePrior::uniform(vec![2.0, 4.0]).unwrap();
        let ch = BinomialChannel::new(1, 1.0).unwrap();
        let m1: f64 = (0.5 * 0.5 * 2.0 + 0.5 * 0.25 * 4.0) / (0.5 * 0.5 + 0.5 * 0.25);
        let m0: f64 = (0.5 * 0.5 * 2.0 + 0.5 * 0.75 * 4.0) / (0.5 * 0.5 + 0.5 * 0.75);
        assert!((m1 - 8.0 / 3.0).abs() < 1e-15);
        assert!((m0 - 3.2).abs() < 1e-15);
        assert!((posterior_mean(&prior, &ch, 1).unwrap() - m1).abs() < 1e-15);
        assert!((posterior_mean(&prior, &ch, 0).unwrap() - m0).abs() < 1e-15);
    }

    #[test]
    fn two_point_variance() {
        // weights 2/3, 1/3 on {2, 4} given Y = 1
        let prior = DiscretePrior::uniform(vec![2.0, 4.0]).unwrap();
        let ch = BinomialChannel::new(1, 1.0).unwrap();
        let v = posterior_variance(&prior, &ch, 1).unwrap();
        assert!((v - 8.0 / 9.0).abs() < 1e-14);
        let point = DiscretePrior::point_mass(2.0).unwrap();
        assert_eq!(posterior_variance(&point, &ch, 1).unwrap(), 0.0);
    }

    #[test]
    fn far_tail_stays_finite() {
        let prior = DiscretePrior::uniform(vec![0.5, 2.0, 9.0]).unwrap();
        let nb = NegBinomialChannel::new(3, 1.0).unwrap();
        let m = posterior_mean(&prior, &nb, 50_000).unwrap();
        assert_eq!(m, 0.5);
    }

    #[test]
    fn rejects_bad_outcome_and_prior() {
        let prior = DiscretePrior::uniform(vec![2.0, 4.0]).unwrap();
        let ch = BinomialChannel::new(1, 1.0).unwrap();
        assert!(posterior_mean(&prior, &ch, 2).is_err());
        let ch = BinomialChannel::new(1, 2.5).unwrap();
        assert!(posterior_mean(&prior, &ch, 0).is_err());
    }
}
