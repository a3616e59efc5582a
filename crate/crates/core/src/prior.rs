use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Weight-sum tolerance accepted by [`DiscretePrior::new`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A finite input law: strictly increasing support with positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior", into = "RawPrior")]
pub struct DiscretePrior {
    support: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPrior {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawPrior> for DiscretePrior {
    type Error = crate::Error;

    fn try_from(raw: RawPrior) -> Result<Self> {
        DiscretePrior::new(raw.support, raw.weights)
    }
}

impl From<DiscretePrior> for RawPrior {
    fn from(p: DiscretePrior) -> Self {
        RawPrior { support: p.support, weights: p.weights }
    }
}

impl DiscretePrior {
    /// Builds a prior whose weights already sum to one within [`WEIGHT_SUM_TOL`].
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::validate_shape(&support, &weights)?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(domain(format!("prior weights sum to {total}, expected 1")));
        }
        Ok(Self { support, weights })
    }

    /// Builds a prior from positive weights of any total, dividing by the sum.
    pub fn normalized(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::validate_shape(&support, &weights)?;
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { support, weights })
    }

    /// Unit mass at `x`.
    pub fn point_mass(x: f64) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    /// Equal weights on `support`.
    pub fn uniform(support: Vec<f64>) -> Result<Self> {
        let w = vec![1.0; support.len()];
        Self::normalized(support, w)
    }

    fn validate_shape(support: &[f64], weights: &[f64]) -> Result<()> {
        if support.is_empty() {
            return Err(domain("prior support must be nonempty"));
        }
        if support.len() != weights.len() {
            return Err(domain(format!(
                "prior has {} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if let Some(x) = support.iter().find(|x| !x.is_finite()) {
            return Err(domain(format!("prior support value {x} is not finite")));
        }
        if let Some(w) = support.windows(2).find(|w| w[0] >= w[1]) {
            return Err(domain(format!(
                "prior support must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(domain(format!("prior weight {w} is not strictly positive")));
        }
        Ok(())
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_support(&self) -> f64 {
        self.support[0]
    }

    pub fn max_support(&self) -> f64 {
        self.support[self.support.len() - 1]
    }

    /// `(x_i, w_i)` pairs in support order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }

    /// Prior mean `E[X]`.
    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, w)| x * w).sum()
    }

    /// Same weights with every support point multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(domain(format!("scale factor {c} must be positive")));
        }
        Self::new(self.support.iter().map(|x| x * c).collect(), self.weights.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_valid() {
        let p = DiscretePrior::new(vec![2.0, 4.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.mean(), 3.0);
        assert_eq!(p.min_support(), 2.0);
        assert_eq!(p.max_support(), 4.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DiscretePrior::new(vec![], vec![]).is_err());
        assert!(DiscretePrior::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(DiscretePrior::new(vec![2.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(DiscretePrior::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(DiscretePrior::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(DiscretePrior::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(DiscretePrior::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn normalizes() {
        let p = DiscretePrior::normalized(vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.weights(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn serde_validates() {
        let err = serde_json::from_str::<DiscretePrior>(r#"{"support":[2,1],"weights":[0.5,0.5]}"#);
        assert!(err.is_err());
    }
}
