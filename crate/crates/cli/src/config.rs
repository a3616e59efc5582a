//! Run configuration: a TOML file plus command-line overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use infoest::{
    BinomialChannel, Channel, DiscretePrior, Family, NegBinomialChannel, ToleranceSpec,
    DEFAULT_TRUNCATION,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Prior weights within this distance of 1 are renormalized; others are rejected.
pub const WEIGHT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

pub fn parse_family(s: &str) -> Result<Family, String> {
    match s {
        "binomial" => Ok(Family::Binomial),
        "negbinomial" => Ok(Family::NegBinomial),
        other => Err(format!("unknown family `{other}` (expected binomial or negbinomial)")),
    }
}

/// Support and weights as written in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PriorSpec {
    fn build(&self, field: &str) -> Result<DiscretePrior, CliError> {
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SLACK {
            return Err(CliError::config(
                format!("{field}.weights"),
                format!("weights sum to {total}, which is not within {WEIGHT_SLACK:e} of 1"),
            ));
        }
        DiscretePrior::normalized(self.support.clone(), self.weights.clone())
            .map_err(|e| CliError::config(field, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: Family,
    /// Binomial trial count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Negative binomial failure count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u64>,
    /// Single scaling parameter (a or b) for `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    /// Scaling-parameter grid for `sweep` (and `verify` when `param` is absent).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub format: OutputFormat,
    /// Seed for any randomized step; the identity checks themselves are deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "ToleranceSpec::theorem_default")]
    pub tolerance: ToleranceSpec,
    pub p_prior: PriorSpec,
    pub q_prior: PriorSpec,
}

fn default_epsilon() -> f64 {
    DEFAULT_TRUNCATION
}

/// Flag values that replace fields of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub family: Option<Family>,
    pub grid: Option<Vec<f64>>,
    pub format: Option<OutputFormat>,
    pub seed: Option<u64>,
}

/// Channel of either family at a given scaling parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnyChannel {
    Binomial(BinomialChannel),
    NegBinomial(NegBinomialChannel),
}

/// A validated run.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub p_prior: DiscretePrior,
    pub q_prior: DiscretePrior,
    pub channels: Vec<AnyChannel>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(f) = o.family {
            self.family = f;
        }
        if let Some(g) = &o.grid {
            self.grid = g.clone();
            self.param = None;
        }
        if let Some(f) = o.format {
            self.format = f;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    /// Scaling parameters to run at: `param` if given, otherwise the grid.
    pub fn params(&self) -> Vec<f64> {
        match self.param {
            Some(p) => vec![p],
            None => self.grid.clone(),
        }
    }

    fn grid_field(&self) -> &'static str {
        if self.param.is_some() {
            "param"
        } else {
            "grid"
        }
    }

    /// Checks every field and builds the domain objects.
    pub fn validate(self) -> Result<Run, CliError> {
        self.tolerance.validate().map_err(|e| CliError::config("tolerance", e.to_string()))?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(CliError::config("epsilon", format!("{} must lie in (0, 1)", self.epsilon)));
        }
        let p_prior = self.p_prior.build("p_prior")?;
        let q_prior = self.q_prior.build("q_prior")?;
        let count = match self.family {
            Family::Binomial => {
                if self.r.is_some() {
                    return Err(CliError::config("r", "binomial runs take `n`, not `r`"));
                }
                self.n.ok_or_else(|| CliError::config("n", "binomial runs need a trial count `n`"))?
            }
            Family::NegBinomial => {
                if self.n.is_some() {
                    return Err(CliError::config("n", "negative binomial runs take `r`, not `n`"));
                }
                self.r.ok_or_else(|| {
                    CliError::config("r", "negative binomial runs need a failure count `r`")
                })?
            }
        };
        let params = self.params();
        let field = self.grid_field();
        if params.is_empty() {
            return Err(CliError::config("param", "give a scaling parameter `param` or a `grid`"));
        }
        let mut channels = Vec::with_capacity(params.len());
        for &s in &params {
            let ch = match self.family {
                Family::Binomial => BinomialChannel::new(count, s).map(AnyChannel::Binomial),
                Family::NegBinomial => NegBinomialChannel::new(count, s).map(AnyChannel::NegBinomial),
            }
            .map_err(|e| CliError::config(field, e.to_string()))?;
            for (name, prior) in [("p_prior", &p_prior), ("q_prior", &q_prior)] {
                ch.check_prior(prior)
                    .map_err(|e| CliError::config(field, format!("{s} is incompatible with {name}: {e}")))?;
            }
            channels.push(ch);
        }
        Ok(Run { config: self, p_prior, q_prior, channels })
    }
}

impl AnyChannel {
    pub fn param(&self) -> f64 {
        match self {
            Self::Binomial(c) => c.param(),
            Self::NegBinomial(c) => c.param(),
        }
    }

    pub fn check_prior(&self, prior: &DiscretePrior) -> infoest::Result<()> {
        match self {
            Self::Binomial(c) => c.check_prior(prior),
            Self::NegBinomial(c) => c.check_prior(prior),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED: &str = r#"
family = "binomial"
n = 1
param = 1.0
format = "json"
seed = 17

[p_prior]
support = [2.0, 4.0]
weights = [0.5, 0.5]

[q_prior]
support = [2.0]
weights = [1.0]
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = RunConfig::from_toml(WORKED).unwrap();
        assert_eq!(cfg.family, Family::Binomial);
        assert_eq!(cfg.format, OutputFormat::Json);
        assert_eq!(cfg.epsilon, DEFAULT_TRUNCATION);
        assert_eq!(cfg.tolerance, ToleranceSpec::theorem_default());
        let run = cfg.validate().unwrap();
        assert_eq!(run.channels.len(), 1);
        assert_eq!(run.p_prior.mean(), 3.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::from_toml(WORKED).unwrap();
        cfg.grid = vec![0.5, 1.0, 1.5];
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = RunConfig::from_toml("family = \"binomial\"\nn = \"one\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        let err = RunConfig::from_toml(&WORKED.replace("seed", "sede")).unwrap_err();
        assert!(err.to_string().contains("sede"), "{err}");
    }

    #[test]
    fn weights_near_one_are_normalized() {
        let text = WORKED.replace("weights = [0.5, 0.5]", "weights = [0.5, 0.5000004]");
        let run = RunConfig::from_toml(&text).unwrap().validate().unwrap();
        let total: f64 = run.p_prior.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        let text = WORKED.replace("weights = [0.5, 0.5]", "weights = [0.5, 0.6]");
        let err = RunConfig::from_toml(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("p_prior.weights"), "{err}");
    }

    #[test]
    fn incompatible_param_names_constraint() {
        let text = WORKED.replace("param = 1.0", "param = 3.0");
        let err = RunConfig::from_toml(&text).unwrap().validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("param") && msg.contains("min support"), "{msg}");
    }

    #[test]
    fn family_needs_matching_count() {
        let mut cfg = RunConfig::from_toml(WORKED).unwrap();
        cfg.apply(&Overrides { family: Some(Family::NegBinomial), ..Overrides::default() });
        assert!(cfg.clone().validate().unwrap_err().to_string().contains("`r`"));
        cfg.n = None;
        cfg.r = Some(2);
        assert!(cfg.validate().is_ok());
    }
}
