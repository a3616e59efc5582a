//! Monte Carlo estimate of `E[X | Y = y]` by simulating the channel.
//!
//! Draws are split into fixed chunks of [`MC_CHUNK`] samples. Chunk `i`
//! uses a ChaCha8 generator keyed by `seed_from_u64(seed)` on stream `i`.
//! Chunks are merged in index order, so the result depends only on
//! `(seed, sample_count)` and not on the thread count or the `parallel`
//! feature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::prior::DiscretePrior;

pub const MC_CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    sample_count: u64,
    seed: u64,
}

impl McConfig {
    pub fn new(sample_count: u64, seed: u64) -> Result<Self> {
        if sample_count < 1 {
            return Err(domain("Monte Carlo needs at least one sample"));
        }
        Ok(Self { sample_count, seed })
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Number of draws with `Y = y`.
    pub hits: u64,
}

/// Inverse-CDF table for one conditional law, cut after the target outcome.
struct OutcomeTable {
    cdf: Vec<f64>,
}

impl OutcomeTable {
    fn new<C: Channel>(ch: &C, x: f64, target: u64) -> Result<Self> {
        let last = ch.max_outcome().unwrap_or(target);
        let mut cdf = Vec::with_capacity(last as usize + 1);
        let mut acc = 0.0;
        for y in 0..=last {
            acc += ch.log_likelihood(x, y)?.exp();
            cdf.push(acc);
        }
        if ch.max_outcome().is_some() {
            *cdf.last_mut().expect("nonempty") = 1.0;
        }
        Ok(Self { cdf })
    }

    /// Smallest `y` with `F(y) > u`; `None` means `Y` lies past the table.
    fn draw(&self, u: f64) -> Option<u64> {
        let idx = self.cdf.partition_point(|&c| c <= u);
        (idx < self.cdf.len()).then_some(idx as u64)
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        Moments {
            count,
            mean: self.mean + delta * nb / count as f64,
            m2: self.m2 + other.m2 + delta * delta * na * nb / count as f64,
        }
    }
}

/// Conditioned sample mean of `X` over draws with `Y = y`.
pub fn mc_posterior_mean<C: Channel>(
    prior: &DiscretePrior,
    ch: &C,
    y: u64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    mc_posterior_mean_exec(prior, ch, y, cfg, Exec::default())
}

pub fn mc_posterior_mean_exec<C: Channel>(
    prior: &DiscretePrior,
    ch: &C,
    y: u64,
    cfg: &McConfig,
    exec: Exec,
) -> Result<McEstimate> {
    ch.check_prior(prior)?;
    ch.check_outcome(y)?;
    let mut prior_cdf: Vec<f64> = prior
        .weights()
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    *prior_cdf.last_mut().expect("nonempty prior") = 1.0;
    let tables = prior
        .support()
        .iter()
        .map(|&x| OutcomeTable::new(ch, x, y))
        .collect::<Result<Vec<_>>>()?;
    let support = prior.support();

    let chunks = cfg.sample_count.div_ceil(MC_CHUNK);
    let parts = exec.map_range(chunks as usize, |chunk| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(chunk as u64);
        let start = chunk as u64 * MC_CHUNK;
        let len = MC_CHUNK.min(cfg.sample_count - start);
        let mut m = Moments::default();
        for _ in 0..len {
            let ux: f64 = rng.random();
            let uy: f64 = rng.random();
            let i = prior_cdf.partition_point(|&c| c <= ux).min(support.len() - 1);
            if tables[i].draw(uy) == Some(y) {
                m.push(support[i]);
            }
        }
        m
    });
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    if total.count == 0 {
        return Err(Error::InsufficientConditioning { y, hits: 0, samples: cfg.sample_count });
    }
    let std_error = if total.count > 1 {
        (total.m2 / (total.count - 1) as f64 / total.count as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(McEstimate { estimate: total.mean, std_error, hits: total.count })
}
