//! Derivatives of the relative entropy between output laws of binomial and
//! negative binomial channels, expressed through matched and mismatched
//! conditional-mean estimates, together with independent numerical oracles
//! that check them.
//!
//! Binomial channel: `Y | X = x ~ Binomial(n, a/x)` for inputs `x > a`.
//! Negative binomial channel: `Y | X = x ~ NegBinomial(r, b/(b+x))` for `x > 0`.
//! Priors are finite and discrete, every probability is carried in the log
//! domain, and all entropies are in nats.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod channel;
pub mod divergence;
mod error;
pub mod exec;
pub mod identities;
pub mod oracle;
pub mod pmf;
pub mod posterior;
pub mod prior;
pub mod special;

pub use channel::{
    binomial_loglik, negbinomial_loglik, BinomialChannel, Channel, Family, NegBinomialChannel,
    COMPATIBILITY_MARGIN,
};
pub use divergence::{g, kl_divergence};
pub use error::{Error, Result};
pub use exec::Exec;
pub use identities::{
    divergence_derivative, lemma_recursion_rhs, mismatch_ratio, mismatch_ratio_binomial,
    mismatch_ratio_negbinomial, theorem_rhs, theorem_rhs_binomial, theorem_rhs_negbinomial,
    verify_lemma, verify_lemma_exec, verify_theorem, IdentityReport, PointComparison,
    TheoremSum, ToleranceSpec,
};
pub use pmf::{
    mixture_log_mass, output_pmf_binomial, output_pmf_negbinomial, output_pmf_negbinomial_upto,
    OutputPMF, DEFAULT_TRUNCATION,
};
pub use posterior::{posterior_mean, posterior_variance, posterior_weights};
pub use prior::DiscretePrior;
pub use special::{log_binomial_coeff, log_sum_exp};
