//! The `verify`, `sweep` and `selftest` subcommands.

use std::io::Write;

use infoest::battery::{self, BatteryConfig, CRITERIA};
use infoest::oracle::divergence_at;
use infoest::{
    divergence_derivative, theorem_rhs, verify_lemma, verify_theorem, Channel, DiscretePrior,
    Exec, IdentityReport, PointComparison, ToleranceSpec,
};
use serde::Serialize;

use crate::config::{AnyChannel, OutputFormat, Run};
use crate::error::CliError;

macro_rules! with_channel {
    ($any:expr, $ch:ident => $body:expr) => {
        match $any {
            AnyChannel::Binomial($ch) => $body,
            AnyChannel::NegBinomial($ch) => $body,
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub label: String,
    pub param: f64,
    pub at: f64,
    pub analytic: f64,
    pub oracle: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub pass: bool,
}

pub const VERIFY_HEADER: &str = "label,param,at,analytic,oracle,abs_err,rel_err,pass";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub divergence: f64,
    pub analytic_rhs: f64,
    pub fd_derivative: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

pub const SWEEP_HEADER: &str = "param,divergence,analytic_rhs,fd_derivative,abs_err,rel_err";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn reports_for<C: Channel>(
    p: &DiscretePrior,
    q: &DiscretePrior,
    ch: &C,
    tol: &ToleranceSpec,
    eps: f64,
) -> infoest::Result<[IdentityReport; 3]> {
    let mut lemma_p = verify_lemma(p, ch, tol, eps)?;
    lemma_p.label.push_str("/p");
    let mut lemma_q = verify_lemma(q, ch, tol, eps)?;
    lemma_q.label.push_str("/q");
    Ok([lemma_p, lemma_q, verify_theorem(p, q, ch, tol, eps)?])
}

/// Lemma checks for both priors and the theorem check, at every parameter.
pub fn verify_rows(run: &Run) -> Result<Vec<VerifyRow>, CliError> {
    let cfg = &run.config;
    let per_param = Exec::default().map_slice(&run.channels, |any| {
        with_channel!(any, ch => reports_for(&run.p_prior, &run.q_prior, ch, &cfg.tolerance, cfg.epsilon))
            .map_err(|e| (any.param(), e))
    });
    let mut rows = Vec::new();
    for reports in per_param {
        let reports = reports.map_err(|(param, e)| at_param(param, e))?;
        let param = reports[2].per_point[0].at;
        for rep in &reports {
            for p in &rep.per_point {
                rows.push(VerifyRow {
                    label: rep.label.clone(),
                    param,
                    at: p.at,
                    analytic: p.analytic,
                    oracle: p.oracle,
                    abs_err: p.abs_err,
                    rel_err: p.rel_err,
                    pass: cfg.tolerance.accepts(p.abs_err, p.rel_err),
                });
            }
        }
    }
    Ok(rows)
}

fn at_param(param: f64, e: infoest::Error) -> CliError {
    CliError::Domain(infoest::Error::Probe { at: param, source: Box::new(e) })
}

fn sweep_row<C: Channel>(
    p: &DiscretePrior,
    q: &DiscretePrior,
    ch: &C,
    tol: &ToleranceSpec,
    eps: f64,
) -> infoest::Result<SweepRow> {
    let divergence = divergence_at(p, q, ch, eps)?;
    let analytic_rhs = theorem_rhs(p, q, ch, eps)?.value;
    let fd_derivative = divergence_derivative(p, q, ch, tol, eps)?;
    let cmp = PointComparison::new(ch.param(), analytic_rhs, fd_derivative);
    Ok(SweepRow {
        param: ch.param(),
        divergence,
        analytic_rhs,
        fd_derivative,
        abs_err: cmp.abs_err,
        rel_err: cmp.rel_err,
    })
}

/// Divergence, analytic derivative and difference derivative over the grid.
pub fn sweep_rows(run: &Run) -> Result<Vec<SweepRow>, CliError> {
    let cfg = &run.config;
    Exec::default()
        .map_slice(&run.channels, |any| {
            with_channel!(any, ch => sweep_row(&run.p_prior, &run.q_prior, ch, &cfg.tolerance, cfg.epsilon))
                .map_err(|e| at_param(any.param(), e))
        })
        .into_iter()
        .collect()
}

pub fn write_verify(out: &mut dyn Write, rows: &[VerifyRow], format: OutputFormat) -> std::io::Result<()> {
    match format {
        OutputFormat::Json => write_json(out, rows),
        OutputFormat::Csv => {
            writeln!(out, "{VERIFY_HEADER}")?;
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.label,
                    num(r.param),
                    num(r.at),
                    num(r.analytic),
                    num(r.oracle),
                    num(r.abs_err),
                    num(r.rel_err),
                    r.pass
                )?;
            }
            Ok(())
        }
    }
}

pub fn write_sweep(out: &mut dyn Write, rows: &[SweepRow], format: OutputFormat) -> std::io::Result<()> {
    match format {
        OutputFormat::Json => write_json(out, rows),
        OutputFormat::Csv => {
            writeln!(out, "{SWEEP_HEADER}")?;
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    num(r.param),
                    num(r.divergence),
                    num(r.analytic_rhs),
                    num(r.fd_derivative),
                    num(r.abs_err),
                    num(r.rel_err)
                )?;
            }
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, rows)?;
    writeln!(out)
}

#[derive(Debug, Clone, Copy)]
pub struct SelftestOptions {
    pub seed: u64,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
}

/// Runs the battery, writing one line per criterion to `out` and timings to
/// `log`. Returns the ids of failing criteria.
pub fn selftest(
    opts: SelftestOptions,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<Vec<u8>, CliError> {
    let mut cfg = BatteryConfig { seed: opts.seed, ..BatteryConfig::default() };
    if let Some(rel) = opts.rel_tol {
        if !(rel > 0.0 && rel.is_finite()) {
            return Err(CliError::config("rel-tol", format!("{rel} must be positive and finite")));
        }
        cfg = cfg.with_rel_tol(rel);
    }
    if let Some(abs) = opts.abs_tol {
        if !(abs > 0.0 && abs.is_finite()) {
            return Err(CliError::config("abs-tol", format!("{abs} must be positive and finite")));
        }
        cfg = cfg.with_abs_tol(abs);
    }
    let mut failed = Vec::new();
    for &(id, _) in &CRITERIA {
        let outcome = battery::run_criterion(id, &cfg);
        writeln!(out, "{outcome}")?;
        match outcome.time_limit {
            Some(limit) => writeln!(log, "criterion {id}: {:.3?} (limit {limit:?})", outcome.elapsed)?,
            None => writeln!(log, "criterion {id}: {:.3?}", outcome.elapsed)?,
        }
        if !outcome.pass {
            failed.push(id);
        }
    }
    writeln!(out, "{}/{} criteria passed (seed {})", CRITERIA.len() - failed.len(), CRITERIA.len(), opts.seed)?;
    Ok(failed)
}
