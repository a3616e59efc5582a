use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Step policy for [`central_diff`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffConfig {
    base_step: f64,
    richardson_levels: u32,
    domain_cap: Option<f64>,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self { base_step: 1e-4, richardson_levels: 3, domain_cap: None }
    }
}

impl DiffConfig {
    /// `base_step` is relative to `|x0|`; `domain_cap` bounds the absolute step.
    pub fn new(base_step: f64, richardson_levels: u32, domain_cap: Option<f64>) -> Result<Self> {
        if !(base_step > 0.0 && base_step <= 0.1) {
            return Err(domain(format!("difference step {base_step} must lie in (0, 0.1]")));
        }
        if !(1..=4).contains(&richardson_levels) {
            return Err(domain(format!(
                "richardson levels {richardson_levels} must lie in 1..=4"
            )));
        }
        if let Some(cap) = domain_cap {
            if !(cap > 0.0) {
                return Err(domain(format!("difference step cap {cap} must be positive")));
            }
        }
        Ok(Self { base_step, richardson_levels, domain_cap })
    }

    pub fn base_step(&self) -> f64 {
        self.base_step
    }

    pub fn richardson_levels(&self) -> u32 {
        self.richardson_levels
    }

    pub fn domain_cap(&self) -> Option<f64> {
        self.domain_cap
    }

    pub fn with_domain_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(domain(format!("difference step cap {cap} must be positive")));
        }
        self.domain_cap = Some(cap);
        Ok(self)
    }

    /// Largest absolute step used around `x0`.
    pub fn largest_step(&self, x0: f64) -> f64 {
        let h = if x0 == 0.0 { self.base_step } else { self.base_step * x0.abs() };
        match self.domain_cap {
            Some(cap) => h.min(cap),
            None => h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffEstimate {
    pub estimate: f64,
    pub error_estimate: f64,
}

/// Central difference of `f` at `x0`, refined by Richardson extrapolation.
///
/// Level `k` halves the step `k - 1` times and eliminates the even error
/// terms `h^2 .. h^(2k-2)`. The error estimate is the size of the last
/// extrapolation increment (for a single level, the change when the step is
/// halved once, scaled by 1/3).
pub fn central_diff<F>(f: F, x0: f64, cfg: &DiffConfig) -> Result<DiffEstimate>
where
    F: Fn(f64) -> Result<f64>,
{
    let h0 = cfg.largest_step(x0);
    if !(h0 > 0.0 && h0.is_finite()) || x0 + h0 == x0 {
        return Err(domain(format!("no usable difference step at x0 = {x0}")));
    }
    let eval = |x: f64| f(x).map_err(|e| Error::Probe { at: x, source: Box::new(e) });
    let difference = |h: f64| -> Result<f64> {
        let (hi, lo) = (x0 + h, x0 - h);
        Ok((eval(hi)? - eval(lo)?) / (hi - lo))
    };

    let levels = cfg.richardson_levels as usize;
    let rows = levels.max(2);
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(rows);
    let mut h = h0;
    for i in 0..rows {
        let mut row = vec![difference(h)?];
        for j in 1..=i.min(levels - 1) {
            let factor = 4f64.powi(j as i32);
            let prev = row[j - 1];
            row.push(prev + (prev - table[i - 1][j - 1]) / (factor - 1.0));
        }
        table.push(row);
        h /= 2.0;
    }

    if levels == 1 {
        let coarse = table[0][0];
        let fine = table[1][0];
        return Ok(DiffEstimate { estimate: coarse, error_estimate: (fine - coarse).abs() / 3.0 });
    }
    let last = &table[levels - 1];
    let estimate = last[levels - 1];
    Ok(DiffEstimate { estimate, error_estimate: (estimate - last[levels - 2]).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let d = central_diff(|x| Ok(x * x), 3.0, &DiffConfig::default()).unwrap();
        assert!((d.estimate - 6.0).abs() < 1e-10);
        for levels in 1..=4 {
            let cfg = DiffConfig::new(0.1, levels, None).unwrap();
            let d = central_diff(|x| Ok(x * x), 3.0, &cfg).unwrap();
            assert!((d.estimate - 6.0).abs() < 1e-13, "levels {levels}: {}", d.estimate);
        }
    }

    #[test]
    fn log_two_levels() {
        let cfg = DiffConfig::new(1e-4, 2, None).unwrap();
        let d = central_diff(|x: f64| Ok(x.ln()), 2.0, &cfg).unwrap();
        assert!((d.estimate - 0.5).abs() < 1e-10);
        assert!(d.error_estimate < 1e-8);
    }

    #[test]
    fn default_accuracy_on_battery() {
        type Case = (fn(f64) -> f64, fn(f64) -> f64, f64);
        let cases: [Case; 4] = [
            (|x| x.ln(), |x| 1.0 / x, 0.7),
            (|x| x.exp(), |x| x.exp(), 1.3),
            (|x| x.powi(5) - 3.0 * x, |x| 5.0 * x.powi(4) - 3.0, 2.0),
            (|x| (2.0 * x).sin(), |x| 2.0 * (2.0 * x).cos(), 0.4),
        ];
        for (f, df, x0) in cases {
            let d = central_diff(|x| Ok(f(x)), x0, &DiffConfig::default()).unwrap();
            let want = df(x0);
            assert!(((d.estimate - want) / want).abs() < 1e-9, "x0={x0}: {} vs {want}", d.estimate);
        }
    }

    #[test]
    fn domain_cap_limits_step() {
        let cfg = DiffConfig::default().with_domain_cap(1e-6).unwrap();
        assert_eq!(cfg.largest_step(10.0), 1e-6);
        // ln is undefined below zero; a capped step keeps the probe inside
        let d = central_diff(|x: f64| if x > 0.0 { Ok(x.ln()) } else { Err(domain("neg")) }, 1e-5, &cfg);
        assert!(d.is_ok());
    }

    #[test]
    fn probe_errors_propagate() {
        let cfg = DiffConfig::new(0.1, 2, None).unwrap();
        let r = central_diff(|x| if x < 1.0 { Err(domain("below one")) } else { Ok(x) }, 1.05, &cfg);
        match r {
            Err(Error::Probe { at, .. }) => assert!(at < 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(DiffConfig::new(0.0, 3, None).is_err());
        assert!(DiffConfig::new(0.2, 3, None).is_err());
        assert!(DiffConfig::new(1e-3, 0, None).is_err());
        assert!(DiffConfig::new(1e-3, 5, None).is_err());
        assert!(DiffConfig::new(1e-3, 2, Some(0.0)).is_err());
    }
}
