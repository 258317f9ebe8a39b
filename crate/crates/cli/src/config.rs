//! Experiment configs. Every struct rejects unknown keys, and `prepare` runs all
//! parameter validation before any grid is built.

use std::path::PathBuf;

use htcp_core::asymptotics::{TailWindow, Tolerances};
use htcp_core::checks::{build_check, Check};
use htcp_core::compound::{CompoundSeries, SeriesParams, SERIES};
use htcp_core::kernel::BACKENDS;
use htcp_core::{FamilySpec, GridSpec, Result};
use schemars::JsonSchema;
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Compound(CompoundConfig),
    Verify(VerifyConfig),
    Walk(WalkConfig),
    Simulate(SimulateConfig),
}

/// Compound density `sum_n w_n f^{n⊗}` on a grid starting at 0.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CompoundConfig {
    pub family: FamilySpec,
    pub grid: GridSpec,
    pub params: CompoundParams,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CompoundParams {
    /// One of `poisson`, `negative_binomial`, `logarithmic`, `geometric`.
    pub series: String,
    pub lambda: f64,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    /// Residual series weight at which summation stops.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// `fft` or `direct`.
    #[serde(default = "default_backend")]
    pub backend: String,
}

/// One named tail check on a window.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub family: FamilySpec,
    pub grid: GridSpec,
    pub check: String,
    /// Check-specific; see `htcp schema --check <name>`.
    #[serde(default)]
    pub params: Value,
    pub window: TailWindow,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub output_dir: Option<PathBuf>,
}

/// Supremum law of the walk whose steps follow `family`.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    pub family: FamilySpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub params: WalkParams,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WalkParams {
    #[serde(default = "default_depth")]
    pub spitzer_depth: usize,
    /// Also build the law from a known ascending ladder-height density.
    pub ladder: Option<LadderParams>,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            spitzer_depth: default_depth(),
            ladder: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LadderParams {
    pub f_plus: FamilySpec,
    /// `P(M > 0)`, in (0, 1).
    pub lambda_rw: f64,
}

/// Monte Carlo supremum of the walk whose steps follow `family`.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub family: FamilySpec,
    pub grid: GridSpec,
    pub params: SimulateParams,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub paths: u64,
    /// Stop once `S_n < -barrier`; defaults to `40 sqrt(x_max |E X|)`.
    pub barrier: Option<f64>,
    /// Overridden by `--seed`.
    #[serde(default)]
    pub seed: u64,
    /// When set, compare with the Spitzer-route law and fail if the
    /// Kolmogorov distance exceeds this.
    pub compare_tolerance: Option<f64>,
    #[serde(default = "default_depth")]
    pub spitzer_depth: usize,
}

fn one() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    1e-12
}

fn default_backend() -> String {
    "fft".into()
}

fn default_depth() -> usize {
    200
}

impl ExperimentConfig {
    pub fn command(&self) -> &'static str {
        match self {
            ExperimentConfig::Compound(_) => "compound",
            ExperimentConfig::Verify(_) => "verify",
            ExperimentConfig::Walk(_) => "walk",
            ExperimentConfig::Simulate(_) => "simulate",
        }
    }

    pub fn output_dir(&self) -> Option<&PathBuf> {
        match self {
            ExperimentConfig::Compound(c) => c.output_dir.as_ref(),
            ExperimentConfig::Verify(c) => c.output_dir.as_ref(),
            ExperimentConfig::Walk(c) => c.output_dir.as_ref(),
            ExperimentConfig::Simulate(c) => c.output_dir.as_ref(),
        }
    }

    /// Validates everything that can be checked without computing.
    pub fn prepare(self) -> Result<Prepared> {
        match self {
            ExperimentConfig::Compound(c) => {
                c.family.validate()?;
                c.grid.validate()?;
                BACKENDS.get(&c.params.backend)?;
                let p = &c.params;
                let series = (SERIES.get(&p.series)?)(&SeriesParams {
                    lambda: p.lambda,
                    alpha: p.alpha,
                    t: p.t,
                })?;
                Ok(Prepared::Compound(c, series))
            }
            ExperimentConfig::Verify(c) => {
                c.family.validate()?;
                c.grid.validate()?;
                c.window.validate()?;
                validate_tolerances(&c.tolerances)?;
                let check = build_check(&c.check, &c.params)?;
                Ok(Prepared::Verify(c, check))
            }
            ExperimentConfig::Walk(c) => {
                c.family.validate()?;
                c.grid.validate()?;
                if c.params.spitzer_depth == 0 {
                    return Err(invalid("spitzer_depth must be at least 1"));
                }
                if let Some(l) = &c.params.ladder {
                    l.f_plus.validate()?;
                    if !(l.lambda_rw > 0.0 && l.lambda_rw < 1.0) {
                        return Err(invalid("ladder lambda_rw must lie in (0, 1)"));
                    }
                }
                Ok(Prepared::Walk(c))
            }
            ExperimentConfig::Simulate(c) => {
                c.family.validate()?;
                c.grid.validate()?;
                let p = &c.params;
                if p.paths == 0 {
                    return Err(invalid("paths must be at least 1"));
                }
                if p.barrier.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
                    return Err(invalid("barrier must be positive"));
                }
                if p.compare_tolerance.is_some_and(|t| !(t > 0.0)) {
                    return Err(invalid("compare_tolerance must be positive"));
                }
                if p.spitzer_depth == 0 {
                    return Err(invalid("spitzer_depth must be at least 1"));
                }
                Ok(Prepared::Simulate(c))
            }
        }
    }
}

fn validate_tolerances(t: &Tolerances) -> Result<()> {
    let bands = [t.long_tail, t.subexponential, t.theorem, t.sstar, t.supremum, t.trend_slack];
    if bands.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
        return Err(invalid("tolerances must be finite and nonnegative"));
    }
    if !(t.denominator_floor >= 0.0) || !(0.0..=1.0).contains(&t.max_excluded) {
        return Err(invalid(
            "denominator_floor must be nonnegative and max_excluded in [0, 1]",
        ));
    }
    Ok(())
}

fn invalid(msg: &str) -> htcp_core::Error {
    htcp_core::Error::InvalidParameter(msg.into())
}

/// A validated config with its registry lookups resolved.
pub enum Prepared {
    Compound(CompoundConfig, Box<dyn CompoundSeries>),
    Verify(VerifyConfig, Box<dyn Check>),
    Walk(WalkConfig),
    Simulate(SimulateConfig),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> serde_json::Result<ExperimentConfig> {
        serde_json::from_str(text)
    }

    #[test]
    fn tagged_commands_parse() {
        let c = parse(
            r#"{"command": "verify", "family": {"kind": "pareto_lomax", "alpha": 2.5},
                "grid": {"step": 0.05, "n_cells": 100}, "check": "theorem11",
                "params": {"lambda": 1.0}, "window": {"x_lo": 1.0, "x_hi": 4.0}}"#,
        )
        .unwrap();
        assert_eq!(c.command(), "verify");
        assert!(c.prepare().is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        let extra_top = r#"{"command": "walk", "family": {"kind": "exponential", "rate": 1.0},
            "grid": {"step": 0.1, "n_cells": 10}, "colour": 1}"#;
        assert!(parse(extra_top).is_err());
        let extra_grid = r#"{"command": "walk", "family": {"kind": "exponential", "rate": 1.0},
            "grid": {"step": 0.1, "n_cells": 10, "cells": 3}}"#;
        assert!(parse(extra_grid).is_err());
        let extra_params = r#"{"command": "compound", "family": {"kind": "exponential", "rate": 1.0},
            "grid": {"step": 0.1, "n_cells": 10}, "params": {"series": "poisson", "lambda": 1, "mu": 2}}"#;
        assert!(parse(extra_params).is_err());
        assert!(parse(r#"{"command": "plot"}"#).is_err());
    }

    #[test]
    fn registry_names_checked_before_computing() {
        let bad_series = parse(
            r#"{"command": "compound", "family": {"kind": "exponential", "rate": 1.0},
                "grid": {"step": 0.1, "n_cells": 10}, "params": {"series": "binomial", "lambda": 1}}"#,
        )
        .unwrap();
        assert_eq!(bad_series.prepare().err().unwrap().code(), "unknown_name");
        let bad_check = parse(
            r#"{"command": "verify", "family": {"kind": "exponential", "rate": 1.0},
                "grid": {"step": 0.1, "n_cells": 10}, "check": "theorem11", "params": {"lambda": -1},
                "window": {"x_lo": 1.0, "x_hi": 4.0}}"#,
        )
        .unwrap();
        assert_eq!(bad_check.prepare().err().unwrap().code(), "invalid_parameter");
    }
}
