//! Named tail checks selectable from a config file.
//!
//! Each entry parses its own parameter object, rejecting unknown keys, into a
//! boxed [`Check`]. Parsing happens before any grid is built, so a bad config
//! fails fast and separately from a failed computation.

use schemars::schema::RootSchema;
use schemars::{schema_for, JsonSchema};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::asymptotics::{
    blowup_probe, corollary11_scaling, kesten_scan, local_subexp_check, long_tail_check,
    nfold_check, sstar_check, subexp_check, theorem11_ratio, theorem41_ratio, TailRatioReport,
    TailWindow, Tolerances, Verdict,
};
use crate::error::{invalid, Result};
use crate::families::FamilySpec;
use crate::grid::{AtomPlusDensity, GridDensity, GridSpec};
use crate::randomwalk::{theorem42_ratio, WalkSpec};
use crate::registry::Registry;

/// Everything a check needs besides its own parameters.
#[derive(Debug, Clone)]
pub struct CheckContext {
    pub family: FamilySpec,
    pub grid: GridSpec,
    pub window: TailWindow,
    pub tolerances: Tolerances,
}

impl CheckContext {
    fn density(&self) -> Result<GridDensity> {
        self.grid.discretize(&self.family)
    }

    fn square_integrable(&self, check: &str) -> Result<()> {
        if self.family.square_integrable() {
            Ok(())
        } else {
            Err(invalid(format!(
                "{check} needs a square-integrable density; this family is not"
            )))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub check: &'static str,
    pub passed: bool,
    pub verdicts: Vec<Verdict>,
    /// Ratio reports keyed by a file-safe label.
    #[serde(skip)]
    pub reports: Vec<(String, TailRatioReport)>,
    /// Check-specific numbers that are not ratio reports.
    pub details: Value,
}

impl CheckOutcome {
    fn from_verdicts(
        check: &'static str,
        reports: Vec<(String, TailRatioReport)>,
        verdicts: Vec<Verdict>,
        details: Value,
    ) -> Self {
        CheckOutcome {
            check,
            passed: verdicts.iter().all(|v| v.passed),
            verdicts,
            reports,
            details,
        }
    }

    fn single(check: &'static str, r: TailRatioReport, expected: f64, tol: f64) -> Self {
        let v = r.verdict(check, expected, tol);
        Self::from_verdicts(check, vec![(check.to_string(), r)], vec![v], Value::Null)
    }
}

pub trait Check: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome>;
}

pub struct CheckEntry {
    pub build: fn(&Value) -> Result<Box<dyn Check>>,
    pub params_schema: fn() -> RootSchema,
}

fn parse<P: DeserializeOwned>(check: &str, params: &Value) -> Result<P> {
    let params = if params.is_null() { json!({}) } else { params.clone() };
    serde_json::from_value(params).map_err(|e| invalid(format!("{check} params: {e}")))
}

macro_rules! entry {
    ($name:literal, $params:ty) => {
        (
            $name,
            CheckEntry {
                build: |v| {
                    let p: $params = parse($name, v)?;
                    p.validate()?;
                    Ok(Box::new(p))
                },
                params_schema: || schema_for!($params),
            },
        )
    };
}

pub static CHECKS: Registry<CheckEntry> = Registry::new(
    "check",
    &[
        entry!("long_tail", LongTail),
        entry!("subexponential", Subexponential),
        entry!("nfold", NFold),
        entry!("kesten", Kesten),
        entry!("theorem11", Theorem11),
        entry!("corollary11", Corollary11),
        entry!("local_subexponential", LocalSubexponential),
        entry!("sstar", SStar),
        entry!("theorem41", Theorem41),
        entry!("theorem42", Theorem42),
        entry!("blowup", Blowup),
    ],
);

/// Looks up `name` and parses its parameters.
pub fn build_check(name: &str, params: &Value) -> Result<Box<dyn Check>> {
    (CHECKS.get(name)?.build)(params)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// `f(x + a) / f(x) -> 1` for every shift.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LongTail {
    #[serde(default = "unit_shift")]
    pub shifts: Vec<f64>,
}

fn unit_shift() -> Vec<f64> {
    vec![1.0]
}

impl LongTail {
    fn validate(&self) -> Result<()> {
        if self.shifts.is_empty() || self.shifts.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(invalid("shifts must be a nonempty list of nonnegative numbers"));
        }
        Ok(())
    }
}

impl Check for LongTail {
    fn name(&self) -> &'static str {
        "long_tail"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let f = ctx.density()?;
        let reports = long_tail_check(&f, &self.shifts, &ctx.window, &ctx.tolerances)?;
        let mut labelled = Vec::new();
        let mut verdicts = Vec::new();
        for (a, r) in self.shifts.iter().zip(reports) {
            let label = format!("long_tail_a{a}");
            verdicts.push(r.verdict(&label, 1.0, ctx.tolerances.long_tail));
            labelled.push((label, r));
        }
        Ok(CheckOutcome::from_verdicts(self.name(), labelled, verdicts, Value::Null))
    }
}

/// `f^{2⊗}(x) / f(x) -> 2`.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Subexponential {}

impl Subexponential {
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

impl Check for Subexponential {
    fn name(&self) -> &'static str {
        "subexponential"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let r = subexp_check(&ctx.density()?, &ctx.window, &ctx.tolerances)?;
        Ok(CheckOutcome::single(self.name(), r, 2.0, ctx.tolerances.subexponential))
    }
}

/// `f^{n⊗}(x) / f(x) -> n`.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NFold {
    pub n: usize,
}

impl NFold {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        Ok(())
    }
}

impl Check for NFold {
    fn name(&self) -> &'static str {
        "nfold"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let r = nfold_check(&ctx.density()?, self.n, &ctx.window, &ctx.tolerances)?;
        Ok(CheckOutcome::single(
            self.name(),
            r,
            self.n as f64,
            ctx.tolerances.subexponential,
        ))
    }
}

/// Smallest constant in `f^{n⊗}(x) <= C (1+ε)^n f(x)`. Passes when finite.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Kesten {
    pub epsilon: f64,
    pub n_max: usize,
    pub x0: f64,
}

impl Kesten {
    fn validate(&self) -> Result<()> {
        positive("epsilon", self.epsilon)?;
        if self.n_max == 0 {
            return Err(invalid("n_max must be at least 1"));
        }
        if !self.x0.is_finite() {
            return Err(invalid("x0 must be finite"));
        }
        Ok(())
    }
}

impl Check for Kesten {
    fn name(&self) -> &'static str {
        "kesten"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let r = kesten_scan(&ctx.density()?, self.epsilon, self.n_max, self.x0, &ctx.window)?;
        Ok(CheckOutcome {
            check: self.name(),
            passed: !r.violated && r.c_min.is_finite(),
            verdicts: Vec::new(),
            reports: Vec::new(),
            details: serde_json::to_value(&r).expect("report serializes"),
        })
    }
}

/// Compound Poisson density against its Lévy density.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Theorem11 {
    pub lambda: f64,
}

impl Theorem11 {
    fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)
    }
}

impl Check for Theorem11 {
    fn name(&self) -> &'static str {
        "theorem11"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        ctx.square_integrable(self.name())?;
        let r = theorem11_ratio(&ctx.density()?, self.lambda, &ctx.window, &ctx.tolerances)?;
        Ok(CheckOutcome::single(self.name(), r, 1.0, ctx.tolerances.theorem))
    }
}

/// Time scaling of the compound Poisson density.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Corollary11 {
    pub lambda: f64,
    pub t: f64,
}

impl Corollary11 {
    fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        positive("t", self.t)
    }
}

impl Check for Corollary11 {
    fn name(&self) -> &'static str {
        "corollary11"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        ctx.square_integrable(self.name())?;
        let f = ctx.density()?;
        let r = corollary11_scaling(&f, self.lambda, self.t, &ctx.window, &ctx.tolerances)?;
        Ok(CheckOutcome::single(self.name(), r, 1.0, ctx.tolerances.theorem))
    }
}

/// Interval-mass subexponentiality of `atom δ_0 + (1 - atom) f`.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LocalSubexponential {
    #[serde(default)]
    pub atom: f64,
    pub c: f64,
}

impl LocalSubexponential {
    fn validate(&self) -> Result<()> {
        positive("c", self.c)?;
        if !(0.0..1.0).contains(&self.atom) {
            return Err(invalid(format!("atom must lie in [0, 1), got {}", self.atom)));
        }
        Ok(())
    }
}

impl Check for LocalSubexponential {
    fn name(&self) -> &'static str {
        "local_subexponential"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let f = ctx.density()?;
        let rho = AtomPlusDensity::new(self.atom, f.scaled(1.0 - self.atom)?)?;
        let r = local_subexp_check(&rho, self.c, &ctx.window, &ctx.tolerances)?;
        Ok(CheckOutcome::single(self.name(), r, 2.0, ctx.tolerances.subexponential))
    }
}

/// Integral test for the strong subexponential class.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SStar {}

impl SStar {
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

impl Check for SStar {
    fn name(&self) -> &'static str {
        "sstar"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let r = sstar_check(&ctx.density()?, &ctx.window, &ctx.tolerances)?;
        Ok(CheckOutcome::single(self.name(), r, 1.0, ctx.tolerances.sstar))
    }
}

/// Negative-binomial compound density against its severity.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Theorem41 {
    pub alpha: f64,
    pub lambda: f64,
}

impl Theorem41 {
    fn validate(&self) -> Result<()> {
        positive("alpha", self.alpha)?;
        unit_interval("lambda", self.lambda)
    }
}

impl Check for Theorem41 {
    fn name(&self) -> &'static str {
        "theorem41"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        ctx.square_integrable(self.name())?;
        let f = ctx.density()?;
        let r = theorem41_ratio(&f, self.alpha, self.lambda, &ctx.window, &ctx.tolerances)?;
        Ok(CheckOutcome::single(self.name(), r, 1.0, ctx.tolerances.theorem))
    }
}

/// Supremum tail of the walk whose steps follow the family, in density and
/// interval form. The grid origin must be a multiple of the step.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Theorem42 {
    #[serde(default = "default_depth")]
    pub spitzer_depth: usize,
    /// Interval length for the interval form.
    #[serde(default = "one")]
    pub c: f64,
}

fn default_depth() -> usize {
    200
}

fn one() -> f64 {
    1.0
}

impl Theorem42 {
    fn validate(&self) -> Result<()> {
        if self.spitzer_depth == 0 {
            return Err(invalid("spitzer_depth must be at least 1"));
        }
        positive("c", self.c)
    }
}

/// Walk on the config grid, with the family's mean.
pub fn walk_on_grid(family: &FamilySpec, grid: &GridSpec, depth: usize) -> Result<WalkSpec> {
    let x_max = grid.right_edge();
    let mut spec = WalkSpec::from_family(family, grid.step, x_max)?;
    spec.step_density = grid.discretize(family)?;
    spec.spitzer_depth = depth;
    Ok(spec)
}

impl Check for Theorem42 {
    fn name(&self) -> &'static str {
        "theorem42"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let spec = walk_on_grid(&ctx.family, &ctx.grid, self.spitzer_depth)?;
        let family = &ctx.family;
        let r = theorem42_ratio(&spec, &|x| family.tail(x), &ctx.window, self.c, &ctx.tolerances)?;
        let tol = ctx.tolerances.supremum;
        let mut reports = Vec::new();
        let mut verdicts = Vec::new();
        for (label, report) in [("theorem42_density", &r.density), ("theorem42_interval", &r.interval)] {
            if let Some(report) = report {
                verdicts.push(report.verdict(label, 1.0, tol));
                reports.push((label.to_string(), report.clone()));
            }
        }
        let details = json!({
            "b_partial": r.b_partial,
            "tail_gap": r.tail_gap,
            "interval_length": r.interval_length,
            "skipped": r.skipped,
        });
        Ok(CheckOutcome::from_verdicts(self.name(), reports, verdicts, details))
    }
}

/// Cell values of the family and of its compound Poisson law at probe points
/// across grid refinements. Passes when both increase strictly with every
/// refinement at every probe, i.e. when the probes sit on a singularity.
#[derive(Debug, Clone, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Blowup {
    pub probes: Vec<f64>,
    /// Grid steps, coarsest first.
    pub steps: Vec<f64>,
    #[serde(default = "one")]
    pub lambda: f64,
    pub x_max: f64,
}

impl Blowup {
    fn validate(&self) -> Result<()> {
        if self.probes.is_empty() || self.steps.len() < 2 {
            return Err(invalid("blowup needs probes and at least two steps"));
        }
        if self.steps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid("blowup steps must decrease"));
        }
        for &s in &self.steps {
            positive("step", s)?;
        }
        positive("lambda", self.lambda)?;
        positive("x_max", self.x_max)
    }
}

impl Check for Blowup {
    fn name(&self) -> &'static str {
        "blowup"
    }

    fn run(&self, ctx: &CheckContext) -> Result<CheckOutcome> {
        let rows = blowup_probe(&ctx.family, &self.probes, &self.steps, self.lambda, self.x_max)?;
        let increasing = self.probes.iter().all(|&x| {
            let at: Vec<_> = rows.iter().filter(|r| r.x == x).collect();
            at.windows(2).all(|w| {
                w[1].cell_value > w[0].cell_value && w[1].compound_value > w[0].compound_value
            })
        });
        Ok(CheckOutcome {
            check: self.name(),
            passed: increasing,
            verdicts: Vec::new(),
            reports: Vec::new(),
            details: json!({ "rows": rows }),
        })
    }
}
