//! Compound sums `sum_n w_n f^{n⊗}` over a nonnegative severity grid.

mod series;

pub use series::{
    truncation_point, CompoundSeries, GeometricSeries, LogSeries, NegBinSeries, PoissonSeries,
    SeriesCtor, SeriesParams, SERIES,
};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{AtomPlusDensity, GridDensity};
use crate::kernel::Kernel;

/// Hard limit on the number of series terms.
pub const MAX_TERMS: usize = 512;

/// Compound Poisson law at time `t` for a Lévy measure of mass `lambda` with
/// normalised jump density `severity`.
#[derive(Debug, Clone)]
pub struct PoissonCompoundSpec {
    pub lambda: f64,
    pub t: f64,
    pub severity: GridDensity,
    pub tol: f64,
}

/// Negative-binomial compounding with parameters `alpha > 0`, `0 < lambda < 1`.
#[derive(Debug, Clone)]
pub struct NegBinCompoundSpec {
    pub alpha: f64,
    pub lambda: f64,
    pub severity: GridDensity,
    pub tol: f64,
}

impl NegBinCompoundSpec {
    /// `-ln(1 - lambda)`.
    pub fn delta(&self) -> f64 {
        -(-self.lambda).ln_1p()
    }

    /// `(1 - lambda)^alpha`.
    pub fn c0(&self) -> f64 {
        (-self.alpha * self.delta()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesReport {
    pub terms_used: usize,
    pub residual_weight: f64,
    pub defect: f64,
}

#[derive(Debug, Clone)]
pub struct Compounded {
    pub density: GridDensity,
    pub report: SeriesReport,
}

/// Sums `w_n f^{n⊗}` for `n = 1..=N`, with `N` the smallest index whose
/// residual weight is below `tol`. The result lives on the severity grid; mass
/// pushed past its right edge is carried in the defect.
pub fn compound_density(
    series: &dyn CompoundSeries,
    severity: &GridDensity,
    tol: f64,
    kernel: &Kernel,
) -> Result<Compounded> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    if severity.origin().abs() > 1e-9 * severity.step() {
        return Err(invalid(format!(
            "severity grid must start at 0, got origin {}",
            severity.origin()
        )));
    }
    if severity.total_mass() > 1.0 + 1e-9 {
        return Err(invalid(format!(
            "severity carries mass {} > 1",
            severity.total_mass()
        )));
    }
    let terms = truncation_point(series, tol, MAX_TERMS).ok_or(Error::SeriesCap {
        cap: MAX_TERMS,
        tol,
    })?;

    let mut out = GridDensity::zeros(0.0, severity.step(), severity.len())?;
    for (i, power) in kernel.powers(severity).take(terms).enumerate() {
        out.add_scaled(series.weight(i + 1), &power?)?;
    }
    let report = SeriesReport {
        terms_used: terms,
        residual_weight: series.tail_weight(terms),
        defect: out.defect(),
    };
    log::debug!("{} series: {report:?}", series.name());
    Ok(Compounded {
        density: out,
        report,
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("tolerance must be positive, got {tol}")))
    }
}

/// `p^t = (e^{λt} - 1)^{-1} sum_n (λt)^n/n! φ^{n⊗}`.
pub fn poisson_compound(spec: &PoissonCompoundSpec) -> Result<Compounded> {
    check_tol(spec.tol)?;
    if !(spec.t > 0.0) {
        return Err(invalid(format!("time must be positive, got {}", spec.t)));
    }
    let series = PoissonSeries::new(spec.lambda * spec.t)?;
    compound_density(&series, &spec.severity, spec.tol, &Kernel::for_grid(&spec.severity))
}

/// `c0/(1-c0) sum_n binom(alpha+n-1, alpha-1) λ^n f^{n⊗}`.
pub fn negbin_compound(spec: &NegBinCompoundSpec) -> Result<Compounded> {
    check_tol(spec.tol)?;
    let series = NegBinSeries::new(spec.alpha, spec.lambda)?;
    compound_density(&series, &spec.severity, spec.tol, &Kernel::for_grid(&spec.severity))
}

/// `δ^{-1} sum_n λ^n/n f^{n⊗}`. `alpha` is ignored.
pub fn log_compound(spec: &NegBinCompoundSpec) -> Result<Compounded> {
    check_tol(spec.tol)?;
    let series = LogSeries::new(spec.lambda)?;
    compound_density(&series, &spec.severity, spec.tol, &Kernel::for_grid(&spec.severity))
}

/// L1 distance between the negative-binomial compound of `f` and the Poisson
/// compound, with rate `alpha * delta`, of the logarithmic compound of `f`.
///
/// The two routes share no intermediate grids.
pub fn lemma41_identity_check(alpha: f64, lambda: f64, f: &GridDensity, tol: f64) -> Result<f64> {
    let spec = NegBinCompoundSpec {
        alpha,
        lambda,
        severity: f.clone(),
        tol,
    };
    let direct = negbin_compound(&spec)?;

    let phi = log_compound(&spec)?;
    let poisson = PoissonSeries::new(alpha * spec.delta())?;
    let nested = compound_density(&poisson, &phi.density, tol, &Kernel::for_grid(f))?;

    direct.density.l1_distance(&nested.density)
}

/// `atom δ_0 + (1 - atom) p`.
pub fn with_atom(p: &GridDensity, atom: f64) -> Result<AtomPlusDensity> {
    if !(0.0..1.0).contains(&atom) {
        return Err(invalid(format!("atom must lie in [0, 1), got {atom}")));
    }
    AtomPlusDensity::new(atom, p.scaled(1.0 - atom)?)
}
