//! Supremum `M = sup_n S_n` of a random walk with negative drift.
//!
//! Two deterministic routes are provided. The Spitzer route sums
//! `n^{-1} ρ^{n*}` restricted to `(0, ∞)` into a Lévy measure `ν` of mass `B`
//! and compounds it with Poisson weights. The ladder route compounds a given
//! ascending ladder-height density with geometric weights. A Monte Carlo
//! sampler gives an independent check of both.

mod montecarlo;

pub use montecarlo::{default_barrier, montecarlo_supremum, Ecdf, MonteCarloResult, PATH_CAP};

use serde::Serialize;

use crate::asymptotics::{TailRatioReport, TailWindow, Tolerances, SERIES_TOL};
use crate::compound::{negbin_compound, poisson_compound, NegBinCompoundSpec, PoissonCompoundSpec};
use crate::error::{invalid, Error, Result};
use crate::families::FamilySpec;
use crate::grid::{AtomPlusDensity, GridDensity};
use crate::kernel::Kernel;

#[derive(Debug, Clone)]
pub struct WalkSpec {
    /// Step law on a two-sided grid whose origin is a multiple of the step.
    pub step_density: GridDensity,
    /// `E X_1`, negative.
    pub mean: f64,
    pub spitzer_depth: usize,
    pub mc_paths: u64,
    /// Paths stop once `S_n < -mc_barrier`.
    pub mc_barrier: f64,
    pub seed: u64,
}

impl WalkSpec {
    /// Discretizes `family` from the cell edge at or below its support, up to `x_max`.
    pub fn from_family(family: &FamilySpec, step: f64, x_max: f64) -> Result<Self> {
        family.validate()?;
        if !(step > 0.0) || !(x_max > 0.0) {
            return Err(invalid("walk grid needs step > 0 and x_max > 0"));
        }
        let lower = family.support_lower();
        let origin = if lower.is_finite() {
            (lower / step - 1e-9).floor() * step
        } else {
            return Err(invalid("step law needs a finite lower support bound"));
        };
        let n_cells = ((x_max - origin) / step).round() as usize;
        let step_density = family.discretize(origin, step, n_cells)?;
        let mean = family.mean();
        Ok(WalkSpec {
            step_density,
            mean,
            spitzer_depth: 200,
            mc_paths: 100_000,
            mc_barrier: default_barrier(x_max, mean),
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean < 0.0 && self.mean.is_finite()) {
            return Err(invalid(format!("walk mean must be negative, got {}", self.mean)));
        }
        if self.spitzer_depth == 0 {
            return Err(invalid("spitzer depth must be at least 1"));
        }
        if !(self.mc_barrier > 0.0) {
            return Err(invalid("Monte Carlo barrier must be positive"));
        }
        let h = self.step_density.step();
        let k = self.step_density.origin() / h;
        if (k - k.round()).abs() > 1e-6 {
            return Err(invalid(
                "step grid origin must be a multiple of the step so 0 is a cell edge",
            ));
        }
        if self.step_density.right_edge() <= 0.0 {
            return Err(invalid("step grid must extend to the right of 0"));
        }
        Ok(())
    }

    /// Right edge of the step grid, which also bounds the supremum grid.
    pub fn x_max(&self) -> f64 {
        self.step_density.right_edge()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpitzerResult {
    /// Truncated `ν` on `[0, x_max)`; its defect holds the mass above `x_max`.
    #[serde(skip)]
    pub nu: GridDensity,
    /// `sum_{n <= N} n^{-1} P(S_n > 0)`.
    pub b_partial: f64,
    /// Extrapolated `sum_{n > N} n^{-1} P(S_n > 0)`. Diagnostic only; infinite
    /// (JSON `null`) when the fitted decay of the last terms is not summable.
    pub tail_gap: f64,
    pub per_n_positive_mass: Vec<f64>,
}

/// `ν = sum_{n <= N} n^{-1} ρ^{n*}` restricted to `(0, ∞)`.
pub fn spitzer_nu(spec: &WalkSpec) -> Result<SpitzerResult> {
    spec.validate()?;
    let rho = &spec.step_density;
    let h = rho.step();
    let len = (rho.right_edge() / h).round() as usize;
    let kernel = Kernel::for_grid(rho);
    let mut nu = GridDensity::zeros(0.0, h, len)?;
    if rho.mass_above(0.0) + rho.defect() == 0.0 {
        // every power stays on (-inf, 0]
        return Ok(SpitzerResult {
            nu,
            b_partial: 0.0,
            tail_gap: 0.0,
            per_n_positive_mass: vec![0.0; spec.spitzer_depth],
        });
    }
    let mut positive = Vec::with_capacity(spec.spitzer_depth);
    let mut power: Option<GridDensity> = None;
    for n in 1..=spec.spitzer_depth {
        let next = match &power {
            None => rho.clone(),
            Some(p) => kernel.convolve(p, rho)?,
        };
        let part = next.positive_part();
        let mass = (part.mass() + part.defect()).clamp(0.0, 1.0);
        positive.push(mass);
        if !part.is_empty() || part.defect() > 0.0 {
            nu.add_scaled(1.0 / n as f64, &part)?;
        }
        power = Some(next);
    }
    let terms: Vec<f64> = positive
        .iter()
        .enumerate()
        .map(|(i, p)| p / (i + 1) as f64)
        .collect();
    check_late_monotone(&terms)?;
    let b_partial = terms.iter().sum();
    let tail_gap = tail_gap(&terms);
    log::debug!("spitzer: B_N = {b_partial}, tail gap ~ {tail_gap:e}");
    Ok(SpitzerResult {
        nu,
        b_partial,
        tail_gap,
        per_n_positive_mass: positive,
    })
}

/// Positive masses below this are spectral round-off rather than signal.
const NOISE_FLOOR: f64 = 1e-12;

fn check_late_monotone(terms: &[f64]) -> Result<()> {
    let resolved = terms.iter().rposition(|&t| t > NOISE_FLOOR).map_or(0, |i| i + 1);
    let start = resolved.saturating_sub(5);
    for i in start + 1..resolved {
        if terms[i] > terms[i - 1] * (1.0 + 1e-9) {
            return Err(Error::NonMonotoneTail { n: i + 1 });
        }
    }
    Ok(())
}

/// Extrapolates `sum_{n > N} a_n` from the last five terms, using whichever of
/// two log-space fits has the smaller residual: `C n^{-3/2} r^n`, the
/// large-deviation form of `n^{-1} P(S_n > 0)` for light-tailed steps, or the
/// power law `C n^{-β}` of heavy-tailed steps. Terms already below the noise
/// floor give a gap of 0.
fn tail_gap(terms: &[f64]) -> f64 {
    let n = terms.len();
    if n < 5 {
        return f64::NAN;
    }
    let last = &terms[n - 5..];
    if last.iter().any(|&a| a <= NOISE_FLOOR) {
        return 0.0;
    }
    let idx: Vec<f64> = (n - 4..=n).map(|k| k as f64).collect();
    let logs: Vec<f64> = idx.iter().map(|k| k.ln()).collect();
    let ys: Vec<f64> = last.iter().map(|a| a.ln()).collect();
    let damped: Vec<f64> = ys.iter().zip(&logs).map(|(y, l)| y + 1.5 * l).collect();

    let (geo_slope, geo_icpt, geo_res) = least_squares(&idx, &damped);
    let (pow_slope, pow_icpt, pow_res) = least_squares(&logs, &ys);
    let big_n = n as f64;
    if geo_res <= pow_res {
        if geo_slope >= 0.0 {
            return f64::INFINITY;
        }
        damped_geometric_tail(geo_icpt, geo_slope, n)
    } else {
        let beta = -pow_slope;
        if beta <= 1.0 {
            return f64::INFINITY;
        }
        // integral of C k^{-beta} from N + 1/2
        pow_icpt.exp() * (big_n + 0.5).powf(1.0 - beta) / (beta - 1.0)
    }
}

/// `sum_{k > n} e^{icpt + slope k} k^{-3/2}` for `slope < 0`.
fn damped_geometric_tail(icpt: f64, slope: f64, n: usize) -> f64 {
    const MAX_SUMMED: usize = 1_000_000;
    let mut sum = 0.0;
    for k in n + 1..=n + MAX_SUMMED {
        let kf = k as f64;
        let term = (icpt + slope * kf).exp() * kf.powf(-1.5);
        sum += term;
        if term <= 1e-17 * sum {
            return sum;
        }
    }
    // remainder bounded by the integral of the last term's envelope
    let k = (n + MAX_SUMMED) as f64;
    sum + (icpt + slope * k).exp() * 2.0 * k.powf(-0.5)
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let res = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum();
    (slope, icpt, res)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupremumSource {
    Spitzer,
    Ladder,
    Montecarlo,
}

#[derive(Debug, Clone)]
pub struct SupremumResult {
    pub pi: AtomPlusDensity,
    /// `P(M > 0) = 1 - e^{-B}`.
    pub lambda_rw: f64,
    pub source: SupremumSource,
}

/// `π = e^{-B} δ_0 + (1 - e^{-B}) p` with `p` the compound Poisson law of rate
/// `B` and jump density `ν / B`.
pub fn supremum_from_nu(sr: &SpitzerResult) -> Result<SupremumResult> {
    let b = sr.b_partial;
    if b <= 0.0 {
        let pi = AtomPlusDensity::dirac(0.0, sr.nu.step(), sr.nu.len())?;
        return Ok(SupremumResult {
            pi,
            lambda_rw: 0.0,
            source: SupremumSource::Spitzer,
        });
    }
    let phi = sr.nu.scaled(1.0 / b)?;
    let p = poisson_compound(&PoissonCompoundSpec {
        lambda: b,
        t: 1.0,
        severity: phi,
        tol: SERIES_TOL,
    })?;
    let lambda_rw = -(-b).exp_m1();
    let pi = AtomPlusDensity::new((-b).exp(), p.density.scaled(lambda_rw)?)?;
    Ok(SupremumResult {
        pi,
        lambda_rw,
        source: SupremumSource::Spitzer,
    })
}

/// `π = (1 - λ) δ_0 + λ (1 - λ) sum_n λ^{n-1} f_+^{n⊗}`.
pub fn supremum_from_ladder(f_plus: &GridDensity, lambda_rw: f64) -> Result<SupremumResult> {
    if !(lambda_rw > 0.0 && lambda_rw < 1.0) {
        return Err(invalid(format!(
            "ladder parameter must lie in (0, 1), got {lambda_rw}"
        )));
    }
    let p = negbin_compound(&NegBinCompoundSpec {
        alpha: 1.0,
        lambda: lambda_rw,
        severity: f_plus.clone(),
        tol: SERIES_TOL,
    })?;
    let pi = AtomPlusDensity::new(1.0 - lambda_rw, p.density.scaled(lambda_rw)?)?;
    Ok(SupremumResult {
        pi,
        lambda_rw,
        source: SupremumSource::Ladder,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem42Report {
    /// `(1 - e^{-B}) p(x) |E X| / ρ̄(x)`.
    pub density: Option<TailRatioReport>,
    /// `π((x, x+c]) |E X| / (c ρ̄(x))`.
    pub interval: Option<TailRatioReport>,
    pub interval_length: f64,
    pub b_partial: f64,
    pub tail_gap: f64,
    /// Set when the check does not apply, with the reason.
    pub skipped: Option<String>,
}

/// Tail law of the supremum density against the step tail, from the Spitzer route.
pub fn theorem42_ratio(
    spec: &WalkSpec,
    rho_tail: &dyn Fn(f64) -> f64,
    w: &TailWindow,
    c: f64,
    tol: &Tolerances,
) -> Result<Theorem42Report> {
    spec.validate()?;
    if !(c > 0.0) {
        return Err(invalid(format!("interval length must be positive, got {c}")));
    }
    let rho = &spec.step_density;
    if rho.mass_above(0.0) + rho.defect() <= 0.0 {
        return Ok(Theorem42Report {
            density: None,
            interval: None,
            interval_length: c,
            b_partial: 0.0,
            tail_gap: 0.0,
            skipped: Some("no positive tail".into()),
        });
    }
    w.check_within(c, spec.x_max())?;
    let sr = spitzer_nu(spec)?;
    let sup = supremum_from_nu(&sr)?;
    let d = sup.pi.density();
    let mu = spec.mean.abs();
    let xs = w.points();
    let tails: Vec<f64> = xs.iter().map(|&x| rho_tail(x)).collect();

    let num: Vec<f64> = xs.iter().map(|&x| d.density_at(x) * mu).collect();
    let density = TailRatioReport::from_parts(*w, &xs, &num, &tails, tol)?;

    let num: Vec<f64> = xs.iter().map(|&x| sup.pi.interval_mass(x, c) * mu).collect();
    let den: Vec<f64> = tails.iter().map(|t| c * t).collect();
    let interval = TailRatioReport::from_parts(*w, &xs, &num, &den, tol)?;

    Ok(Theorem42Report {
        density: Some(density),
        interval: Some(interval),
        interval_length: c,
        b_partial: sr.b_partial,
        tail_gap: sr.tail_gap,
        skipped: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma_ur;

    fn shifted_exp_walk(shift: f64, step: f64, x_max: f64, depth: usize) -> WalkSpec {
        let fam = FamilySpec::exponential(1.0).shifted(-shift);
        let mut spec = WalkSpec::from_family(&fam, step, x_max).unwrap();
        spec.spitzer_depth = depth;
        spec
    }

    /// Root of `1 - g = e^{-2 g}` in (0, 1), by bisection.
    fn cramer_root() -> f64 {
        let (mut lo, mut hi) = (0.5f64, 1.0 - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - mid - (-2.0 * mid).exp() > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn grid_origin_is_aligned() {
        let spec = shifted_exp_walk(5.0 / 3.0, 0.05, 10.0, 10);
        assert!((spec.step_density.origin() + 1.7).abs() < 1e-12);
        assert!((spec.mean + 2.0 / 3.0).abs() < 1e-15);
        let mut bad = spec.clone();
        bad.step_density = FamilySpec::exponential(1.0)
            .shifted(-1.0)
            .discretize(-1.01, 0.05, 100)
            .unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn positive_mass_matches_incomplete_gamma() {
        let spec = shifted_exp_walk(2.0, 2e-3, 30.0, 20);
        let sr = spitzer_nu(&spec).unwrap();
        for (i, p) in sr.per_n_positive_mass.iter().enumerate() {
            let n = (i + 1) as f64;
            let exact = gamma_ur(n, 2.0 * n);
            assert!((p - exact).abs() < 1e-6, "n = {n}: {p} vs {exact}");
        }
        let total = sr.nu.mass() + sr.nu.defect();
        assert!((total - sr.b_partial).abs() < 1e-8);
    }

    #[test]
    fn positive_mass_matches_fresh_powers() {
        let spec = shifted_exp_walk(2.0, 0.01, 20.0, 3);
        let sr = spitzer_nu(&spec).unwrap();
        let k = Kernel::for_grid(&spec.step_density);
        for n in 1..=3 {
            let part = k.conv_power(&spec.step_density, n).unwrap().positive_part();
            let fresh = part.mass() + part.defect();
            assert!((fresh - sr.per_n_positive_mass[n - 1]).abs() < 1e-10);
        }
    }

    #[test]
    fn spitzer_matches_ladder_and_closed_form() {
        let spec = shifted_exp_walk(2.0, 0.01, 40.0, 120);
        let sr = spitzer_nu(&spec).unwrap();
        let gamma = cramer_root();
        assert!((sr.b_partial + gamma.ln()).abs() < 1e-4, "{}", sr.b_partial);
        assert!(sr.tail_gap >= 0.0 && sr.tail_gap < 1e-10);

        let spitzer = supremum_from_nu(&sr).unwrap();
        assert!((spitzer.pi.atom() - (-sr.b_partial).exp()).abs() < 1e-12);
        let f_plus = FamilySpec::exponential(1.0).discretize(0.0, 0.01, 4000).unwrap();
        let ladder = supremum_from_ladder(&f_plus, 1.0 - gamma).unwrap();
        let l1 = spitzer
            .pi
            .density()
            .l1_distance(ladder.pi.density())
            .unwrap();
        assert!(l1 < 1e-3, "{l1}");
        for x in [0.5, 3.0, 10.0] {
            let closed = (1.0 - gamma) * (-gamma * x).exp();
            let tail = 1.0 - ladder.pi.cdf(x);
            assert!((tail - closed).abs() < 1e-4, "{x}");
        }
    }

    #[test]
    fn ladder_closed_form_density() {
        let (theta, lambda) = (1.5, 0.3);
        let f = FamilySpec::exponential(theta).discretize(0.0, 5e-4, 40_000).unwrap();
        let sup = supremum_from_ladder(&f, lambda).unwrap();
        let d = sup.pi.density();
        let rate = (1.0 - lambda) * theta;
        // past x = 12 the density is within 1e-7 of the spectral noise floor
        for i in (0..d.len()).step_by(997).filter(|&i| d.center(i) < 12.0) {
            let (a, b) = (d.x_left(i), d.x_left(i + 1));
            let exact = lambda * ((-rate * a).exp() - (-rate * b).exp()) / (b - a);
            assert!((d.values()[i] / exact - 1.0).abs() < 1e-6, "cell {i}");
        }
        assert!(supremum_from_ladder(&f, 1.0).is_err());
    }

    #[test]
    fn negative_steps_give_point_mass() {
        let fam = FamilySpec::uniform(-2.0, -0.5);
        let spec = WalkSpec::from_family(&fam, 0.05, 5.0).unwrap();
        let sr = spitzer_nu(&spec).unwrap();
        assert_eq!(sr.b_partial, 0.0);
        let sup = supremum_from_nu(&sr).unwrap();
        assert_eq!(sup.pi.atom(), 1.0);
        assert_eq!(sup.pi.density().mass(), 0.0);
        let w = TailWindow::new(1.0, 3.0);
        let r = theorem42_ratio(&spec, &|x| fam.tail(x), &w, 1.0, &Tolerances::default()).unwrap();
        assert_eq!(r.skipped.as_deref(), Some("no positive tail"));
    }

    #[test]
    fn atom_grows_with_drift() {
        let mut prev = 0.0;
        for shift in [1.5, 2.0, 3.0] {
            let sr = spitzer_nu(&shifted_exp_walk(shift, 0.01, 30.0, 80)).unwrap();
            let atom = supremum_from_nu(&sr).unwrap().pi.atom();
            assert!(atom >= prev);
            prev = atom;
        }
    }

    #[test]
    fn tail_gap_fits() {
        let damped = |n: i32| 0.5f64.powi(n) * (n as f64).powf(-1.5);
        let geo: Vec<f64> = (1..=20).map(damped).collect();
        let exact: f64 = (21..200).map(damped).sum();
        assert!((tail_gap(&geo) / exact - 1.0).abs() < 1e-9);
        let rising: Vec<f64> = (1..=10).map(|n| 1.1f64.powi(n)).collect();
        assert_eq!(tail_gap(&rising), f64::INFINITY);
        let pow: Vec<f64> = (1..=30).map(|n| (n as f64).powf(-2.5)).collect();
        let gap = tail_gap(&pow);
        let exact: f64 = (31..200_000).map(|n| (n as f64).powf(-2.5)).sum();
        assert!((gap / exact - 1.0).abs() < 0.01, "{gap} vs {exact}");
        assert!(check_late_monotone(&[1.0, 0.5, 0.6]).is_err());
        assert!(check_late_monotone(&[1.0, 0.5, 1e-15, 3e-15]).is_ok());
    }
}
