use std::collections::BTreeMap;

use serde::Serialize;

use super::{TailRatioReport, TailWindow, Tolerances};
use crate::compound::{
    negbin_compound, poisson_compound, NegBinCompoundSpec, PoissonCompoundSpec,
};
use crate::error::{invalid, Result};
use crate::families::FamilySpec;
use crate::grid::{AtomPlusDensity, GridDensity};
use crate::kernel::Kernel;

/// Residual series weight used by the compound-constant checks.
pub const SERIES_TOL: f64 = 1e-12;

fn densities(g: &GridDensity, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| g.density_at(x)).collect()
}

/// `(a ⊗ b)(x)` at each `x`, interpolated like [`GridDensity::density_at`], from
/// cells summed directly. Free of spectral round-off, so usable where the
/// result is many orders below the peak.
pub fn pointwise_convolution(
    kernel: &Kernel,
    a: &GridDensity,
    b: &GridDensity,
    xs: &[f64],
) -> Result<Vec<f64>> {
    let template = GridDensity::zeros(a.origin() + b.origin(), a.step(), a.len() + b.len())?;
    let stencils: Vec<_> = xs.iter().map(|&x| template.interp_stencil(x)).collect();
    let mut cells: Vec<usize> = stencils
        .iter()
        .flatten()
        .flat_map(|&(k0, k1, _)| [k0, k1])
        .collect();
    cells.sort_unstable();
    cells.dedup();
    let values = kernel.convolve_cells(a, b, &cells)?;
    let lookup: BTreeMap<usize, f64> = cells.into_iter().zip(values).collect();
    Ok(stencils
        .into_iter()
        .map(|s| match s {
            None => 0.0,
            Some((k0, k1, w)) => (1.0 - w) * lookup[&k0] + w * lookup[&k1],
        })
        .collect())
}

/// Mass of `(x, x + c]` under `a ⊗ b`, from directly summed cells.
fn convolution_interval_mass(
    kernel: &Kernel,
    a: &GridDensity,
    b: &GridDensity,
    x: f64,
    c: f64,
) -> Result<f64> {
    let template = GridDensity::zeros(a.origin() + b.origin(), a.step(), a.len() + b.len())?;
    let (lo, hi) = (x.max(template.origin()), (x + c).min(template.right_edge()));
    if hi <= lo {
        return Ok(0.0);
    }
    let last = template.len() - 1;
    let i0 = template.cell_index(lo).unwrap_or(0);
    let i1 = template.cell_index(hi).unwrap_or(last).min(last);
    let cells: Vec<usize> = (i0..=i1).collect();
    let values = kernel.convolve_cells(a, b, &cells)?;
    let piece = GridDensity::new(template.x_left(i0), a.step(), values, 0.0)?;
    Ok(piece.mass_between(x, x + c))
}

/// `f(x + a) / f(x)` for each shift `a`.
pub fn long_tail_check(
    f: &GridDensity,
    shifts: &[f64],
    w: &TailWindow,
    tol: &Tolerances,
) -> Result<Vec<TailRatioReport>> {
    if shifts.is_empty() || shifts.iter().any(|a| !(*a >= 0.0)) {
        return Err(invalid("shifts must be a nonempty list of nonnegative numbers"));
    }
    let max_shift = shifts.iter().copied().fold(0.0, f64::max);
    w.check_within(max_shift, f.right_edge())?;
    let xs = w.points();
    let den = densities(f, &xs);
    shifts
        .iter()
        .map(|&a| {
            let num: Vec<f64> = xs.iter().map(|&x| f.density_at(x + a)).collect();
            TailRatioReport::from_parts(*w, &xs, &num, &den, tol)
        })
        .collect()
}

/// `f^{2⊗}(x) / f(x)`.
pub fn subexp_check(f: &GridDensity, w: &TailWindow, tol: &Tolerances) -> Result<TailRatioReport> {
    w.check_within(0.0, f.right_edge())?;
    let xs = w.points();
    let num = pointwise_convolution(&Kernel::for_grid(f), f, f, &xs)?;
    TailRatioReport::from_parts(*w, &xs, &num, &densities(f, &xs), tol)
}

/// `f^{n⊗}(x) / f(x)`.
pub fn nfold_check(
    f: &GridDensity,
    n: usize,
    w: &TailWindow,
    tol: &Tolerances,
) -> Result<TailRatioReport> {
    w.check_within(0.0, f.right_edge())?;
    let xs = w.points();
    let power = Kernel::for_grid(f).conv_power(f, n)?;
    TailRatioReport::from_parts(*w, &xs, &densities(&power, &xs), &densities(f, &xs), tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KestenReport {
    pub epsilon: f64,
    pub n_max: usize,
    pub x0: f64,
    /// Largest `f^{n⊗}(x) / ((1+ε)^n f(x))` over the scan.
    pub c_min: f64,
    /// Largest ratio for each `n = 1..=n_max`.
    pub per_n: Vec<f64>,
    pub argmax_n: usize,
    pub argmax_x: f64,
    /// Set when some ratio is not finite.
    pub violated: bool,
}

/// Smallest `C` with `f^{n⊗}(x) <= C (1+ε)^n f(x)` over window points `x > x0`
/// and `n <= n_max`.
pub fn kesten_scan(
    f: &GridDensity,
    epsilon: f64,
    n_max: usize,
    x0: f64,
    w: &TailWindow,
) -> Result<KestenReport> {
    if !(epsilon > 0.0) || n_max == 0 {
        return Err(invalid("kesten scan needs epsilon > 0 and n_max >= 1"));
    }
    w.check_within(0.0, f.right_edge())?;
    let xs: Vec<f64> = w.points().into_iter().filter(|&x| x > x0).collect();
    if xs.is_empty() {
        return Err(invalid(format!("no window point lies above x0 = {x0}")));
    }
    let base = densities(f, &xs);
    let kernel = Kernel::for_grid(f);
    let mut report = KestenReport {
        epsilon,
        n_max,
        x0,
        c_min: 0.0,
        per_n: Vec::with_capacity(n_max),
        argmax_n: 1,
        argmax_x: xs[0],
        violated: false,
    };
    for (i, power) in kernel.powers(f).take(n_max).enumerate() {
        let n = i + 1;
        let power = power?;
        let scale = (1.0 + epsilon).powi(n as i32);
        let mut best = 0.0f64;
        for (&x, &fx) in xs.iter().zip(&base) {
            let num = power.density_at(x);
            if num == 0.0 {
                continue;
            }
            let r = num / (scale * fx);
            if !r.is_finite() {
                report.violated = true;
                continue;
            }
            if r > best {
                best = r;
            }
            if r > report.c_min {
                report.c_min = r;
                report.argmax_n = n;
                report.argmax_x = x;
            }
        }
        report.per_n.push(best);
    }
    Ok(report)
}

/// `(1 - e^{-λ}) p(x) / (λ φ(x))` with `p` the compound Poisson density at time 1.
pub fn theorem11_ratio(
    phi: &GridDensity,
    lambda: f64,
    w: &TailWindow,
    tol: &Tolerances,
) -> Result<TailRatioReport> {
    w.check_within(0.0, phi.right_edge())?;
    let p = poisson_compound(&PoissonCompoundSpec {
        lambda,
        t: 1.0,
        severity: phi.clone(),
        tol: SERIES_TOL,
    })?
    .density;
    let xs = w.points();
    let c = -(-lambda).exp_m1();
    let num: Vec<f64> = xs.iter().map(|&x| c * p.density_at(x)).collect();
    let den: Vec<f64> = xs.iter().map(|&x| lambda * phi.density_at(x)).collect();
    TailRatioReport::from_parts(*w, &xs, &num, &den, tol)
}

/// `(1 - e^{-λt}) p^t(x) / (t (1 - e^{-λ}) p(x))`.
pub fn corollary11_scaling(
    phi: &GridDensity,
    lambda: f64,
    t: f64,
    w: &TailWindow,
    tol: &Tolerances,
) -> Result<TailRatioReport> {
    w.check_within(0.0, phi.right_edge())?;
    let at = |time: f64| {
        poisson_compound(&PoissonCompoundSpec {
            lambda,
            t: time,
            severity: phi.clone(),
            tol: SERIES_TOL,
        })
        .map(|c| c.density)
    };
    let (pt, p1) = (at(t)?, at(1.0)?);
    let xs = w.points();
    let ct = -(-lambda * t).exp_m1();
    let c1 = t * -(-lambda).exp_m1();
    let num: Vec<f64> = xs.iter().map(|&x| ct * pt.density_at(x)).collect();
    let den: Vec<f64> = xs.iter().map(|&x| c1 * p1.density_at(x)).collect();
    TailRatioReport::from_parts(*w, &xs, &num, &den, tol)
}

/// `ρ^{2*}((x, x+c]) / ρ((x, x+c])` for `ρ = a δ_0 + D`, with
/// `ρ^{2*} = a² δ_0 + 2a D + D ⊗ D`.
pub fn local_subexp_check(
    rho: &AtomPlusDensity,
    c: f64,
    w: &TailWindow,
    tol: &Tolerances,
) -> Result<TailRatioReport> {
    if !(c > 0.0) {
        return Err(invalid(format!("interval length must be positive, got {c}")));
    }
    let d = rho.density();
    w.check_within(c, d.right_edge())?;
    let a = rho.atom();
    let kernel = Kernel::for_grid(d);
    let xs = w.points();
    let mut num = Vec::with_capacity(xs.len());
    let mut den = Vec::with_capacity(xs.len());
    for &x in &xs {
        let atom = if x < 0.0 && 0.0 <= x + c { a * a } else { 0.0 };
        let dd = convolution_interval_mass(&kernel, d, d, x, c)?;
        num.push(atom + 2.0 * a * d.interval_mass(x, c) + dd);
        den.push(rho.interval_mass(x, c));
    }
    TailRatioReport::from_parts(*w, &xs, &num, &den, tol)
}

/// Upper tail `ρ̄(y)` of a grid in O(1) per query after an O(n) setup.
struct TailTable<'a> {
    grid: &'a GridDensity,
    // suffix[i] = step * sum_{k >= i} values[k] + defect
    suffix: Vec<f64>,
}

impl<'a> TailTable<'a> {
    fn new(grid: &'a GridDensity) -> Self {
        let mut suffix = vec![0.0; grid.len() + 1];
        suffix[grid.len()] = grid.defect();
        for i in (0..grid.len()).rev() {
            suffix[i] = suffix[i + 1] + grid.step() * grid.values()[i];
        }
        TailTable { grid, suffix }
    }

    fn at(&self, y: f64) -> f64 {
        match self.grid.cell_index(y) {
            Some(i) => self.suffix[i + 1] + self.grid.values()[i] * (self.grid.x_left(i + 1) - y),
            None if y < self.grid.origin() => self.suffix[0],
            None => self.grid.defect(),
        }
    }
}

/// `∫_0^x ρ̄(x - y) ρ̄(y) dy / (2 m⁺ ρ̄(x))` with `m⁺ = ∫_0^∞ u ρ(du)`.
///
/// Window points are moved to the nearest multiple of the step, so the
/// integrand is quadratic on each cell when 0 is a cell edge and Simpson's rule
/// is exact.
pub fn sstar_check(rho: &GridDensity, w: &TailWindow, tol: &Tolerances) -> Result<TailRatioReport> {
    w.check_within(0.0, rho.right_edge())?;
    let h = rho.step();
    let m_plus = rho.positive_first_moment();
    if !(m_plus > 0.0 && m_plus.is_finite()) {
        return Err(invalid("positive part has no finite positive first moment"));
    }
    let table = TailTable::new(rho);
    let mut xs: Vec<f64> = w.points().iter().map(|&x| (x / h).round() * h).collect();
    xs.dedup();
    let mut num = Vec::with_capacity(xs.len());
    let mut den = Vec::with_capacity(xs.len());
    for &x in &xs {
        let m = (x / h).round() as usize;
        // tails at half steps 0, h/2, ..., x
        let half: Vec<f64> = (0..=2 * m).map(|k| table.at(k as f64 * 0.5 * h)).collect();
        let integral: f64 = (0..m)
            .map(|j| {
                let (l, r) = (2 * j, 2 * j + 2);
                half[l] * half[2 * m - l]
                    + 4.0 * half[l + 1] * half[2 * m - l - 1]
                    + half[r] * half[2 * m - r]
            })
            .sum::<f64>()
            * h
            / 6.0;
        num.push(integral);
        den.push(2.0 * m_plus * table.at(x));
    }
    TailRatioReport::from_parts(*w, &xs, &num, &den, tol)
}

/// Derivative at 1 of `s -> ((1-λ)/(1-λs))^α`, i.e. `αλ/(1-λ)`.
pub fn negbin_pgf_derivative(alpha: f64, lambda: f64) -> f64 {
    alpha * lambda / (1.0 - lambda)
}

/// `(1 - c0) p(x) / (φ'(1) f(x))` with `p` the negative-binomial compound.
pub fn theorem41_ratio(
    f: &GridDensity,
    alpha: f64,
    lambda: f64,
    w: &TailWindow,
    tol: &Tolerances,
) -> Result<TailRatioReport> {
    w.check_within(0.0, f.right_edge())?;
    let spec = NegBinCompoundSpec {
        alpha,
        lambda,
        severity: f.clone(),
        tol: SERIES_TOL,
    };
    let p = negbin_compound(&spec)?.density;
    let xs = w.points();
    let c = 1.0 - spec.c0();
    let d = negbin_pgf_derivative(alpha, lambda);
    let num: Vec<f64> = xs.iter().map(|&x| c * p.density_at(x)).collect();
    let den: Vec<f64> = xs.iter().map(|&x| d * f.density_at(x)).collect();
    TailRatioReport::from_parts(*w, &xs, &num, &den, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupRow {
    pub step: f64,
    pub x: f64,
    /// Cell average of the family over the cell containing `x`.
    pub cell_value: f64,
    /// Same cell of the compound Poisson density with rate `lambda`.
    pub compound_value: f64,
}

/// Cell values of a density and of its compound Poisson law at the cells
/// containing each probe point, over a sequence of grid steps.
pub fn blowup_probe(
    family: &FamilySpec,
    probes: &[f64],
    steps: &[f64],
    lambda: f64,
    x_max: f64,
) -> Result<Vec<BlowupRow>> {
    let mut rows = Vec::with_capacity(probes.len() * steps.len());
    for &step in steps {
        let grid = family.discretize(0.0, step, (x_max / step).round() as usize)?;
        let p = poisson_compound(&PoissonCompoundSpec {
            lambda,
            t: 1.0,
            severity: grid.clone(),
            tol: SERIES_TOL,
        })?
        .density;
        for &x in probes {
            rows.push(BlowupRow {
                step,
                x,
                cell_value: grid.cell_value_at(x),
                compound_value: p.cell_value_at(x),
            });
        }
    }
    Ok(rows)
}
