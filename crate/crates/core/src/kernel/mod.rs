//! Discretization and exact-support convolution of grid densities.
//!
//! Inputs are read as piecewise-constant functions. Their convolution is
//! piecewise linear with nodes on the grid, and the output cell values are the
//! exact cell averages of that piecewise-linear function:
//! `out[k] = (c[k-1] + c[k]) / 2` with `c = step * (a * b)` the sequence
//! convolution. This keeps every output nonnegative, conserves mass and the
//! mean exactly, and is second order in the step for smooth densities.

mod backend;

pub use backend::{ConvolutionBackend, DirectBackend, SpectralBackend, BACKENDS};

use crate::error::{Error, Result};
use crate::grid::{check_same_step, AtomPlusDensity, GridDensity};

/// Round-off clamping above this much mass is treated as a failure.
const CLAMP_LIMIT: f64 = 1e-10;

/// Exact integrals of a density, used to discretize it.
pub trait CellIntegral {
    /// `integral of the density over (a, b)`, for `a < b`.
    fn cell_mass(&self, a: f64, b: f64) -> f64;

    /// Mass on `(-inf, x]`.
    fn mass_below(&self, x: f64) -> f64;

    /// Mass on `(x, inf)`.
    fn mass_above(&self, x: f64) -> f64;
}

/// Cell averages of `density` over `n_cells` cells starting at `origin`.
/// Mass outside the grid becomes the defect.
pub fn discretize(
    density: &dyn CellIntegral,
    origin: f64,
    step: f64,
    n_cells: usize,
) -> Result<GridDensity> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    if n_cells == 0 {
        return Err(Error::InvalidParameter("need at least one cell".into()));
    }
    let mut values = Vec::with_capacity(n_cells);
    for i in 0..n_cells {
        let a = origin + i as f64 * step;
        let b = origin + (i + 1) as f64 * step;
        let m = density.cell_mass(a, b);
        if !m.is_finite() {
            return Err(Error::NonFiniteCellMass { a, b });
        }
        if m < 0.0 {
            return Err(Error::NegativeCellMass { a, b, value: m });
        }
        values.push(m / step);
    }
    let right = origin + n_cells as f64 * step;
    let defect = density.mass_below(origin) + density.mass_above(right);
    if !(defect.is_finite() && defect >= 0.0) {
        return Err(Error::NonFiniteCellMass {
            a: f64::NEG_INFINITY,
            b: f64::INFINITY,
        });
    }
    GridDensity::new(origin, step, values, defect)
}

/// Where convolution results are cut off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportCap {
    /// Cells starting at or beyond this point go to the defect.
    pub x_max: f64,
    /// Hard limit on result length after cutting at `x_max`.
    pub max_cells: usize,
}

impl Default for SupportCap {
    fn default() -> Self {
        SupportCap {
            x_max: f64::INFINITY,
            max_cells: 1 << 24,
        }
    }
}

/// `x + y`, snapped to the step lattice when both lie on it so that origins do
/// not drift over long convolution chains.
fn lattice_sum(x: f64, y: f64, step: f64) -> f64 {
    let (kx, ky) = (x / step, y / step);
    if (kx - kx.round()).abs() < 1e-6 && (ky - ky.round()).abs() < 1e-6 {
        (kx.round() + ky.round()) * step
    } else {
        x + y
    }
}

/// Convolution engine: a backend plus a support cap.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    backend: &'static dyn ConvolutionBackend,
    cap: SupportCap,
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel {
            backend: &SpectralBackend,
            cap: SupportCap::default(),
        }
    }
}

impl Kernel {
    pub fn new(backend: &'static dyn ConvolutionBackend, cap: SupportCap) -> Self {
        Kernel { backend, cap }
    }

    /// Spectral kernel capped at the right edge of `grid`.
    pub fn for_grid(grid: &GridDensity) -> Self {
        Kernel::default().with_x_max(grid.right_edge())
    }

    pub fn by_name(name: &str, cap: SupportCap) -> Result<Self> {
        Ok(Kernel::new(*BACKENDS.get(name)?, cap))
    }

    pub fn with_x_max(mut self, x_max: f64) -> Self {
        self.cap.x_max = x_max;
        self
    }

    pub fn with_backend(mut self, backend: &'static dyn ConvolutionBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn cap(&self) -> SupportCap {
        self.cap
    }

    pub fn backend(&self) -> &'static dyn ConvolutionBackend {
        self.backend
    }

    /// Linear convolution `a ⊗ b`. The result starts at `a.origin + b.origin`.
    ///
    /// Defect accounting: `mass + defect` of the result equals the product of the
    /// inputs' `mass + defect`, with any cells cut at `x_max` moved into the defect.
    pub fn convolve(&self, a: &GridDensity, b: &GridDensity) -> Result<GridDensity> {
        check_same_step(a.step(), b.step())?;
        let step = a.step();
        let origin = lattice_sum(a.origin(), b.origin(), step);
        let total = a.total_mass() * b.total_mass();

        let raw = self.backend.linear(a.values(), b.values());
        let full_len = if raw.is_empty() { 0 } else { raw.len() + 1 };
        let keep = if self.cap.x_max.is_finite() {
            let cells = ((self.cap.x_max - origin) / step - 1e-9).ceil();
            (cells.max(0.0) as usize).min(full_len)
        } else {
            full_len
        };
        if keep > self.cap.max_cells {
            return Err(Error::SupportCap {
                cells: keep,
                cap: self.cap.max_cells,
            });
        }

        let mut values = Vec::with_capacity(keep);
        let mut clamped = 0.0;
        let mut kept_sum = 0.0;
        for k in 0..keep {
            let left = if k == 0 { 0.0 } else { raw[k - 1] };
            let right = if k < raw.len() { raw[k] } else { 0.0 };
            let v = 0.5 * step * (left + right);
            if v < 0.0 {
                clamped -= v;
                values.push(0.0);
            } else {
                kept_sum += v;
                values.push(v);
            }
        }
        let clamped_mass = clamped * step;
        if clamped_mass > CLAMP_LIMIT {
            return Err(Error::RoundoffClamp { mass: clamped_mass });
        }
        if clamped_mass > 0.0 {
            log::trace!("clamped {clamped_mass:e} of negative round-off mass");
        }
        let defect = (total - kept_sum * step).max(0.0);
        Ok(GridDensity::from_parts(origin, step, values, defect))
    }

    /// `f^{n⊗}` by binary exponentiation. `n = 1` returns `f` unchanged.
    pub fn conv_power(&self, f: &GridDensity, n: usize) -> Result<GridDensity> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "convolution power needs n >= 1".into(),
            ));
        }
        let mut n = n;
        let mut base = f.clone();
        let mut acc: Option<GridDensity> = None;
        loop {
            if n & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(r) => self.convolve(&r, &base)?,
                });
            }
            n >>= 1;
            if n == 0 {
                break;
            }
            base = self.convolve(&base, &base)?;
        }
        Ok(acc.expect("n >= 1 sets at least one bit"))
    }

    /// Successive powers `f, f⊗f, f^{3⊗}, ...`.
    ///
    /// Each step costs one convolution: `f^{n⊗} = f^{(n-2^j)⊗} ⊗ f^{2^j⊗}` with `2^j`
    /// the largest power of two not above `n`. Every power is therefore built by
    /// the same product tree as [`conv_power`](Self::conv_power) and matches it
    /// bit for bit. Earlier powers are kept, so memory grows with the number of
    /// terms drawn.
    pub fn powers<'a>(&'a self, f: &'a GridDensity) -> PowerLadder<'a> {
        PowerLadder {
            kernel: self,
            base: f,
            table: Vec::new(),
        }
    }

    /// Convolution of two atom-plus-density laws:
    /// `(a0 δ + A) * (b0 δ + B) = a0 b0 δ + a0 B + b0 A + A ⊗ B`.
    ///
    /// Both densities must start at or left of 0 so the cross terms fit on the
    /// product grid.
    pub fn convolve_atoms(
        &self,
        a: &AtomPlusDensity,
        b: &AtomPlusDensity,
    ) -> Result<AtomPlusDensity> {
        let mut out = self.convolve(a.density(), b.density())?;
        out.add_scaled(a.atom(), b.density())?;
        out.add_scaled(b.atom(), a.density())?;
        AtomPlusDensity::new(a.atom() * b.atom(), out)
    }

    /// Exact values of the given cells of `a ⊗ b`, by direct summation.
    ///
    /// Agrees with [`convolve`](Self::convolve) cell for cell before any
    /// cap is applied, without spectral round-off.
    pub fn convolve_cells(
        &self,
        a: &GridDensity,
        b: &GridDensity,
        cells: &[usize],
    ) -> Result<Vec<f64>> {
        check_same_step(a.step(), b.step())?;
        let (av, bv) = (a.values(), b.values());
        let node = |m: usize| -> f64 {
            // c[m] = sum_i a[i] b[m - i]
            if av.is_empty() || bv.is_empty() || m > av.len() + bv.len() - 2 {
                return 0.0;
            }
            let lo = m.saturating_sub(bv.len() - 1);
            let hi = m.min(av.len() - 1);
            (lo..=hi).map(|i| av[i] * bv[m - i]).sum()
        };
        Ok(cells
            .iter()
            .map(|&k| {
                let left = if k == 0 { 0.0 } else { node(k - 1) };
                0.5 * a.step() * (left + node(k))
            })
            .collect())
    }
}

/// Iterator over `f^{n⊗}` for `n = 1, 2, ...`.
pub struct PowerLadder<'a> {
    kernel: &'a Kernel,
    base: &'a GridDensity,
    // table[n - 1] = f^{n⊗}
    table: Vec<GridDensity>,
}

impl Iterator for PowerLadder<'_> {
    type Item = Result<GridDensity>;

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.table.len() + 1;
        let next = if n == 1 {
            Ok(self.base.clone())
        } else if n.is_power_of_two() {
            let half = &self.table[n / 2 - 1];
            self.kernel.convolve(half, half)
        } else {
            let high = 1usize << (usize::BITS - 1 - n.leading_zeros());
            self.kernel
                .convolve(&self.table[n - high - 1], &self.table[high - 1])
        };
        match next {
            Ok(g) => {
                self.table.push(g.clone());
                Some(Ok(g))
            }
            Err(e) => Some(Err(e)),
        }
    }
}
