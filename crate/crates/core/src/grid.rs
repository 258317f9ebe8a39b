//! Cell-averaged densities on uniform grids.
//!
//! A [`GridDensity`] stores, for cell `i = [origin + i*step, origin + (i+1)*step)`,
//! the average of the density over that cell. Mass that a computation pushed
//! beyond the grid is kept in `defect` instead of being dropped, so
//! `step * sum(values) + defect` is the mass the grid stands for.
//!
//! Tail quantities computed from a grid treat the defect as mass lying beyond
//! the right edge, which is where every computation in this crate sends it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::families::FamilySpec;

/// Tolerance, in units of the step, when deciding whether a cell edge sits on a point.
const EDGE_EPS: f64 = 1e-9;

/// Uniform grid `[origin, origin + n_cells * step)` as given in a config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub origin: f64,
    pub step: f64,
    pub n_cells: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) || !self.origin.is_finite() {
            return Err(invalid(format!(
                "grid needs a finite origin and step > 0, got origin {} step {}",
                self.origin, self.step
            )));
        }
        if self.n_cells == 0 {
            return Err(invalid("grid needs at least one cell"));
        }
        Ok(())
    }

    pub fn right_edge(&self) -> f64 {
        self.origin + self.n_cells as f64 * self.step
    }

    pub fn discretize(&self, family: &FamilySpec) -> Result<GridDensity> {
        self.validate()?;
        family.discretize(self.origin, self.step, self.n_cells)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    origin: f64,
    step: f64,
    values: Vec<f64>,
    defect: f64,
}

impl GridDensity {
    pub fn new(origin: f64, step: f64, values: Vec<f64>, defect: f64) -> Result<Self> {
        if !origin.is_finite() {
            return Err(invalid(format!("grid origin must be finite, got {origin}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("grid step must be positive, got {step}")));
        }
        if !(defect >= 0.0 && defect.is_finite()) {
            return Err(invalid(format!("defect must be nonnegative, got {defect}")));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(invalid(format!("cell {i} has invalid value {v}")));
        }
        Ok(GridDensity {
            origin,
            step,
            values,
            defect,
        })
    }

    /// Builds a grid from values already known to satisfy the invariants.
    pub(crate) fn from_parts(origin: f64, step: f64, values: Vec<f64>, defect: f64) -> Self {
        debug_assert!(step > 0.0 && defect >= 0.0);
        debug_assert!(values.iter().all(|v| *v >= 0.0));
        GridDensity {
            origin,
            step,
            values,
            defect,
        }
    }

    pub fn zeros(origin: f64, step: f64, n_cells: usize) -> Result<Self> {
        GridDensity::new(origin, step, vec![0.0; n_cells], 0.0)
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x_left(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    pub fn center(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.step
    }

    pub fn right_edge(&self) -> f64 {
        self.x_left(self.values.len())
    }

    /// Probability mass held by the cells.
    pub fn mass(&self) -> f64 {
        self.step * self.values.iter().sum::<f64>()
    }

    /// Cell mass plus defect.
    pub fn total_mass(&self) -> f64 {
        self.mass() + self.defect
    }

    /// Index of the cell `[left, right)` containing `x`.
    pub fn cell_index(&self, x: f64) -> Option<usize> {
        if self.values.is_empty() || x < self.origin || x >= self.right_edge() {
            return None;
        }
        let k = ((x - self.origin) / self.step).floor() as usize;
        Some(k.min(self.values.len() - 1))
    }

    /// Cell average of the cell containing `x`, zero off the grid.
    pub fn cell_value_at(&self, x: f64) -> f64 {
        self.cell_index(x).map_or(0.0, |k| self.values[k])
    }

    /// Interpolation stencil `(k0, k1, w)` with value `(1-w)*v[k0] + w*v[k1]`.
    ///
    /// Values are linear between cell centers and constant in the outer half cells.
    pub fn interp_stencil(&self, x: f64) -> Option<(usize, usize, f64)> {
        self.cell_index(x)?;
        let n = self.values.len();
        let s = (x - self.origin) / self.step - 0.5;
        if s <= 0.0 {
            return Some((0, 0, 0.0));
        }
        let k0 = s.floor() as usize;
        if k0 + 1 >= n {
            return Some((n - 1, n - 1, 0.0));
        }
        Some((k0, k0 + 1, s - k0 as f64))
    }

    /// Pointwise density, linearly interpolated between cell centers.
    pub fn density_at(&self, x: f64) -> f64 {
        match self.interp_stencil(x) {
            None => 0.0,
            Some((k0, k1, w)) if k0 == k1 || w == 0.0 => self.values[k0],
            Some((k0, k1, w)) => (1.0 - w) * self.values[k0] + w * self.values[k1],
        }
    }

    /// Mass of the cells over `(lo, hi]`, partial cells weighted by overlap.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let right = self.right_edge();
        let lo = lo.max(self.origin);
        let hi = hi.min(right);
        if self.values.is_empty() || hi <= lo {
            return 0.0;
        }
        let last = self.values.len() - 1;
        let i0 = (((lo - self.origin) / self.step).floor() as usize).min(last);
        let i1 = (((hi - self.origin) / self.step).floor() as usize).min(last);
        if i0 == i1 {
            return self.values[i0] * (hi - lo);
        }
        let head = self.values[i0] * (self.x_left(i0 + 1) - lo);
        let body: f64 = self.values[i0 + 1..i1].iter().sum::<f64>() * self.step;
        let tail = self.values[i1] * (hi - self.x_left(i1));
        head + body + tail
    }

    /// Mass of `(x, x + c]`.
    pub fn interval_mass(&self, x: f64, c: f64) -> f64 {
        self.mass_between(x, x + c)
    }

    /// Cell mass to the right of `x`, excluding the defect.
    pub fn mass_above(&self, x: f64) -> f64 {
        self.mass_between(x, f64::INFINITY)
    }

    /// Tail `P(X > x)` with the defect counted as mass beyond the right edge.
    pub fn tail(&self, x: f64) -> f64 {
        self.mass_above(x) + self.defect
    }

    pub fn mass_below(&self, x: f64) -> f64 {
        self.mass_between(f64::NEG_INFINITY, x)
    }

    fn first_positive_cell(&self) -> usize {
        // first cell whose right edge lies strictly right of 0
        let tol = EDGE_EPS * self.step;
        (0..self.values.len())
            .find(|&i| self.x_left(i + 1) > tol)
            .unwrap_or(self.values.len())
    }

    /// Zeroes every cell whose right edge is at or left of 0. The defect is unchanged.
    pub fn restrict_positive(&self) -> GridDensity {
        let start = self.first_positive_cell();
        let mut values = self.values.clone();
        values[..start].iter_mut().for_each(|v| *v = 0.0);
        GridDensity::from_parts(self.origin, self.step, values, self.defect)
    }

    /// Like [`restrict_positive`](Self::restrict_positive) but drops the zeroed cells,
    /// so the result starts at the first cell reaching past 0.
    pub fn positive_part(&self) -> GridDensity {
        let start = self.first_positive_cell();
        GridDensity::from_parts(
            self.x_left(start),
            self.step,
            self.values[start..].to_vec(),
            self.defect,
        )
    }

    /// Multiplies cell values and defect by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<GridDensity> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(invalid(format!("scale factor must be nonnegative, got {factor}")));
        }
        Ok(GridDensity::from_parts(
            self.origin,
            self.step,
            self.values.iter().map(|v| v * factor).collect(),
            self.defect * factor,
        ))
    }

    /// `sum |a - b| * step` over the union of both supports. Grids must share step and
    /// be aligned.
    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        check_same_step(self.step, other.step)?;
        let offset = (other.origin - self.origin) / self.step;
        if (offset - offset.round()).abs() > EDGE_EPS * 1e3 {
            return Err(invalid("grids are not aligned"));
        }
        let offset = offset.round() as i64;
        let lo = 0.min(offset);
        let hi = (self.len() as i64).max(offset + other.len() as i64);
        let get = |g: &GridDensity, i: i64| -> f64 {
            if i >= 0 && (i as usize) < g.len() {
                g.values[i as usize]
            } else {
                0.0
            }
        };
        let sum: f64 = (lo..hi)
            .map(|i| (get(self, i) - get(other, i - offset)).abs())
            .sum();
        Ok(sum * self.step)
    }

    /// `sum over cells of (center * mass)` restricted to cells right of 0, plus the
    /// defect placed at the right edge.
    pub fn positive_first_moment(&self) -> f64 {
        let start = self.first_positive_cell();
        let cells: f64 = (start..self.len())
            .map(|i| self.center(i).max(0.0) * self.values[i])
            .sum::<f64>()
            * self.step;
        cells + self.defect * self.right_edge().max(0.0)
    }

    /// Adds `weight * other` in place. `other` must share the step, sit on the same
    /// lattice and not start left of `self`; its cells past the right edge, and its
    /// defect, are added to the defect.
    pub(crate) fn add_scaled(&mut self, weight: f64, other: &GridDensity) -> Result<()> {
        check_same_step(self.step, other.step)?;
        let offset = (other.origin - self.origin) / self.step;
        if (offset - offset.round()).abs() > EDGE_EPS * 1e3 || offset.round() < 0.0 {
            return Err(invalid("summand grid is not aligned with the target grid"));
        }
        let offset = offset.round() as usize;
        let mut spill = 0.0;
        for (i, &v) in other.values.iter().enumerate() {
            match self.values.get_mut(offset + i) {
                Some(slot) => *slot += weight * v,
                None => spill += v,
            }
        }
        self.defect += weight * (other.defect + spill * self.step);
        Ok(())
    }

    /// CSV with a `# origin=.. step=.. defect=..` line, a `x_left,value` header and
    /// one row per cell. Floats use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        self.to_csv_with(&[])
    }

    pub(crate) fn to_csv_with(&self, extra: &[(&str, f64)]) -> String {
        let mut out = String::with_capacity(32 * (self.values.len() + 2));
        let _ = write!(
            out,
            "# origin={} step={} defect={}",
            fmt_f64(self.origin),
            fmt_f64(self.step),
            fmt_f64(self.defect)
        );
        for (k, v) in extra {
            let _ = write!(out, " {k}={}", fmt_f64(*v));
        }
        out.push_str("\nx_left,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", fmt_f64(self.x_left(i)), fmt_f64(*v));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<GridDensity> {
        parse_csv(text).map(|(g, _)| g)
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        ryu::Buffer::new().format_finite(v).to_string()
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub(crate) fn check_same_step(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::StepMismatch(a, b));
    }
    Ok(())
}

fn parse_csv(text: &str) -> Result<(GridDensity, BTreeMap<String, f64>)> {
    let mut lines = text.lines();
    let meta_line = lines
        .next()
        .ok_or_else(|| Error::Csv("empty input".into()))?;
    let meta = meta_line
        .strip_prefix('#')
        .ok_or_else(|| Error::Csv("first line must be `# origin=.. step=.. defect=..`".into()))?;
    let mut fields = BTreeMap::new();
    for item in meta.split_whitespace() {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Csv(format!("bad metadata item `{item}`")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::Csv(format!("bad number in `{item}`")))?;
        fields.insert(k.to_string(), v);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::Csv(format!("missing `{k}` in metadata")))
    };
    let (origin, step, defect) = (get("origin")?, get("step")?, get("defect")?);
    match lines.next() {
        Some(h) if h.trim() == "x_left,value" => {}
        _ => return Err(Error::Csv("missing `x_left,value` header".into())),
    }
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (_, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Csv(format!("row {row}: expected two columns")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Csv(format!("row {row}: bad value")))?;
        values.push(v);
    }
    let grid = GridDensity::new(origin, step, values, defect)?;
    Ok((grid, fields))
}

/// `atom * delta_0 + density`, where `density` already carries weight `1 - atom`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomPlusDensity {
    atom: f64,
    density: GridDensity,
}

impl AtomPlusDensity {
    pub fn new(atom: f64, density: GridDensity) -> Result<Self> {
        if !(0.0..=1.0).contains(&atom) {
            return Err(invalid(format!("atom must lie in [0, 1], got {atom}")));
        }
        let total = atom + density.total_mass();
        if total > 1.0 + 1e-9 {
            return Err(invalid(format!("atom plus density carries mass {total} > 1")));
        }
        Ok(AtomPlusDensity { atom, density })
    }

    /// Point mass at the origin with an empty density on the given grid.
    pub fn dirac(origin: f64, step: f64, n_cells: usize) -> Result<Self> {
        AtomPlusDensity::new(1.0, GridDensity::zeros(origin, step, n_cells)?)
    }

    pub fn atom(&self) -> f64 {
        self.atom
    }

    pub fn density(&self) -> &GridDensity {
        &self.density
    }

    pub fn total_mass(&self) -> f64 {
        self.atom + self.density.total_mass()
    }

    /// Mass of `(x, x + c]`; the atom counts when `0` lies in the interval.
    pub fn interval_mass(&self, x: f64, c: f64) -> f64 {
        let atom = if x < 0.0 && 0.0 <= x + c {
            self.atom
        } else {
            0.0
        };
        atom + self.density.interval_mass(x, c)
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let atom = if x >= 0.0 { self.atom } else { 0.0 };
        atom + self.density.mass_below(x)
    }

    pub fn to_csv(&self) -> String {
        self.density.to_csv_with(&[("atom", self.atom)])
    }

    pub fn from_csv(text: &str) -> Result<AtomPlusDensity> {
        let (density, fields) = parse_csv(text)?;
        let atom = fields
            .get("atom")
            .copied()
            .ok_or_else(|| Error::Csv("missing `atom` in metadata".into()))?;
        AtomPlusDensity::new(atom, density)
    }
}
