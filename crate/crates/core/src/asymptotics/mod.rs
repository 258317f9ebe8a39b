//! Finite-window evidence for tail equivalences `a(x) ~ b(x)`.
//!
//! A limit is read off a window `[x_lo, x_hi]` as the median ratio over the
//! last quartile of sample points. Convergence is judged by the maximum
//! deviation from that value in each quartile, which must not grow (up to a
//! slack) as the quartiles move outward.

mod ratios;

pub use ratios::{
    blowup_probe, corollary11_scaling, kesten_scan, local_subexp_check, long_tail_check,
    negbin_pgf_derivative, nfold_check, pointwise_convolution, sstar_check, subexp_check,
    theorem11_ratio, theorem41_ratio, BlowupRow, KestenReport, SERIES_TOL,
};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Geometric,
    Arithmetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TailWindow {
    pub x_lo: f64,
    pub x_hi: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

fn default_points() -> usize {
    64
}

impl TailWindow {
    pub fn new(x_lo: f64, x_hi: f64) -> Self {
        TailWindow {
            x_lo,
            x_hi,
            n_points: default_points(),
            spacing: Spacing::Geometric,
        }
    }

    pub fn with_points(mut self, n_points: usize) -> Self {
        self.n_points = n_points;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_lo > 0.0 && self.x_lo < self.x_hi && self.x_hi.is_finite()) {
            return Err(invalid(format!(
                "window needs 0 < x_lo < x_hi, got [{}, {}]",
                self.x_lo, self.x_hi
            )));
        }
        if self.n_points < 8 {
            return Err(invalid(format!(
                "window needs at least 8 points, got {}",
                self.n_points
            )));
        }
        Ok(())
    }

    /// Errors unless `x_hi + offset` stays within `edge`.
    pub fn check_within(&self, offset: f64, edge: f64) -> Result<()> {
        self.validate()?;
        if self.x_hi + offset > edge * (1.0 + 1e-12) {
            return Err(Error::WindowOutsideGrid {
                x_lo: self.x_lo,
                x_hi: self.x_hi,
                offset,
                edge,
            });
        }
        Ok(())
    }

    /// Sample points in increasing order, both ends included.
    pub fn points(&self) -> Vec<f64> {
        let n = self.n_points;
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                let s = i as f64 / last;
                match self.spacing {
                    Spacing::Arithmetic => self.x_lo + s * (self.x_hi - self.x_lo),
                    Spacing::Geometric => self.x_lo * (self.x_hi / self.x_lo).powf(s),
                }
            })
            .map(|x| x.min(self.x_hi))
            .collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        TailWindow {
            x_lo: self.x_lo * s,
            x_hi: self.x_hi * s,
            ..*self
        }
    }
}

/// Acceptance tolerances and window hygiene limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative band for `f(x + a) / f(x) -> 1`.
    pub long_tail: f64,
    /// Relative band for `f^{n⊗} / f -> n` and its local analogue.
    pub subexponential: f64,
    /// Relative band for the compound constants.
    pub theorem: f64,
    /// Relative band for the strong-subexponential integral test.
    pub sstar: f64,
    /// Relative band for the supremum tail law of a random walk.
    pub supremum: f64,
    /// Allowed growth of the quartile deviation from one quartile to the next.
    pub trend_slack: f64,
    /// Denominators below this are excluded.
    pub denominator_floor: f64,
    /// Largest excluded fraction before the window is rejected.
    pub max_excluded: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            long_tail: 0.02,
            subexponential: 0.05,
            theorem: 0.05,
            sstar: 0.10,
            supremum: 0.20,
            trend_slack: 0.10,
            denominator_floor: 1e-300,
            max_excluded: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRatioReport {
    pub window: TailWindow,
    pub samples: Vec<(f64, f64)>,
    pub excluded: usize,
    pub limit_estimate: f64,
    pub max_abs_dev: f64,
    pub quartile_devs: [f64; 4],
    pub trend_ok: bool,
}

impl TailRatioReport {
    /// Builds a report from numerator and denominator values at `xs`.
    pub fn from_parts(
        window: TailWindow,
        xs: &[f64],
        num: &[f64],
        den: &[f64],
        tol: &Tolerances,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(xs.len());
        let mut excluded = 0;
        for ((&x, &n), &d) in xs.iter().zip(num).zip(den) {
            if d.is_finite() && d >= tol.denominator_floor && n.is_finite() {
                samples.push((x, n / d));
            } else {
                excluded += 1;
            }
        }
        if excluded as f64 > tol.max_excluded * xs.len() as f64 || samples.len() < 4 {
            return Err(Error::DenominatorUnderflow {
                excluded,
                total: xs.len(),
            });
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::summarize(window, samples, excluded, tol.trend_slack))
    }

    fn summarize(
        window: TailWindow,
        samples: Vec<(f64, f64)>,
        excluded: usize,
        slack: f64,
    ) -> Self {
        let n = samples.len();
        let bounds: Vec<usize> = (0..=4).map(|q| q * n / 4).collect();
        let quartile = |q: usize| &samples[bounds[q]..bounds[q + 1]];

        let mut last: Vec<f64> = quartile(3).iter().map(|s| s.1).collect();
        last.sort_by(f64::total_cmp);
        let m = last.len();
        let limit = if m % 2 == 1 {
            last[m / 2]
        } else {
            0.5 * (last[m / 2 - 1] + last[m / 2])
        };

        let mut devs = [0.0; 4];
        for (q, d) in devs.iter_mut().enumerate() {
            *d = quartile(q)
                .iter()
                .map(|s| (s.1 - limit).abs())
                .fold(0.0, f64::max);
        }
        let floor = 1e-12 * limit.abs();
        let trend_ok = limit > 0.0
            && limit.is_finite()
            && devs.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack) + floor);

        TailRatioReport {
            window,
            samples,
            excluded,
            limit_estimate: limit,
            max_abs_dev: devs[3],
            quartile_devs: devs,
            trend_ok,
        }
    }

    /// Whether the limit lies within `expected * (1 ± tol)` with a settled trend.
    pub fn verdict(&self, label: &str, expected: f64, tol: f64) -> Verdict {
        let rel = (self.limit_estimate / expected - 1.0).abs();
        Verdict {
            label: label.to_string(),
            expected,
            tolerance: tol,
            limit_estimate: self.limit_estimate,
            max_abs_dev: self.max_abs_dev,
            trend_ok: self.trend_ok,
            passed: self.trend_ok && rel <= tol,
        }
    }

    /// `x,ratio` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,ratio\n");
        for (x, r) in &self.samples {
            out.push_str(&fmt_f64(*x));
            out.push(',');
            out.push_str(&fmt_f64(*r));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub label: String,
    pub expected: f64,
    pub tolerance: f64,
    pub limit_estimate: f64,
    pub max_abs_dev: f64,
    pub trend_ok: bool,
    pub passed: bool,
}
