use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::WalkSpec;
use crate::error::{invalid, Error, Result};
use crate::families::FamilySpec;
use crate::grid::{fmt_f64, AtomPlusDensity};

/// Longest simulated path.
pub const PATH_CAP: u64 = 10_000_000;

/// `40 sqrt(x_max |mean|)`.
pub fn default_barrier(x_max: f64, mean: f64) -> f64 {
    40.0 * (x_max * mean.abs()).sqrt()
}

/// Empirical distribution of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut sample: Vec<f64>) -> Self {
        sample.sort_by(f64::total_cmp);
        Ecdf { sorted: sample }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sample(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of the sample `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// `sup_x |F_n(x) - F(x)|` against an atom-plus-density law.
    pub fn kolmogorov_distance(&self, law: &AtomPlusDensity) -> f64 {
        let n = self.sorted.len() as f64;
        let mut d = 1.0 - law.total_mass();
        let mut i = 0;
        while i < self.sorted.len() {
            let v = self.sorted[i];
            let before = i as f64 / n;
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == v {
                j += 1;
            }
            let after = j as f64 / n;
            let f = law.cdf(v);
            let f_minus = if v == 0.0 { f - law.atom() } else { f };
            d = d.max((after - f).abs()).max((before - f_minus).abs());
            i = j;
        }
        d
    }

    /// `x,F(x)` rows at the given points.
    pub fn to_csv(&self, xs: &[f64]) -> String {
        let mut out = String::from("x,cdf\n");
        for &x in xs {
            out.push_str(&fmt_f64(x));
            out.push(',');
            out.push_str(&fmt_f64(self.cdf(x)));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub maxima: Ecdf,
    /// Fraction of paths with a positive maximum.
    pub positive_fraction: f64,
    /// Fraction of paths whose maximum lies within `K/10` above the level
    /// `S_stop + K` reached at the barrier crossing, i.e. `M - S_stop < 1.1 K`.
    /// Such paths were still close to their running maximum when stopped.
    pub bias_fraction: f64,
    /// Estimated probability that a stopped path would still have exceeded its
    /// recorded maximum: the mean over paths of `P(M' > M - S_stop)`, where the
    /// future supremum `M'` after stopping is an independent copy of `M`,
    /// evaluated with the empirical distribution of the recorded maxima.
    pub escape_probability: f64,
    pub barrier: f64,
    pub mean_steps: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct PathOutcome {
    max: f64,
    stop: f64,
    steps: u64,
}

/// Simulates `spec.mc_paths` independent paths with steps drawn from `sampler`.
///
/// Path `i` draws from ChaCha8 seeded with `spec.seed` on stream `i`, so the
/// output does not depend on thread count or scheduling.
pub fn montecarlo_supremum(spec: &WalkSpec, sampler: &FamilySpec) -> Result<MonteCarloResult> {
    sampler.validate()?;
    if spec.mc_paths == 0 {
        return Err(invalid("Monte Carlo needs at least one path"));
    }
    if !(spec.mc_barrier > 0.0) {
        return Err(invalid("Monte Carlo barrier must be positive"));
    }
    let k = spec.mc_barrier;
    let outcomes: Vec<PathOutcome> = (0..spec.mc_paths)
        .into_par_iter()
        .map(|i| run_path(sampler, spec.seed, i, k))
        .collect::<Result<_>>()?;

    let n = outcomes.len() as f64;
    let positive = outcomes.iter().filter(|o| o.max > 0.0).count() as f64 / n;
    let near = outcomes
        .iter()
        .filter(|o| o.max - o.stop < 1.1 * k)
        .count() as f64
        / n;
    let mean_steps = outcomes.iter().map(|o| o.steps as f64).sum::<f64>() / n;
    let maxima = Ecdf::new(outcomes.iter().map(|o| o.max).collect());
    let escape = outcomes
        .iter()
        .map(|o| 1.0 - maxima.cdf(o.max - o.stop))
        .sum::<f64>()
        / n;
    Ok(MonteCarloResult {
        maxima,
        positive_fraction: positive,
        bias_fraction: near,
        escape_probability: escape,
        barrier: k,
        mean_steps,
    })
}

fn run_path(sampler: &FamilySpec, seed: u64, index: u64, barrier: f64) -> Result<PathOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let (mut s, mut m) = (0.0f64, 0.0f64);
    let mut steps = 0u64;
    while s >= -barrier {
        if steps == PATH_CAP {
            return Err(Error::PathCap { cap: PATH_CAP });
        }
        s += sampler.sample(&mut rng);
        m = m.max(s);
        steps += 1;
    }
    Ok(PathOutcome {
        max: m,
        stop: s,
        steps,
    })
}
