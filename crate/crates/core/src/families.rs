//! Parametric severity and step densities with exact cell integrals.
//!
//! The counterexample density is `g(x) = h(x - 1) / 2` with
//! `h(u) = 1 / (|u| ln(|u|)^2)` on `0 < |u| < 1/e`. It is a bounded-support
//! probability density that is unbounded at `x = 1` and not square
//! integrable. Its mass on `(0, u)` for `h` is `1 / ln(1/u)`, which is used for
//! every cell so no quadrature ever touches the singularity.

use std::f64::consts::{FRAC_1_SQRT_2, E};

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, Pareto};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};
use crate::grid::GridDensity;
use crate::kernel::{discretize, CellIntegral};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `rate * exp(-rate x)` on `[0, inf)`.
    Exponential { rate: f64 },
    /// Lomax form `(alpha/scale) (1 + x/scale)^(-alpha-1)` on `[0, inf)`.
    ParetoLomax {
        alpha: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `P(X > x) = exp(-(x/scale)^shape)`.
    Weibull {
        shape: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `ln X ~ N(location, scale^2)`.
    Lognormal { location: f64, scale: f64 },
    /// The unbounded, non-square-integrable density centred at 1.
    CounterexampleG,
    Uniform { lo: f64, hi: f64 },
    /// Law of `Y + shift`.
    Shifted { shift: f64, base: Box<FamilySpec> },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub family: FamilySpec,
}

fn one() -> f64 {
    1.0
}

/// `P(|U| < u)` for `U` with density `h` halved, i.e. `1 / ln(1/u)` for `0 < u < 1/e`.
fn counterexample_half_mass(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= (-1.0f64).exp() {
        1.0
    } else {
        -1.0 / u.ln()
    }
}

impl FamilySpec {
    pub fn exponential(rate: f64) -> Self {
        FamilySpec::Exponential { rate }
    }

    pub fn pareto(alpha: f64) -> Self {
        FamilySpec::ParetoLomax { alpha, scale: 1.0 }
    }

    pub fn weibull(shape: f64) -> Self {
        FamilySpec::Weibull { shape, scale: 1.0 }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        FamilySpec::Uniform { lo, hi }
    }

    pub fn shifted(self, shift: f64) -> Self {
        FamilySpec::Shifted {
            shift,
            base: Box::new(self),
        }
    }

    /// `phi = f/2 + g/2` with `f = pareto_lomax(2.5, 1)`.
    pub fn counterexample_mixture() -> Self {
        FamilySpec::Mixture {
            components: vec![
                MixtureComponent {
                    weight: 0.5,
                    family: FamilySpec::pareto(2.5),
                },
                MixtureComponent {
                    weight: 0.5,
                    family: FamilySpec::CounterexampleG,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        use FamilySpec::*;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            Exponential { rate } => positive("rate", *rate),
            ParetoLomax { alpha, scale } => {
                positive("scale", *scale)?;
                if !(*alpha > 1.0 && alpha.is_finite()) {
                    return Err(invalid(format!(
                        "pareto index must exceed 1 for a finite mean, got {alpha}"
                    )));
                }
                Ok(())
            }
            Weibull { shape, scale } => {
                positive("shape", *shape)?;
                positive("scale", *scale)
            }
            Lognormal { location, scale } => {
                positive("scale", *scale)?;
                if location.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("lognormal location must be finite"))
                }
            }
            CounterexampleG => Ok(()),
            Uniform { lo, hi } => {
                if lo.is_finite() && hi.is_finite() && lo < hi {
                    Ok(())
                } else {
                    Err(invalid(format!("uniform needs lo < hi, got [{lo}, {hi}]")))
                }
            }
            Shifted { shift, base } => {
                if !shift.is_finite() {
                    return Err(invalid("shift must be finite"));
                }
                base.validate()
            }
            Mixture { components } => {
                if components.is_empty() {
                    return Err(invalid("mixture needs at least one component"));
                }
                let mut sum = 0.0;
                for c in components {
                    positive("mixture weight", c.weight)?;
                    c.family.validate()?;
                    sum += c.weight;
                }
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("mixture weights sum to {sum}, not 1")));
                }
                Ok(())
            }
        }
    }

    /// Pointwise density.
    pub fn density(&self, x: f64) -> f64 {
        use FamilySpec::*;
        match self {
            Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            ParetoLomax { alpha, scale } => {
                if x < 0.0 {
                    0.0
                } else {
                    alpha / scale * (1.0 + x / scale).powf(-alpha - 1.0)
                }
            }
            Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let z = x / scale;
                    shape / scale * z.powf(shape - 1.0) * (-z.powf(*shape)).exp()
                }
            }
            Lognormal { location, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let z = (x.ln() - location) / scale;
                    (-0.5 * z * z).exp() / (x * scale * (2.0 * std::f64::consts::PI).sqrt())
                }
            }
            CounterexampleG => {
                let u = (x - 1.0).abs();
                if u <= 0.0 || u >= 1.0 / E {
                    0.0
                } else {
                    0.5 / (u * u.ln().powi(2))
                }
            }
            Uniform { lo, hi } => {
                if *lo <= x && x < *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Shifted { shift, base } => base.density(x - shift),
            Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.family.density(x))
                .sum(),
        }
    }

    /// Upper tail `P(X > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        use FamilySpec::*;
        match self {
            Exponential { rate } => (-rate * x.max(0.0)).exp(),
            ParetoLomax { alpha, scale } => (1.0 + x.max(0.0) / scale).powf(-alpha),
            Weibull { shape, scale } => (-(x.max(0.0) / scale).powf(*shape)).exp(),
            Lognormal { location, scale } => {
                if x <= 0.0 {
                    1.0
                } else {
                    0.5 * erfc((x.ln() - location) / scale * FRAC_1_SQRT_2)
                }
            }
            CounterexampleG => {
                let u = x - 1.0;
                if u >= 0.0 {
                    0.5 * (1.0 - counterexample_half_mass(u))
                } else {
                    0.5 * (1.0 + counterexample_half_mass(-u))
                }
            }
            Uniform { lo, hi } => ((hi - x) / (hi - lo)).clamp(0.0, 1.0),
            Shifted { shift, base } => base.tail(x - shift),
            Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.family.tail(x))
                .sum(),
        }
    }

    /// `P(X <= x)`, computed without cancellation near the lower support.
    pub fn cdf(&self, x: f64) -> f64 {
        use FamilySpec::*;
        match self {
            Exponential { rate } => -(-rate * x.max(0.0)).exp_m1(),
            ParetoLomax { alpha, scale } => -(-alpha * (x.max(0.0) / scale).ln_1p()).exp_m1(),
            Weibull { shape, scale } => -(-(x.max(0.0) / scale).powf(*shape)).exp_m1(),
            Lognormal { location, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    0.5 * erfc(-(x.ln() - location) / scale * FRAC_1_SQRT_2)
                }
            }
            CounterexampleG => 1.0 - self.tail(x),
            Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Shifted { shift, base } => base.cdf(x - shift),
            Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.family.cdf(x))
                .sum(),
        }
    }

    /// `integral of the density over (a, b)`.
    pub fn cell_mass(&self, a: f64, b: f64) -> f64 {
        use FamilySpec::*;
        if b <= a {
            return 0.0;
        }
        match self {
            Exponential { rate } => {
                let a = a.max(0.0);
                if b <= a {
                    return 0.0;
                }
                (-rate * a).exp() * -(-rate * (b - a)).exp_m1()
            }
            ParetoLomax { alpha, scale } => {
                let a = a.max(0.0);
                if b <= a {
                    return 0.0;
                }
                // tail(a) * (1 - ((s + a)/(s + b))^alpha)
                let ratio = ((b - a) / (scale + a)).ln_1p();
                (1.0 + a / scale).powf(-alpha) * -(-alpha * ratio).exp_m1()
            }
            Weibull { shape, scale } => {
                let a = a.max(0.0);
                if b <= a {
                    return 0.0;
                }
                let za = (a / scale).powf(*shape);
                let zb = (b / scale).powf(*shape);
                (-za).exp() * -(-(zb - za)).exp_m1()
            }
            Lognormal { .. } => {
                let a = a.max(0.0);
                if b <= a {
                    return 0.0;
                }
                if !b.is_finite() {
                    return self.tail(a);
                }
                let guess = self.density(0.5 * (a + b)) * (b - a);
                let target = (1e-10 * guess).max(1e-300);
                quadrature::double_exponential::integrate(|x| self.density(x), a, b, target)
                    .integral
                    .max(0.0)
            }
            CounterexampleG => {
                let (ua, ub) = (a - 1.0, b - 1.0);
                let signed = |u: f64| {
                    if u >= 0.0 {
                        counterexample_half_mass(u)
                    } else {
                        -counterexample_half_mass(-u)
                    }
                };
                0.5 * (signed(ub) - signed(ua))
            }
            Uniform { lo, hi } => (b.min(*hi) - a.max(*lo)).max(0.0) / (hi - lo),
            Shifted { shift, base } => base.cell_mass(a - shift, b - shift),
            Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.family.cell_mass(a, b))
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        use FamilySpec::*;
        match self {
            Exponential { rate } => 1.0 / rate,
            ParetoLomax { alpha, scale } => scale / (alpha - 1.0),
            Weibull { shape, scale } => scale * statrs::function::gamma::gamma(1.0 + 1.0 / shape),
            Lognormal { location, scale } => (location + 0.5 * scale * scale).exp(),
            CounterexampleG => 1.0,
            Uniform { lo, hi } => 0.5 * (lo + hi),
            Shifted { shift, base } => base.mean() + shift,
            Mixture { components } => components.iter().map(|c| c.weight * c.family.mean()).sum(),
        }
    }

    /// Whether `integral of density^2` is finite.
    pub fn square_integrable(&self) -> bool {
        use FamilySpec::*;
        match self {
            Exponential { .. } | ParetoLomax { .. } | Lognormal { .. } | Uniform { .. } => true,
            // density ~ x^(shape-1) at 0
            Weibull { shape, .. } => *shape > 0.5,
            CounterexampleG => false,
            Shifted { base, .. } => base.square_integrable(),
            Mixture { components } => components.iter().all(|c| c.family.square_integrable()),
        }
    }

    /// Left end of the support.
    pub fn support_lower(&self) -> f64 {
        use FamilySpec::*;
        match self {
            Exponential { .. } | ParetoLomax { .. } | Weibull { .. } | Lognormal { .. } => 0.0,
            CounterexampleG => 1.0 - 1.0 / E,
            Uniform { lo, .. } => *lo,
            Shifted { shift, base } => base.support_lower() + shift,
            Mixture { components } => components
                .iter()
                .map(|c| c.family.support_lower())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Draws one variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use FamilySpec::*;
        match self {
            Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            ParetoLomax { alpha, scale } => {
                Pareto::new(*scale, *alpha).expect("validated").sample(rng) - scale
            }
            Weibull { shape, scale } => rand_distr::Weibull::new(*scale, *shape).expect("validated").sample(rng),
            Lognormal { location, scale } => {
                LogNormal::new(*location, *scale).expect("validated").sample(rng)
            }
            CounterexampleG => {
                // |U| = exp(-1/v) has mass 1/ln(1/u) below u
                let v: f64 = rng.gen();
                let magnitude = (-1.0 / v).exp();
                if rng.gen::<bool>() {
                    1.0 + magnitude
                } else {
                    1.0 - magnitude
                }
            }
            Uniform { lo, hi } => rng.gen_range(*lo..*hi),
            Shifted { shift, base } => base.sample(rng) + shift,
            Mixture { components } => {
                let mut u: f64 = rng.gen();
                for c in components {
                    if u < c.weight {
                        return c.family.sample(rng);
                    }
                    u -= c.weight;
                }
                components
                    .last()
                    .expect("validated non-empty")
                    .family
                    .sample(rng)
            }
        }
    }

    /// Cell averages over `n_cells` cells from `origin`.
    pub fn discretize(&self, origin: f64, step: f64, n_cells: usize) -> Result<GridDensity> {
        self.validate()?;
        discretize(self, origin, step, n_cells)
    }
}

impl CellIntegral for FamilySpec {
    fn cell_mass(&self, a: f64, b: f64) -> f64 {
        FamilySpec::cell_mass(self, a, b)
    }

    fn mass_below(&self, x: f64) -> f64 {
        self.cdf(x)
    }

    fn mass_above(&self, x: f64) -> f64 {
        self.tail(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_families() -> Vec<FamilySpec> {
        vec![
            FamilySpec::exponential(1.3),
            FamilySpec::pareto(2.5),
            FamilySpec::ParetoLomax {
                alpha: 1.7,
                scale: 3.0,
            },
            FamilySpec::weibull(0.5),
            FamilySpec::Lognormal {
                location: 0.2,
                scale: 0.8,
            },
            FamilySpec::CounterexampleG,
            FamilySpec::uniform(-1.0, 2.0),
            FamilySpec::exponential(1.0).shifted(-2.0),
            FamilySpec::counterexample_mixture(),
        ]
    }

    #[test]
    fn cell_masses_partition_to_one() {
        for fam in all_families() {
            let lo = fam.support_lower() - 1.0;
            let mut edges: Vec<f64> = (0..=400).map(|i| lo + i as f64 * 0.05).collect();
            edges.push(f64::INFINITY);
            let inner: f64 = edges.windows(2).map(|w| fam.cell_mass(w[0], w[1])).sum();
            let total = inner + fam.cdf(lo);
            assert!((total - 1.0).abs() < 1e-9, "{fam:?}: {total}");
        }
    }

    #[test]
    fn tail_plus_cdf_is_one_and_tail_nonincreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for fam in all_families() {
            let mut xs: Vec<f64> = (0..20).map(|_| rng.gen_range(-3.0..50.0)).collect();
            xs.sort_by(f64::total_cmp);
            for w in xs.windows(2) {
                assert!(fam.tail(w[1]) <= fam.tail(w[0]) + 1e-15, "{fam:?}");
            }
            for x in xs {
                assert!((fam.tail(x) + fam.cdf(x) - 1.0).abs() < 1e-9, "{fam:?} at {x}");
            }
        }
    }

    #[test]
    fn documented_values() {
        let p = FamilySpec::pareto(2.5);
        assert!((p.cell_mass(0.0, 1.0) - (1.0 - 2f64.powf(-2.5))).abs() < 1e-15);
        assert!((p.tail(10.0) - 11f64.powf(-2.5)).abs() < 1e-18);
        assert!((p.mean() - 1.0 / 1.5).abs() < 1e-15);

        let e = FamilySpec::exponential(2.0);
        assert!((e.tail(3.0) - (-6.0f64).exp()).abs() < 1e-18);
        assert!((e.mean() - 0.5).abs() < 1e-15);

        let g = FamilySpec::CounterexampleG;
        let lo = 1.0 - (-1.0f64).exp();
        let hi = 1.0 + (-1.0f64).exp();
        assert!((g.cell_mass(lo, hi) - 1.0).abs() < 1e-15);
        assert_eq!(g.mean(), 1.0);
        assert!(!g.square_integrable());
        assert!(!FamilySpec::counterexample_mixture().square_integrable());
        assert!(FamilySpec::pareto(2.5).square_integrable());

        let mix = FamilySpec::Mixture {
            components: vec![
                MixtureComponent {
                    weight: 0.5,
                    family: FamilySpec::exponential(1.0),
                },
                MixtureComponent {
                    weight: 0.5,
                    family: FamilySpec::pareto(2.5),
                },
            ],
        };
        let expect = 0.5 * (-10.0f64).exp() + 0.5 * 11f64.powf(-2.5);
        assert!((mix.tail(10.0) - expect).abs() < 1e-18);
    }

    #[test]
    fn counterexample_cell_matches_quadrature() {
        // h-mass of (a, b) inside (0, 1/e) is 1/ln(1/b) - 1/ln(1/a)
        let h = |u: f64| 1.0 / (u * u.ln().powi(2));
        for &(a, b) in &[(0.01f64, 0.02f64), (0.1, 0.3), (0.2, 0.35)] {
            let exact = 1.0 / (1.0 / b).ln() - 1.0 / (1.0 / a).ln();
            let quad = quadrature::double_exponential::integrate(h, a, b, 1e-14).integral;
            assert!((exact - quad).abs() < 1e-10 * exact);
            let g = FamilySpec::CounterexampleG;
            assert!((2.0 * g.cell_mass(1.0 + a, 1.0 + b) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn counterexample_cells_blow_up_at_one() {
        let g = FamilySpec::CounterexampleG;
        let mut prev = 0.0;
        for step in [1e-2, 5e-3, 2.5e-3, 1.25e-3] {
            let grid = g.discretize(0.0, step, (2.0 / step) as usize).unwrap();
            let v = grid.cell_value_at(1.0);
            assert!(v > prev, "step {step}: {v} <= {prev}");
            prev = v;
        }
    }

    #[test]
    fn validation() {
        assert!(FamilySpec::pareto(1.0).validate().is_err());
        assert!(FamilySpec::exponential(0.0).validate().is_err());
        assert!(FamilySpec::uniform(1.0, 1.0).validate().is_err());
        let bad = FamilySpec::Mixture {
            components: vec![MixtureComponent {
                weight: 0.4,
                family: FamilySpec::exponential(1.0),
            }],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_shapes() {
        let p: FamilySpec =
            serde_json::from_str(r#"{"kind": "pareto_lomax", "alpha": 2.5, "scale": 1.0}"#).unwrap();
        assert_eq!(p, FamilySpec::pareto(2.5));
        let g: FamilySpec = serde_json::from_str(r#"{"kind": "counterexample_g"}"#).unwrap();
        assert_eq!(g, FamilySpec::CounterexampleG);
        let m: FamilySpec = serde_json::from_str(
            r#"{"kind": "mixture", "components": [
                {"weight": 0.5, "family": {"kind": "pareto_lomax", "alpha": 2.5}},
                {"weight": 0.5, "family": {"kind": "counterexample_g"}}]}"#,
        )
        .unwrap();
        assert_eq!(m, FamilySpec::counterexample_mixture());
        assert!(serde_json::from_str::<FamilySpec>(r#"{"kind": "exponential", "rate": 1, "x": 2}"#)
            .is_err());
    }

    #[test]
    fn sample_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for fam in [
            FamilySpec::exponential(2.0),
            FamilySpec::pareto(3.5),
            FamilySpec::CounterexampleG,
            FamilySpec::exponential(1.0).shifted(-2.0),
        ] {
            let n = 200_000;
            let m: f64 = (0..n).map(|_| fam.sample(&mut rng)).sum::<f64>() / n as f64;
            assert!((m - fam.mean()).abs() < 0.02, "{fam:?}: {m}");
        }
    }
}
