use htcp_core::compound::{negbin_compound, poisson_compound, NegBinCompoundSpec, PoissonCompoundSpec};
use htcp_core::randomwalk::{spitzer_nu, WalkSpec};
use htcp_core::{FamilySpec, GridDensity, Kernel};
use proptest::prelude::*;

/// Random 64-cell probability grid with a small defect.
fn grid64() -> impl Strategy<Value = GridDensity> {
    (
        -20i32..20,
        prop::sample::select(vec![0.01, 0.05, 0.1]),
        prop::collection::vec(1e-3f64..1.0, 64),
        0.0f64..0.05,
    )
        .prop_map(|(k, step, raw, defect)| {
            let sum: f64 = raw.iter().sum();
            let scale = (1.0 - defect) / (sum * step);
            let values = raw.iter().map(|v| v * scale).collect();
            GridDensity::new(k as f64 * step, step, values, defect).unwrap()
        })
}

fn same_step(a: GridDensity, b: &GridDensity) -> GridDensity {
    let r = a.step() / b.step();
    let values = a.values().iter().map(|v| v * r).collect();
    GridDensity::new(a.origin() / a.step() * b.step(), b.step(), values, a.defect()).unwrap()
}

fn max_cell_diff(a: &GridDensity, b: &GridDensity) -> f64 {
    assert_eq!(a.len(), b.len());
    assert!((a.origin() - b.origin()).abs() < 1e-12);
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn convolution_conserves_mass(a in grid64(), b in grid64()) {
        let b = same_step(b, &a);
        let c = Kernel::default().convolve(&a, &b).unwrap();
        let expected = a.total_mass() * b.total_mass();
        prop_assert!((c.total_mass() - expected).abs() < 1e-9);
        let kept = a.mass() * b.mass();
        prop_assert!((c.defect() - (expected - kept)).abs() < 1e-12);
        prop_assert!(c.defect() >= a.defect() + b.defect() - a.defect() * b.defect() - 1e-12);
        prop_assert!(c.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn capped_convolution_moves_mass_to_defect(a in grid64(), b in grid64(), frac in 0.1f64..0.9) {
        let b = same_step(b, &a);
        let full = Kernel::default().convolve(&a, &b).unwrap();
        let x_max = full.origin() + frac * (full.right_edge() - full.origin());
        let capped = Kernel::default().with_x_max(x_max).convolve(&a, &b).unwrap();
        prop_assert!(capped.right_edge() <= x_max + a.step());
        prop_assert!((capped.total_mass() - full.total_mass()).abs() < 1e-9);
        prop_assert!(capped.defect() >= full.defect());
    }

    #[test]
    fn convolution_commutes(a in grid64(), b in grid64()) {
        let b = same_step(b, &a);
        let k = Kernel::default();
        let ab = k.convolve(&a, &b).unwrap();
        let ba = k.convolve(&b, &a).unwrap();
        prop_assert!(max_cell_diff(&ab, &ba) < 1e-12);
    }

    #[test]
    fn convolution_associates(a in grid64(), b in grid64(), c in grid64()) {
        let (b, c) = (same_step(b, &a), same_step(c, &a));
        let k = Kernel::default();
        let left = k.convolve(&k.convolve(&a, &b).unwrap(), &c).unwrap();
        let right = k.convolve(&a, &k.convolve(&b, &c).unwrap()).unwrap();
        prop_assert!(max_cell_diff(&left, &right) < 1e-8);
    }

    #[test]
    fn binary_power_matches_naive(a in grid64(), n in 1usize..=6) {
        let k = Kernel::default();
        let mut naive = a.clone();
        for _ in 1..n {
            naive = k.convolve(&naive, &a).unwrap();
        }
        let binary = k.conv_power(&a, n).unwrap();
        prop_assert!(max_cell_diff(&binary, &naive) < 1e-8);
        let ladder = k.powers(&a).nth(n - 1).unwrap().unwrap();
        prop_assert_eq!(ladder, binary);
    }

    #[test]
    fn csv_round_trips(a in grid64()) {
        prop_assert_eq!(GridDensity::from_csv(&a.to_csv()).unwrap(), a);
    }

    #[test]
    fn tail_plus_cdf_is_one(x in -5.0f64..50.0, which in 0usize..6) {
        let fams = [
            FamilySpec::exponential(1.3),
            FamilySpec::pareto(2.5),
            FamilySpec::weibull(0.5),
            FamilySpec::Lognormal { location: 0.2, scale: 0.8 },
            FamilySpec::CounterexampleG,
            FamilySpec::counterexample_mixture(),
        ];
        let f = &fams[which];
        prop_assert!((f.tail(x) + f.cdf(x) - 1.0).abs() < 1e-9);
        prop_assert!(f.tail(x + 0.5) <= f.tail(x));
    }

    #[test]
    fn compound_truncation_is_sound(lambda in 0.05f64..3.0, t in 0.2f64..2.0, log_tol in -12.0f64..-4.0) {
        let f = FamilySpec::pareto(2.5).discretize(0.0, 0.1, 300).unwrap();
        let tol = 10f64.powf(log_tol);
        let run = poisson_compound(&PoissonCompoundSpec { lambda, t, severity: f, tol }).unwrap();
        let total = run.report.residual_weight + run.density.mass() + run.density.defect();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(run.report.residual_weight < tol);
    }

    #[test]
    fn negbin_weights_sum_to_one(alpha in 0.2f64..4.0, lambda in 0.05f64..0.8) {
        let f = FamilySpec::exponential(1.0).discretize(0.0, 0.05, 400).unwrap();
        let run = negbin_compound(&NegBinCompoundSpec { alpha, lambda, severity: f, tol: 1e-10 }).unwrap();
        let total = run.report.residual_weight + run.density.mass() + run.density.defect();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn larger_drift_never_shrinks_the_atom(c in 1.2f64..3.0, extra in 0.05f64..1.0) {
        let atom = |shift: f64| {
            let fam = FamilySpec::exponential(1.0).shifted(-shift);
            let mut spec = WalkSpec::from_family(&fam, 0.05, 15.0).unwrap();
            spec.spitzer_depth = 60;
            (-spitzer_nu(&spec).unwrap().b_partial).exp()
        };
        prop_assert!(atom(c + extra) >= atom(c));
    }
}
