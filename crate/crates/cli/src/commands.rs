//! The four pipelines behind the subcommands.

use std::collections::BTreeMap;

use htcp_core::asymptotics::TailRatioReport;
use htcp_core::checks::{walk_on_grid, CheckContext};
use htcp_core::compound::compound_density;
use htcp_core::grid::fmt_f64;
use htcp_core::kernel::SupportCap;
use htcp_core::randomwalk::{
    montecarlo_supremum, spitzer_nu, supremum_from_ladder, supremum_from_nu,
};
use htcp_core::{GridSpec, Kernel, Result};
use serde_json::json;

use crate::config::Prepared;
use crate::output::Artifacts;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerdictFailed,
}

/// Most rows written for an empirical CDF.
const ECDF_ROWS: usize = 1000;

pub fn run(prepared: Prepared, art: &mut Artifacts, seed: Option<u64>) -> Result<Status> {
    match prepared {
        Prepared::Compound(c, series) => {
            let p = &c.params;
            let severity = c.grid.discretize(&c.family)?;
            let kernel = Kernel::by_name(&p.backend, SupportCap::default())?
                .with_x_max(severity.right_edge());
            let out = compound_density(series.as_ref(), &severity, p.tol, &kernel)?;
            art.write("density.csv", out.density.to_csv().as_bytes())?;
            let report = json!({
                "config_sha256": art.config_sha256(),
                "series": series.name(),
                "terms_used": out.report.terms_used,
                "residual_weight": out.report.residual_weight,
                "defect": out.report.defect,
                "mass": out.density.mass(),
            });
            art.write_json("report.json", &report)?;
            Ok(Status::Ok)
        }
        Prepared::Verify(c, check) => {
            let ctx = CheckContext {
                family: c.family,
                grid: c.grid,
                window: c.window,
                tolerances: c.tolerances,
            };
            let outcome = check.run(&ctx)?;
            let mut reports: BTreeMap<&str, &TailRatioReport> = BTreeMap::new();
            for (label, r) in &outcome.reports {
                art.write(&format!("{label}.csv"), r.to_csv().as_bytes())?;
                reports.insert(label, r);
            }
            if !reports.is_empty() {
                art.write_json("reports.json", &reports)?;
            }
            let verdict = json!({
                "config_sha256": art.config_sha256(),
                "check": outcome.check,
                "window": ctx.window,
                "tolerances": ctx.tolerances,
                "passed": outcome.passed,
                "verdicts": outcome.verdicts,
                "details": outcome.details,
            });
            art.write_json("verdict.json", &verdict)?;
            Ok(if outcome.passed {
                Status::Ok
            } else {
                Status::VerdictFailed
            })
        }
        Prepared::Walk(c) => {
            let spec = walk_on_grid(&c.family, &c.grid, c.params.spitzer_depth)?;
            let sr = spitzer_nu(&spec)?;
            let sup = supremum_from_nu(&sr)?;
            art.write("pi.csv", sup.pi.to_csv().as_bytes())?;
            let mut summary = json!({
                "config_sha256": art.config_sha256(),
                "mean": spec.mean,
                "spitzer_depth": spec.spitzer_depth,
                "b_partial": sr.b_partial,
                "tail_gap": sr.tail_gap,
                "lambda_rw": sup.lambda_rw,
                "atom": sup.pi.atom(),
                "nu_mass": sr.nu.mass(),
                "nu_defect": sr.nu.defect(),
                "per_n_positive_mass": sr.per_n_positive_mass,
            });
            if let Some(l) = &c.params.ladder {
                let h = c.grid.step;
                let ladder_grid = GridSpec {
                    origin: 0.0,
                    step: h,
                    n_cells: sup.pi.density().len(),
                };
                let f_plus = ladder_grid.discretize(&l.f_plus)?;
                let ladder = supremum_from_ladder(&f_plus, l.lambda_rw)?;
                art.write("pi_ladder.csv", ladder.pi.to_csv().as_bytes())?;
                summary["ladder"] = json!({
                    "lambda_rw": ladder.lambda_rw,
                    "atom": ladder.pi.atom(),
                    "density_l1_to_spitzer": ladder.pi.density().l1_distance(sup.pi.density())?,
                });
            }
            art.write_json("walk.json", &summary)?;
            Ok(Status::Ok)
        }
        Prepared::Simulate(c) => {
            let p = &c.params;
            let mut spec = walk_on_grid(&c.family, &c.grid, p.spitzer_depth)?;
            spec.mc_paths = p.paths;
            spec.seed = seed.unwrap_or(p.seed);
            if let Some(b) = p.barrier {
                spec.mc_barrier = b;
            }
            let mc = montecarlo_supremum(&spec, &c.family)?;
            let x_max = spec.x_max();
            let every = (x_max / c.grid.step / ECDF_ROWS as f64).ceil().max(1.0);
            let dx = every * c.grid.step;
            let xs: Vec<f64> = (0..)
                .map(|i| i as f64 * dx)
                .take_while(|&x| x <= x_max)
                .collect();
            art.write("ecdf.csv", mc.maxima.to_csv(&xs).as_bytes())?;
            let mut summary = json!({
                "config_sha256": art.config_sha256(),
                "paths": spec.mc_paths,
                "seed": spec.seed,
                "barrier": mc.barrier,
                "positive_fraction": mc.positive_fraction,
                "bias_fraction": mc.bias_fraction,
                "escape_probability": mc.escape_probability,
                "mean_steps": mc.mean_steps,
            });
            let mut status = Status::Ok;
            if let Some(tol) = p.compare_tolerance {
                let sr = spitzer_nu(&spec)?;
                let sup = supremum_from_nu(&sr)?;
                let distance = mc.maxima.kolmogorov_distance(&sup.pi);
                let n = mc.maxima.len() as f64;
                let se = (sup.lambda_rw * (1.0 - sup.lambda_rw) / n).sqrt();
                let passed = distance < tol;
                if !passed {
                    status = Status::VerdictFailed;
                }
                summary["comparison"] = json!({
                    "kolmogorov": distance,
                    "tolerance": tol,
                    "lambda_rw": sup.lambda_rw,
                    "positive_fraction_z": if se > 0.0 {
                        (mc.positive_fraction - sup.lambda_rw) / se
                    } else {
                        0.0
                    },
                    "passed": passed,
                });
            }
            art.write_json("montecarlo.json", &summary)?;
            log::info!("simulated {} paths, barrier {}", spec.mc_paths, fmt_f64(mc.barrier));
            Ok(status)
        }
    }
}
