//! Wall-clock cost per step.

use std::path::Path;
use std::time::Instant;

use super::{build_model, initial_ensemble, reference_scheme, scheme_for};
use crate::diagnostics::fmt_f64;
use crate::error::{Error, Result};
use crate::integrators::{Integrator, SchemeKind};
use crate::plan::SimPlan;

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub n: usize,
    pub scheme: SchemeKind,
    pub seconds_per_step: f64,
}

/// Seconds per step of each scheme at each `N`, the minimum over `repeats`
/// timed runs of `steps` steps after one untimed warm-up step.
///
/// Random-batch schemes use the plan's intra-batch method; `full` uses the
/// reference method of the model.
pub fn timing_benchmark(
    base: &SimPlan,
    ns: &[usize],
    schemes: &[SchemeKind],
    steps: u64,
    repeats: usize,
) -> Result<Vec<TimingRow>> {
    if steps == 0 || repeats == 0 {
        return Err(Error::param("steps and repeats must be at least 1"));
    }
    let mut rows = Vec::new();
    for &n in ns {
        let mut plan = base.clone();
        plan.n = n;
        if plan.model == "cluster" && plan.matrix.is_none() {
            plan.sizes = vec![n];
        }
        let built = build_model(&plan)?;
        let init = initial_ensemble(&built.model, n, plan.seed)?;
        for &kind in schemes {
            plan.scheme = kind;
            let scheme = if kind == SchemeKind::Full {
                reference_scheme(&built.model)
            } else {
                scheme_for(&plan, &built.model)?
            };
            let mut best = f64::INFINITY;
            for _ in 0..repeats {
                let mut ens = init.clone();
                let mut stepper = Integrator::new(&built.model, scheme.clone(), plan.tau, plan.seed, n)?;
                stepper.step(&mut ens)?;
                let start = Instant::now();
                stepper.advance(&mut ens, steps)?;
                best = best.min(start.elapsed().as_secs_f64() / steps as f64);
            }
            rows.push(TimingRow {
                n,
                scheme: kind,
                seconds_per_step: best,
            });
        }
    }
    Ok(rows)
}

/// `n,scheme,seconds_per_step` rows.
pub fn write_timing(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut s = String::from("n,scheme,seconds_per_step\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.n, r.scheme, fmt_f64(r.seconds_per_step)));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
