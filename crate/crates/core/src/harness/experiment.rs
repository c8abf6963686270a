//! Plan-driven runs with file output.

use std::path::{Path, PathBuf};

use super::{build_model, initial_ensemble, scheme_for, BuiltModel};
use crate::diagnostics::{
    cluster_score, dyson_quantile, fmt_f64, neighbor_counts, sphere_energy, wasserstein_to_law,
    write_records, DiagnosticRecord, Histogram, InverseGamma, DEFAULT_BINS,
};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::integrators::{steps_for, Integrator};
use crate::models::{labels_from_gaps, GroundTruthLabels};
use crate::plan::SimPlan;

/// Gap factor used to read clusters off 1-D positions.
pub const CLUSTER_GAP_FACTOR: f64 = 5.0;

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub records: Vec<DiagnosticRecord>,
    pub final_state: ParticleEnsemble,
    pub steps: u64,
    /// Cluster labels read from the terminal positions (clustering model only).
    pub labels: Option<GroundTruthLabels>,
    /// Agreement of `labels` with the generating partition, when one is known.
    pub ari: Option<f64>,
    pub files: Vec<PathBuf>,
}

fn first_coords(ens: &ParticleEnsemble) -> Vec<f64> {
    ens.positions().chunks(ens.dim()).map(|c| c[0]).collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
}

struct Recorder<'a> {
    plan: &'a SimPlan,
    built: &'a BuiltModel,
    wealth_law: Option<InverseGamma>,
}

impl Recorder<'_> {
    fn record(&self, ens: &ParticleEnsemble) -> Result<DiagnosticRecord> {
        let mut r = DiagnosticRecord::new(ens.time);
        let xs = first_coords(ens);
        let (mean, var) = mean_var(&xs);
        match self.plan.model.as_str() {
            "thomson" => {
                r.push("energy", sphere_energy(ens)?);
                let counts = neighbor_counts(ens)?;
                let good = counts.iter().filter(|&&c| c == 5 || c == 6).count();
                r.push("frac_5_6", good as f64 / counts.len() as f64);
            }
            "dyson" => {
                r.push("mean", mean);
                r.push("variance", var);
                if self.plan.params.get("beta").copied().unwrap_or(1.0) == 1.0 {
                    r.push("w1", wasserstein_to_law(&xs, |u| dyson_quantile(u, ens.time), 1)?);
                }
            }
            "wealth" => {
                r.push("mean", mean);
                r.push("variance", var);
                if let Some(law) = self.wealth_law {
                    r.push("w1", wasserstein_to_law(&xs, |u| law.quantile(u), 1)?);
                }
            }
            "opinion" | "cluster" => {
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                r.push("mean", mean);
                r.push("spread", hi - lo);
                let labels = labels_from_gaps(&xs, CLUSTER_GAP_FACTOR);
                r.push("clusters", labels.cluster_count() as f64);
                if let Some(truth) = &self.built.truth {
                    r.push("ari", cluster_score(&labels, truth)?);
                }
            }
            _ => {
                r.push("mean", mean);
                r.push("variance", var);
                if let Some(v) = ens.velocities() {
                    r.push("kinetic", 0.5 * v.iter().map(|x| x * x).sum::<f64>() / ens.n() as f64);
                }
            }
        }
        Ok(r)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// File name of the histogram written at time `t`.
pub fn histogram_name(t: f64) -> String {
    format!("hist_t{t}.csv")
}

/// Times at which a plan records metrics: `0`, every `record_every`, and `t_end`.
fn record_steps(plan: &SimPlan) -> Vec<u64> {
    let total = plan.steps();
    let mut steps = vec![0, total];
    if plan.record_every > 0.0 {
        let every = steps_for(plan.record_every, plan.tau).max(1);
        steps.extend((every..total).step_by(every as usize));
    }
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// Runs a plan, recording metrics along the way.
///
/// With `plan.out` set, the run directory receives `plan.cfg`, `metrics.csv`,
/// one `hist_t<t>.csv` per snapshot, and for the clustering model
/// `labels.txt` and `trace.csv`. A `status` file reads `running` until the run
/// finishes and `complete` afterwards; a failed run leaves `failed: <reason>`
/// next to the outputs written so far.
pub fn run_experiment(plan: &SimPlan) -> Result<ExperimentSummary> {
    plan.validate()?;
    let built = build_model(plan)?;
    let scheme = scheme_for(plan, &built.model)?;
    let dir = plan.out.clone();
    if let Some(dir) = &dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_text(&dir.join("status"), "running\n")?;
        let meta = format!(
            "# rbm-core {}\n# git {}\n# seed {}\n{}",
            env!("CARGO_PKG_VERSION"),
            git_describe(),
            plan.seed,
            plan.to_config()
        );
        write_text(&dir.join("plan.cfg"), &meta)?;
    }
    let outcome = drive(plan, &built, scheme, dir.as_deref());
    if let Some(dir) = &dir {
        let status = match &outcome {
            Ok(_) => "complete\n".to_string(),
            Err(e) => format!("failed: {e}\n"),
        };
        write_text(&dir.join("status"), &status)?;
    }
    outcome
}

fn drive(
    plan: &SimPlan,
    built: &BuiltModel,
    scheme: crate::integrators::StepScheme,
    dir: Option<&Path>,
) -> Result<ExperimentSummary> {
    let mut ens = initial_ensemble(&built.model, plan.n, plan.seed)?;
    let wealth_law = if plan.model == "wealth" {
        let eta = first_coords(&ens).iter().sum::<f64>() / plan.n as f64;
        Some(InverseGamma::wealth(plan.params["kappa"], plan.params["diffusion"], eta)?)
    } else {
        None
    };
    let recorder = Recorder {
        plan,
        built,
        wealth_law,
    };
    let mut stepper = Integrator::new(&built.model, scheme, plan.tau, plan.seed, plan.n)?;

    let records_at = record_steps(plan);
    let mut snaps: Vec<(u64, f64)> = plan.snapshots.iter().map(|&t| (steps_for(t, plan.tau), t)).collect();
    snaps.sort_by(|a, b| a.0.cmp(&b.0));
    let mut events: Vec<u64> = records_at.iter().copied().chain(snaps.iter().map(|s| s.0)).collect();
    events.sort_unstable();
    events.dedup();

    let cluster = plan.model == "cluster";
    let mut records = Vec::new();
    let mut files = Vec::new();
    let mut trace = String::from("time,particle,position\n");
    let mut failure = None;
    for &target in &events {
        if let Err(e) = stepper.advance(&mut ens, target - stepper.steps_taken()) {
            failure = Some(e);
            break;
        }
        if records_at.binary_search(&target).is_ok() {
            let record = recorder.record(&ens)?;
            if !record.is_finite() {
                failure = Some(Error::param(format!("metrics overflowed at t = {}", ens.time)));
                break;
            }
            records.push(record);
            if cluster {
                for (i, x) in first_coords(&ens).iter().enumerate() {
                    trace.push_str(&format!("{},{},{}\n", fmt_f64(ens.time), i, fmt_f64(*x)));
                }
            }
        }
        for &(_, t) in snaps.iter().filter(|s| s.0 == target) {
            if let Some(dir) = dir {
                let path = dir.join(histogram_name(t));
                Histogram::from_samples(&first_coords(&ens), DEFAULT_BINS)?.write_csv(&path)?;
                files.push(path);
            }
        }
    }

    if let Some(dir) = dir {
        let path = dir.join("metrics.csv");
        write_records(&path, &records)?;
        files.push(path);
        if cluster {
            let path = dir.join("trace.csv");
            write_text(&path, &trace)?;
            files.push(path);
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }

    let (labels, ari) = if cluster {
        let labels = labels_from_gaps(&first_coords(&ens), CLUSTER_GAP_FACTOR);
        let ari = match &built.truth {
            Some(t) => Some(cluster_score(&labels, t)?),
            None => None,
        };
        if let Some(dir) = dir {
            let path = dir.join("labels.txt");
            labels.write(&path)?;
            files.push(path);
        }
        (Some(labels), ari)
    } else {
        (None, None)
    };

    Ok(ExperimentSummary {
        records,
        steps: stepper.steps_taken(),
        final_state: ens,
        labels,
        ari,
        files,
    })
}
