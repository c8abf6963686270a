//! Experiment orchestration: coupled convergence studies, plan-driven runs with
//! file output, timing, and the enumeration check of the batch statistic.

mod experiment;
mod timing;

use std::path::Path;
use std::sync::Arc;

pub use experiment::{run_experiment, ExperimentSummary};
pub use timing::{timing_benchmark, write_timing, TimingRow};

use crate::batching::{chi_moments_bruteforce, chi_variance_formula};
use crate::diagnostics::{fmt_f64, trajectory_error};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::integrators::{steps_for, BatchSampler, Integrator, Intra, SchemeKind, StepScheme};
use crate::model::InteractionModel;
use crate::models::{
    make_model, model_test1d, read_matrix_market, sample_initial, sbm_generate, AdjacencyMatrix,
    GroundTruthLabels, ModelContext,
};
use crate::plan::{SamplerChoice, SimPlan};
use crate::rng::{derive_stream, stream_id, tag};

/// A plan's model together with the graph inputs of the clustering model.
#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub model: InteractionModel,
    pub adjacency: Option<Arc<AdjacencyMatrix>>,
    pub truth: Option<GroundTruthLabels>,
}

/// Builds the model of a plan. The clustering model reads its matrix file or
/// draws a stochastic block model from stream `(GRAPH, 0)`.
pub fn build_model(plan: &SimPlan) -> Result<BuiltModel> {
    plan.validate()?;
    let (adjacency, truth) = if plan.model == "cluster" {
        let (adj, truth) = match &plan.matrix {
            Some(path) => (read_matrix_market(path)?, None),
            None => {
                let mut rng = derive_stream(plan.seed, stream_id(tag::GRAPH, 0));
                let (adj, truth) = sbm_generate(&plan.sizes, plan.p_in, plan.q_out, &mut rng)?;
                (adj, Some(truth))
            }
        };
        (Some(Arc::new(adj)), truth)
    } else {
        (None, None)
    };
    let ctx = ModelContext {
        n: plan.n,
        adjacency: adjacency.clone(),
    };
    let model = make_model(&plan.model, &plan.params, &ctx)?;
    if model.pairwise_only
        && plan.p != 2
        && !matches!(plan.intra, Intra::Euler | Intra::EulerMaruyama)
    {
        return Err(Error::param(format!("model {} is pairwise: p must be 2", model.name)));
    }
    Ok(BuiltModel {
        model,
        adjacency,
        truth,
    })
}

/// Initial data of a plan, from stream `(INIT, 0)`.
pub fn initial_ensemble(model: &InteractionModel, n: usize, seed: u64) -> Result<ParticleEnsemble> {
    sample_initial(model, n, &mut derive_stream(seed, stream_id(tag::INIT, 0)))
}

/// The step scheme a plan asks for.
pub fn scheme_for(plan: &SimPlan, model: &InteractionModel) -> Result<StepScheme> {
    let mut scheme = StepScheme::new(model, plan.scheme, plan.intra, plan.p)
        .with_parallel(plan.threads > 1 && plan.scheme == SchemeKind::Rbm1);
    if plan.sampler == SamplerChoice::Edges {
        scheme = scheme.with_sampler(BatchSampler::edges_of(model)?);
    }
    scheme.validate(model, plan.n)?;
    Ok(scheme)
}

/// Fully coupled reference scheme for a model: Euler, or Verlet for second-order models.
pub fn reference_scheme(model: &InteractionModel) -> StepScheme {
    let intra = if model.second_order {
        Intra::Verlet
    } else {
        Intra::Euler
    };
    StepScheme::new(model, SchemeKind::Full, intra, 2)
}

fn refinement(tau: f64, reference_tau: f64) -> Result<u64> {
    let r = tau / reference_tau;
    if !(r >= 1.0) || (r - r.round()).abs() > 1e-9 * r {
        return Err(Error::param(format!(
            "reference step {reference_tau} does not divide {tau}"
        )));
    }
    Ok(r.round() as u64)
}

/// Runs the fully coupled reference at `reference_tau` from the plan's initial
/// data and returns the states at `times`.
pub fn reference_states(
    model: &InteractionModel,
    init: &ParticleEnsemble,
    seed: u64,
    reference_tau: f64,
    times: &[f64],
) -> Result<Vec<ParticleEnsemble>> {
    let mut ens = init.clone();
    let mut stepper = Integrator::new(model, reference_scheme(model), reference_tau, seed, ens.n())?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let target = steps_for(t, reference_tau);
        stepper.advance(&mut ens, target.saturating_sub(stepper.steps_taken()))?;
        out.push(ens.clone());
    }
    Ok(out)
}

/// Runs the plan's scheme with noise aggregated from the reference grid and
/// returns `E(t)` against the reference states at each of `times`.
#[allow(clippy::too_many_arguments)]
fn coupled_errors(
    plan: &SimPlan,
    model: &InteractionModel,
    init: &ParticleEnsemble,
    reference: &[ParticleEnsemble],
    reference_tau: f64,
    times: &[f64],
    batch_seed: u64,
) -> Result<Vec<f64>> {
    let refine = refinement(plan.tau, reference_tau)?;
    let scheme = scheme_for(plan, model)?;
    let mut stepper = Integrator::new(model, scheme, plan.tau, plan.seed, plan.n)?
        .with_noise_refinement(refine)?
        .with_batch_seed(batch_seed);
    let mut ens = init.clone();
    let mut errors = Vec::with_capacity(times.len());
    for (&t, r) in times.iter().zip(reference) {
        let target = steps_for(t, plan.tau);
        stepper.advance(&mut ens, target.saturating_sub(stepper.steps_taken()))?;
        errors.push(trajectory_error(&ens, r)?);
    }
    Ok(errors)
}

/// `E(t)` between the plan's scheme and the fully coupled reference at each of
/// `times`, sharing initial data and Brownian increments.
pub fn run_coupled_at(plan: &SimPlan, reference_tau: f64, times: &[f64]) -> Result<Vec<f64>> {
    refinement(plan.tau, reference_tau)?;
    let built = build_model(plan)?;
    let init = initial_ensemble(&built.model, plan.n, plan.seed)?;
    let reference = reference_states(&built.model, &init, plan.seed, reference_tau, times)?;
    coupled_errors(plan, &built.model, &init, &reference, reference_tau, times, plan.seed)
}

/// `E(T)` between the plan's scheme and the fully coupled reference.
pub fn run_coupled(plan: &SimPlan, reference_tau: f64) -> Result<f64> {
    Ok(run_coupled_at(plan, reference_tau, &[plan.t_end])?[0])
}

/// Errors of one scheme over a grid of step sizes at fixed `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub model: String,
    pub n: usize,
    pub p: usize,
    pub t_end: f64,
    /// Strictly decreasing.
    pub taus: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log2 E` against `log2 tau`; absent for a single step size.
    pub fitted_slope: Option<f64>,
}

/// Ordinary least-squares slope of `log2 y` on `log2 x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log2()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log2()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    slope.is_finite().then_some(slope)
}

/// Coupled runs over every `N` in `ns` and every step in `taus`.
///
/// The reference is computed once per `N`. Each reported error is the root
/// mean square of `E(T)` over `replicas` runs that share initial data and noise
/// and differ only in their batches.
pub fn convergence_study(
    base: &SimPlan,
    ns: &[usize],
    taus: &[f64],
    reference_tau: f64,
    replicas: usize,
) -> Result<Vec<ConvergenceReport>> {
    if taus.is_empty() || ns.is_empty() {
        return Err(Error::param("convergence study needs at least one N and one tau"));
    }
    if replicas == 0 {
        return Err(Error::param("replicas must be at least 1"));
    }
    let mut taus = taus.to_vec();
    taus.sort_by(|a, b| b.total_cmp(a));
    taus.dedup();
    if let Some(t) = taus.iter().find(|&&t| !(t > 0.0 && t <= base.t_end)) {
        return Err(Error::param(format!("step {t} outside (0, T]")));
    }
    for &t in &taus {
        refinement(t, reference_tau)?;
    }
    let mut reports = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut plan = base.clone();
        plan.n = n;
        let built = build_model(&plan)?;
        let init = initial_ensemble(&built.model, n, plan.seed)?;
        let times = [plan.t_end];
        let reference = reference_states(&built.model, &init, plan.seed, reference_tau, &times)?;
        let mut errors = Vec::with_capacity(taus.len());
        for &tau in &taus {
            plan.tau = tau;
            let mut sq = 0.0;
            for r in 0..replicas as u64 {
                let batch_seed = plan.seed.wrapping_add(r.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let e = coupled_errors(&plan, &built.model, &init, &reference, reference_tau, &times, batch_seed)?[0];
                sq += e * e;
            }
            errors.push((sq / replicas as f64).sqrt());
        }
        if let Some(i) = errors.iter().position(|e| !(*e > 0.0)) {
            return Err(Error::param(format!(
                "error at tau = {} is {}, cannot fit a slope",
                taus[i], errors[i]
            )));
        }
        reports.push(ConvergenceReport {
            model: base.model.clone(),
            n,
            p: base.p,
            t_end: base.t_end,
            fitted_slope: fit_slope(&taus, &errors),
            taus: taus.clone(),
            errors,
        });
    }
    Ok(reports)
}

/// `model,n,p,t_end,tau,error` rows followed by nothing else; slopes go to
/// [`write_slopes`].
pub fn write_convergence(path: &Path, reports: &[ConvergenceReport]) -> Result<()> {
    let mut s = String::from("model,n,p,t_end,tau,error\n");
    for r in reports {
        for (t, e) in r.taus.iter().zip(&r.errors) {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.model,
                r.n,
                r.p,
                fmt_f64(r.t_end),
                fmt_f64(*t),
                fmt_f64(*e)
            ));
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// `n,slope` rows; an absent slope is written as an empty field.
pub fn write_slopes(path: &Path, reports: &[ConvergenceReport]) -> Result<()> {
    let mut s = String::from("n,slope\n");
    for r in reports {
        let slope = r.fitted_slope.map(fmt_f64).unwrap_or_default();
        s.push_str(&format!("{},{}\n", r.n, slope));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// One enumeration check of the batch statistic's mean and variance.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaCase {
    pub n: usize,
    pub p: usize,
    pub set: usize,
    /// Largest `|E chi_i|` over particles.
    pub max_mean: f64,
    /// Largest relative gap between the enumerated variance and the formula.
    pub max_variance_rel: f64,
}

impl LemmaCase {
    pub const MEAN_TOL: f64 = 1e-13;
    pub const VARIANCE_TOL: f64 = 1e-12;

    pub fn passed(&self) -> bool {
        self.max_mean <= Self::MEAN_TOL && self.max_variance_rel <= Self::VARIANCE_TOL
    }
}

/// Enumerates every division of `sets` random test-model configurations of `n`
/// particles (positions uniform on `[-2, 2]`) and compares the mean and variance
/// of the batch statistic with zero and `(1/(p-1) - 1/(N-1)) Lambda_i`.
pub fn verify_lemma(n: usize, p: usize, sets: usize, seed: u64) -> Result<Vec<LemmaCase>> {
    let model = model_test1d(1.0)?;
    let mut rng = derive_stream(seed, stream_id(tag::AUX, 0));
    let mut cases = Vec::with_capacity(sets);
    for set in 0..sets {
        let xs: Vec<f64> = (0..n).map(|_| 4.0 * rng.uniform() - 2.0).collect();
        let ens = ParticleEnsemble::from_scalars(xs)?;
        let (mut max_mean, mut max_rel) = (0.0f64, 0.0f64);
        for i in 0..n {
            let m = chi_moments_bruteforce(&ens, &model, p, i)?;
            let want = chi_variance_formula(&ens, &model, p, i)?;
            max_mean = max_mean.max(m.mean.iter().fold(0.0f64, |a, b| a.max(b.abs())));
            let rel = if want == 0.0 {
                m.variance.abs()
            } else {
                ((m.variance - want) / want).abs()
            };
            max_rel = max_rel.max(rel);
        }
        cases.push(LemmaCase {
            n,
            p,
            set,
            max_mean,
            max_variance_rel: max_rel,
        });
    }
    Ok(cases)
}
