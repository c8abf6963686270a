//! Time stepping.
//!
//! Drivers: the without-replacement step ([`rbm1_step`]), the sequential
//! single-batch step ([`rbm_r_step`]), the with-replacement sweep from a frozen
//! state ([`rbm_r_prime_sweep`]) and the fully coupled reference
//! ([`full_step`]). Inside a batch particles move by forward Euler
//! (Euler–Maruyama with noise), by an exact pair flow followed by
//! confinement and noise, or by position Verlet for second-order models.
//!
//! [`Integrator`] owns the step counter and the random streams of a run: batch
//! draws for step `m` come from stream `(BATCH, m)` and per-particle noise from
//! [`NoiseSource`], which does not depend on the batching. That is what makes
//! parallel and serial execution bit-identical, and what lets a coarse run and
//! a fine reference share Brownian paths.

mod forces;
mod pair;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

pub use forces::full_forces;
pub use pair::{
    lognormal_update, pair_exact_coulomb3d, pair_exact_dyson, pair_exact_linear, sphere_project,
    wealth_noise_step, COINCIDENCE_FLOOR,
};

use crate::batching::{batches_per_sweep, random_batches_with_replacement, random_division};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::model::{Constraint, InteractionModel, Kernel, NoiseKind, PairExact};
use crate::rng::{derive_stream, stream_id, tag, RngStream};
use forces::{batch_forces, diff};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Rbm1,
    RbmR,
    RbmRPrime,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Intra {
    /// Forward Euler; with noise this is Euler–Maruyama.
    Euler,
    EulerMaruyama,
    SplitExact,
    Verlet,
}

/// How single batches are drawn by the with-replacement schemes.
#[derive(Clone, Debug, Default)]
pub enum BatchSampler {
    /// Uniform over all `p`-subsets.
    #[default]
    Uniform,
    /// Uniform over the listed pairs (nonzero adjacency entries), `p = 2` only.
    Edges(Arc<[(usize, usize)]>),
}

impl BatchSampler {
    /// Pairs `i < j` with a nonzero weight in the model's adjacency matrix.
    pub fn edges_of(model: &InteractionModel) -> Result<Self> {
        match &model.kernel {
            Kernel::Weighted { adjacency, .. } => {
                let edges: Vec<(usize, usize)> = adjacency.edges();
                if edges.is_empty() {
                    return Err(Error::param("adjacency matrix has no edges"));
                }
                Ok(BatchSampler::Edges(edges.into()))
            }
            _ => Err(Error::param(format!(
                "model {} has no adjacency matrix to sample edges from",
                model.name
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepScheme {
    pub kind: SchemeKind,
    pub intra: Intra,
    pub projection: Option<Constraint>,
    /// Batch size `p`.
    pub batch_size: usize,
    pub sampler: BatchSampler,
    /// Evolve the batches of a without-replacement step on the rayon pool.
    pub parallel: bool,
}

impl StepScheme {
    /// Scheme with the model's own constraint as projection.
    pub fn new(model: &InteractionModel, kind: SchemeKind, intra: Intra, batch_size: usize) -> Self {
        StepScheme {
            kind,
            intra,
            projection: model.constraint,
            batch_size,
            sampler: BatchSampler::Uniform,
            parallel: false,
        }
    }

    pub fn with_sampler(mut self, sampler: BatchSampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    /// Checks the scheme against a model and particle count.
    pub fn validate(&self, model: &InteractionModel, n: usize) -> Result<()> {
        let p = self.batch_size;
        if self.kind != SchemeKind::Full && (p < 2 || p > n) {
            return Err(Error::BatchSize { n, p });
        }
        if n < 2 {
            return Err(Error::param(format!("need at least 2 particles, got {n}")));
        }
        match self.intra {
            Intra::Verlet => {
                if !model.second_order {
                    return Err(Error::param("verlet requires a second-order model"));
                }
                if !matches!(self.kind, SchemeKind::Rbm1 | SchemeKind::Full) {
                    return Err(Error::param("verlet runs with the rbm1 or full scheme"));
                }
            }
            Intra::SplitExact => {
                if model.pair_exact.is_none() {
                    return Err(Error::param(format!(
                        "model {} has no exact pair flow",
                        model.name
                    )));
                }
                if p != 2 {
                    return Err(Error::param("split_exact requires p = 2"));
                }
                if self.kind == SchemeKind::Full {
                    return Err(Error::param("split_exact is a batch scheme, not full"));
                }
                if model.pair_exact == Some(PairExact::Coulomb3d) && model.dim != 3 {
                    return Err(Error::param("Coulomb pair flow needs dim = 3"));
                }
            }
            Intra::Euler | Intra::EulerMaruyama => {}
        }
        if model.second_order && self.intra != Intra::Verlet {
            return Err(Error::param("second-order models step with verlet"));
        }
        if let BatchSampler::Edges(edges) = &self.sampler {
            if p != 2 {
                return Err(Error::param("edge sampling draws pairs, p must be 2"));
            }
            if edges.iter().any(|&(i, j)| i >= n || j >= n || i == j) {
                return Err(Error::param("edge list does not fit the ensemble"));
            }
        }
        Ok(())
    }
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(Error::param(format!(
                        concat!("unknown ", stringify!($ty), " '{}' (expected one of: {})"),
                        s,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

keyword_enum!(SchemeKind {
    Rbm1 => "rbm1",
    RbmR => "rbm_r",
    RbmRPrime => "rbm_r_prime",
    Full => "full",
});

keyword_enum!(Intra {
    Euler => "euler",
    EulerMaruyama => "euler_maruyama",
    SplitExact => "split_exact",
    Verlet => "verlet",
});

/// Per-particle standard normals for step `m`, on a grid `refine` times finer
/// than the step.
///
/// The increments of fine steps `m * refine .. (m + 1) * refine` are summed and
/// divided by `sqrt(refine)`, so a run with step `tau` and a run with step
/// `tau / refine` see the same Brownian path.
#[derive(Clone, Copy, Debug)]
pub struct NoiseSource {
    seed: u64,
    refine: u64,
}

impl NoiseSource {
    pub fn new(seed: u64, refine: u64) -> Result<Self> {
        if refine == 0 {
            return Err(Error::param("noise refinement must be at least 1"));
        }
        Ok(NoiseSource { seed, refine })
    }

    pub fn refine(&self) -> u64 {
        self.refine
    }

    pub fn fill(&self, step: u64, out: &mut [f64]) {
        let first = step * self.refine;
        derive_stream(self.seed, stream_id(tag::NOISE, first)).fill_normal(out);
        if self.refine == 1 {
            return;
        }
        let mut buf = vec![0.0; out.len()];
        for k in 1..self.refine {
            derive_stream(self.seed, stream_id(tag::NOISE, first + k)).fill_normal(&mut buf);
            for (o, z) in out.iter_mut().zip(&buf) {
                *o += z;
            }
        }
        let s = 1.0 / (self.refine as f64).sqrt();
        out.iter_mut().for_each(|o| *o *= s);
    }
}

/// Everything a batch update needs besides positions.
struct BatchMove<'a> {
    model: &'a InteractionModel,
    intra: Intra,
    tau: f64,
    /// Noise coefficient for this ensemble size.
    amp: f64,
    project: bool,
}

impl<'a> BatchMove<'a> {
    fn new(model: &'a InteractionModel, scheme: &StepScheme, tau: f64, n: usize) -> Self {
        BatchMove {
            model,
            intra: scheme.intra,
            tau,
            amp: if model.noise.is_active() {
                model.noise.amplitude(n)
            } else {
                0.0
            },
            project: scheme.projection == Some(Constraint::UnitSphere),
        }
    }

    fn noisy(&self) -> bool {
        self.amp != 0.0
    }

    /// Evolves the members of `batch` from `src` for one step and writes their
    /// new coordinates, member by member, into `out`. `z` holds the members'
    /// normals in the same layout (ignored without noise).
    fn evolve(&self, src: &ParticleEnsemble, batch: &[usize], z: &[f64], out: &mut [f64]) {
        let d = src.dim();
        for (a, &i) in batch.iter().enumerate() {
            out[a * d..(a + 1) * d].copy_from_slice(src.position(i));
        }
        match self.intra {
            Intra::Euler | Intra::EulerMaruyama => {
                let mut f = vec![0.0; batch.len() * d];
                batch_forces(src, self.model, batch, &mut f);
                for a in 0..batch.len() {
                    let r = a * d..(a + 1) * d;
                    self.drift_and_noise(&mut out[r.clone()], Some(&f[r.clone()]), z.get(r));
                }
            }
            Intra::SplitExact => {
                self.pair_flows(batch, out, d);
                for a in 0..batch.len() {
                    let r = a * d..(a + 1) * d;
                    self.drift_and_noise(&mut out[r.clone()], None, z.get(r));
                }
            }
            Intra::Verlet => unreachable!("verlet is stepped by its own driver"),
        }
        if self.project {
            for x in out.chunks_exact_mut(d) {
                // A zero vector stays zero and is caught by the caller.
                let _ = pair::project_point(x);
            }
        }
    }

    /// Exact pair flows over the batch. For a batch of `b > 2` members every
    /// pair is flowed in turn for `tau / (b - 1)`.
    fn pair_flows(&self, batch: &[usize], out: &mut [f64], d: usize) {
        let b = batch.len();
        let h = self.tau / (b - 1) as f64;
        let exact = self.model.pair_exact.expect("validated");
        for a in 0..b {
            for c in a + 1..b {
                let (lo, hi) = out.split_at_mut(c * d);
                let xa = &mut lo[a * d..(a + 1) * d];
                let xc = &mut hi[..d];
                match exact {
                    PairExact::InverseDistance => {
                        let (u, v) = pair_exact_dyson(xa[0], xc[0], h);
                        xa[0] = u;
                        xc[0] = v;
                    }
                    PairExact::Coulomb3d => {
                        let (u, v) = pair_exact_coulomb3d(
                            &[xa[0], xa[1], xa[2]],
                            &[xc[0], xc[1], xc[2]],
                            h,
                        );
                        xa.copy_from_slice(&u);
                        xc.copy_from_slice(&v);
                    }
                    PairExact::Linear => {
                        let mut zd = vec![0.0; d];
                        diff(xa, xc, &mut zd);
                        let rate = self
                            .model
                            .kernel
                            .linear_rate(batch[a], batch[c], &zd)
                            .unwrap_or(0.0);
                        pair_exact_linear(xa, xc, rate, h);
                    }
                }
            }
        }
    }

    /// `x += tau (b(x) + f) + noise`, with the exact lognormal map for
    /// geometric noise after the split pair flow.
    #[inline]
    fn drift_and_noise(&self, x: &mut [f64], f: Option<&[f64]>, z: Option<&[f64]>) {
        let d = x.len();
        let tau = self.tau;
        let mut b = [0.0; 8];
        let mut bv;
        let b: &mut [f64] = if d <= 8 {
            &mut b[..d]
        } else {
            bv = vec![0.0; d];
            &mut bv
        };
        self.model.confine.eval(x, b);
        if let Some(f) = f {
            for (bc, fc) in b.iter_mut().zip(f) {
                *bc += fc;
            }
        }
        let z = if self.noisy() { z } else { None };
        let geometric = self.model.noise.kind == NoiseKind::Multiplicative;
        match z {
            Some(z) if geometric && self.intra == Intra::SplitExact => {
                let diffusion = 0.5 * self.amp * self.amp;
                for c in 0..d {
                    x[c] = lognormal_update(x[c] + tau * b[c], diffusion, tau, z[c]);
                }
            }
            Some(z) => {
                let s = self.amp * tau.sqrt();
                for c in 0..d {
                    let g = if geometric { x[c] } else { 1.0 };
                    x[c] += tau * b[c] + s * g * z[c];
                }
            }
            None => {
                for c in 0..d {
                    x[c] += tau * b[c];
                }
            }
        }
    }
}

fn check_finite(ens: &ParticleEnsemble) -> Result<()> {
    match ens.first_non_finite() {
        Some(particle) => Err(Error::BlowUp { step: 0, particle }),
        None => Ok(()),
    }
}

/// Like [`check_finite`], restricted to the particles a batch touched.
fn check_finite_in(ens: &ParticleEnsemble, batch: &[usize]) -> Result<()> {
    let d = ens.dim();
    let bad = |i: usize| !ens.positions()[i * d..(i + 1) * d].iter().all(|x| x.is_finite())
        || ens.velocities().is_some_and(|v| !v[i * d..(i + 1) * d].iter().all(|x| x.is_finite()));
    match batch.iter().copied().filter(|&i| bad(i)).min() {
        Some(particle) => Err(Error::BlowUp { step: 0, particle }),
        None => Ok(()),
    }
}

fn check_kind(scheme: &StepScheme, want: SchemeKind) -> Result<()> {
    if scheme.kind != want {
        return Err(Error::param(format!(
            "scheme kind is {}, expected {}",
            scheme.kind, want
        )));
    }
    if scheme.intra == Intra::Verlet {
        return Err(Error::param("use verlet_step for second-order models"));
    }
    Ok(())
}

fn draw_noise(
    model: &InteractionModel,
    len: usize,
    noise: Option<&[f64]>,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if !model.noise.is_active() {
        return Ok(Vec::new());
    }
    match noise {
        Some(z) if z.len() == len => Ok(z.to_vec()),
        Some(z) => Err(Error::Shape(format!(
            "noise has {} entries, expected {len}",
            z.len()
        ))),
        None => {
            let mut z = vec![0.0; len];
            rng.fill_normal(&mut z);
            Ok(z)
        }
    }
}

fn gather(z: &[f64], batch: &[usize], d: usize, out: &mut Vec<f64>) {
    out.clear();
    if z.is_empty() {
        return;
    }
    for &i in batch {
        out.extend_from_slice(&z[i * d..(i + 1) * d]);
    }
}

fn scatter(ens: &mut ParticleEnsemble, batch: &[usize], vals: &[f64]) {
    let d = ens.dim();
    for (a, &i) in batch.iter().enumerate() {
        ens.position_mut(i).copy_from_slice(&vals[a * d..(a + 1) * d]);
    }
}

/// One without-replacement step of duration `tau`.
///
/// The division is drawn from `rng`. `noise` holds one standard normal per
/// coordinate (particle-major); when `None`, noise is drawn from `rng` after the
/// division.
pub fn rbm1_step(
    ens: &mut ParticleEnsemble,
    model: &InteractionModel,
    scheme: &StepScheme,
    tau: f64,
    rng: &mut RngStream,
    noise: Option<&[f64]>,
) -> Result<()> {
    check_kind(scheme, SchemeKind::Rbm1)?;
    let (n, d) = (ens.n(), ens.dim());
    let schedule = random_division(n, scheme.batch_size, rng)?;
    let z = draw_noise(model, n * d, noise, rng)?;
    let mv = BatchMove::new(model, scheme, tau, n);
    if scheme.parallel {
        let src = &*ens;
        let results: Vec<Vec<f64>> = schedule
            .batches
            .par_iter()
            .map(|batch| {
                let mut zb = Vec::new();
                gather(&z, batch, d, &mut zb);
                let mut out = vec![0.0; batch.len() * d];
                mv.evolve(src, batch, &zb, &mut out);
                out
            })
            .collect();
        for (batch, vals) in schedule.batches.iter().zip(&results) {
            scatter(ens, batch, vals);
        }
    } else {
        let mut zb = Vec::new();
        let mut out = Vec::new();
        for batch in &schedule.batches {
            gather(&z, batch, d, &mut zb);
            out.resize(batch.len() * d, 0.0);
            // Batches are disjoint, so evolving in place reads only pre-step values.
            mv.evolve(ens, batch, &zb, &mut out);
            scatter(ens, batch, &out);
        }
    }
    ens.time += tau;
    check_finite(ens)
}

/// Evolves one uniformly drawn batch for `tau`; every other particle is left
/// untouched. `ceil(N/p)` of these make one unit `tau` of physical time, so the
/// ensemble clock advances by `tau / ceil(N/p)`.
pub fn rbm_r_step(
    ens: &mut ParticleEnsemble,
    model: &InteractionModel,
    scheme: &StepScheme,
    tau: f64,
    rng: &mut RngStream,
) -> Result<()> {
    check_kind(scheme, SchemeKind::RbmR)?;
    let (n, d, p) = (ens.n(), ens.dim(), scheme.batch_size);
    let batch = draw_batch(n, p, &scheme.sampler, rng)?;
    let z = draw_noise(model, batch.len() * d, None, rng)?;
    let mut out = vec![0.0; batch.len() * d];
    BatchMove::new(model, scheme, tau, n).evolve(ens, &batch, &z, &mut out);
    scatter(ens, &batch, &out);
    ens.time += tau / batches_per_sweep(n, p) as f64;
    check_finite_in(ens, &batch)
}

fn draw_batch(n: usize, p: usize, sampler: &BatchSampler, rng: &mut RngStream) -> Result<Vec<usize>> {
    match sampler {
        // Same draw as a one-batch `random_batches_with_replacement`, without
        // the O(N) coverage bookkeeping.
        BatchSampler::Uniform if (2..=n).contains(&p) => Ok(rand::seq::index::sample(rng, n, p).into_vec()),
        BatchSampler::Uniform => {
            let mut s = random_batches_with_replacement(n, p, 1, rng)?;
            Ok(s.batches.pop().expect("one batch"))
        }
        BatchSampler::Edges(edges) => {
            let k = ((rng.uniform() * edges.len() as f64) as usize).min(edges.len() - 1);
            let (i, j) = edges[k];
            Ok(vec![i, j])
        }
    }
}

/// `ceil(N/p)` with-replacement batches, each evolved for `tau` from the state
/// at the start of the sweep. A particle drawn in several batches keeps the
/// result of the last one.
pub fn rbm_r_prime_sweep(
    ens: &mut ParticleEnsemble,
    model: &InteractionModel,
    scheme: &StepScheme,
    tau: f64,
    rng: &mut RngStream,
) -> Result<()> {
    check_kind(scheme, SchemeKind::RbmRPrime)?;
    let (n, d, p) = (ens.n(), ens.dim(), scheme.batch_size);
    let count = batches_per_sweep(n, p);
    let batches: Vec<Vec<usize>> = match &scheme.sampler {
        BatchSampler::Uniform => random_batches_with_replacement(n, p, count, rng)?.batches,
        sampler => (0..count)
            .map(|_| draw_batch(n, p, sampler, rng))
            .collect::<Result<_>>()?,
    };
    let frozen = ens.clone();
    let mv = BatchMove::new(model, scheme, tau, n);
    let mut out = Vec::new();
    for batch in &batches {
        let z = draw_noise(model, batch.len() * d, None, rng)?;
        out.resize(batch.len() * d, 0.0);
        mv.evolve(&frozen, batch, &z, &mut out);
        scatter(ens, batch, &out);
    }
    ens.time += tau;
    check_finite(ens)
}

/// Forward Euler (Euler–Maruyama with noise) on the full `O(N^2)` force.
pub fn full_step(
    ens: &mut ParticleEnsemble,
    model: &InteractionModel,
    scheme: &StepScheme,
    tau: f64,
    rng: &mut RngStream,
    noise: Option<&[f64]>,
) -> Result<()> {
    check_kind(scheme, SchemeKind::Full)?;
    if !matches!(scheme.intra, Intra::Euler | Intra::EulerMaruyama) {
        return Err(Error::param("the full scheme steps with euler or verlet"));
    }
    let (n, d) = (ens.n(), ens.dim());
    let z = draw_noise(model, n * d, noise, rng)?;
    let mut f = vec![0.0; n * d];
    full_forces(ens, model, &mut f);
    let mv = BatchMove::new(model, scheme, tau, n);
    for i in 0..n {
        let r = i * d..(i + 1) * d;
        mv.drift_and_noise(ens.position_mut(i), Some(&f[r.clone()]), z.get(r));
        if mv.project {
            let _ = pair::project_point(ens.position_mut(i));
        }
    }
    ens.time += tau;
    check_finite(ens)
}

/// Force used by the second-order driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForceMode {
    /// Full `1/(N-1)` sum.
    Full,
    /// Batch force over a fresh random division into batches of size `p`.
    Batch { p: usize },
}

/// History carried between position-Verlet steps.
#[derive(Clone, Debug, Default)]
pub struct VerletState {
    prev: Option<Vec<f64>>,
}

impl VerletState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One position-Verlet step, `X_{n+1} = 2 X_n - X_{n-1} + F_n tau^2`.
///
/// The first step uses `X_1 = X_0 + V_0 tau + F_0 tau^2 / 2`. Velocities are
/// reported as `(X_{n+1} - X_n) / tau + F_n tau / 2`.
pub fn verlet_step(
    ens: &mut ParticleEnsemble,
    model: &InteractionModel,
    tau: f64,
    force: ForceMode,
    rng: &mut RngStream,
    state: &mut VerletState,
) -> Result<()> {
    let (n, d) = (ens.n(), ens.dim());
    if !ens.has_velocities() {
        return Err(Error::param("verlet needs initial velocities"));
    }
    let mut f = vec![0.0; n * d];
    match force {
        ForceMode::Full => full_forces(ens, model, &mut f),
        ForceMode::Batch { p } => {
            let schedule = random_division(n, p, rng)?;
            let mut fb = Vec::new();
            for batch in &schedule.batches {
                fb.resize(batch.len() * d, 0.0);
                batch_forces(ens, model, batch, &mut fb);
                for (a, &i) in batch.iter().enumerate() {
                    f[i * d..(i + 1) * d].copy_from_slice(&fb[a * d..(a + 1) * d]);
                }
            }
        }
    }
    if !model.confine.is_none() {
        let mut b = vec![0.0; d];
        for i in 0..n {
            model.confine.eval(ens.position(i), &mut b);
            for c in 0..d {
                f[i * d + c] += b[c];
            }
        }
    }
    let current = ens.positions().to_vec();
    let next: Vec<f64> = match &state.prev {
        None => {
            let v = ens.velocities().expect("checked");
            (0..n * d)
                .map(|k| current[k] + v[k] * tau + 0.5 * f[k] * tau * tau)
                .collect()
        }
        Some(prev) => (0..n * d)
            .map(|k| 2.0 * current[k] - prev[k] + f[k] * tau * tau)
            .collect(),
    };
    let v = ens.velocities_mut().expect("checked");
    for k in 0..n * d {
        v[k] = (next[k] - current[k]) / tau + 0.5 * f[k] * tau;
    }
    ens.positions_mut().copy_from_slice(&next);
    state.prev = Some(current);
    ens.time += tau;
    check_finite(ens)
}

/// A stepping run: scheme, step size, seed and step counter.
///
/// Step `m` uses batch stream `(BATCH, m)` and noise [`NoiseSource::fill`]`(m)`.
/// For the with-replacement schemes one step is a full sweep of `ceil(N/p)`
/// batches.
#[derive(Clone, Debug)]
pub struct Integrator {
    model: InteractionModel,
    scheme: StepScheme,
    tau: f64,
    seed: u64,
    batch_seed: u64,
    noise: NoiseSource,
    steps: u64,
    start_time: Option<f64>,
    verlet: VerletState,
}

impl Integrator {
    pub fn new(
        model: &InteractionModel,
        scheme: StepScheme,
        tau: f64,
        seed: u64,
        n: usize,
    ) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::param(format!("tau must be positive, got {tau}")));
        }
        scheme.validate(model, n)?;
        Ok(Integrator {
            model: model.clone(),
            scheme,
            tau,
            seed,
            batch_seed: seed,
            noise: NoiseSource::new(seed, 1)?,
            steps: 0,
            start_time: None,
            verlet: VerletState::new(),
        })
    }

    /// Draws each step's noise as the aggregate of `refine` finer increments.
    pub fn with_noise_refinement(mut self, refine: u64) -> Result<Self> {
        self.noise = NoiseSource::new(self.seed, refine)?;
        Ok(self)
    }

    /// Draws batches from streams of another master seed while keeping the
    /// noise of `seed`. Replicas of a coupled run differ only in their batches.
    pub fn with_batch_seed(mut self, batch_seed: u64) -> Self {
        self.batch_seed = batch_seed;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn scheme(&self) -> &StepScheme {
        &self.scheme
    }

    pub fn model(&self) -> &InteractionModel {
        &self.model
    }

    pub fn step(&mut self, ens: &mut ParticleEnsemble) -> Result<()> {
        let start = *self.start_time.get_or_insert(ens.time);
        let m = self.steps;
        let mut rng = derive_stream(self.batch_seed, stream_id(tag::BATCH, m));
        let (model, scheme, tau) = (&self.model, &self.scheme, self.tau);
        let noise = if model.noise.is_active() && scheme.intra != Intra::Verlet {
            let mut z = vec![0.0; ens.positions().len()];
            self.noise.fill(m, &mut z);
            Some(z)
        } else {
            None
        };
        let result = match (scheme.kind, scheme.intra) {
            (SchemeKind::Rbm1, Intra::Verlet) => verlet_step(
                ens,
                model,
                tau,
                ForceMode::Batch {
                    p: scheme.batch_size,
                },
                &mut rng,
                &mut self.verlet,
            ),
            (SchemeKind::Full, Intra::Verlet) => {
                verlet_step(ens, model, tau, ForceMode::Full, &mut rng, &mut self.verlet)
            }
            (SchemeKind::Rbm1, _) => rbm1_step(ens, model, scheme, tau, &mut rng, noise.as_deref()),
            (SchemeKind::Full, _) => full_step(ens, model, scheme, tau, &mut rng, noise.as_deref()),
            (SchemeKind::RbmR, _) => {
                let sweep = batches_per_sweep(ens.n(), scheme.batch_size);
                (0..sweep).try_for_each(|_| rbm_r_step(ens, model, scheme, tau, &mut rng))
            }
            (SchemeKind::RbmRPrime, _) => rbm_r_prime_sweep(ens, model, scheme, tau, &mut rng),
        };
        self.steps += 1;
        ens.time = start + self.steps as f64 * tau;
        result.map_err(|e| match e {
            Error::BlowUp { particle, .. } => Error::BlowUp { step: m, particle },
            e => e,
        })
    }

    /// Takes `count` steps.
    pub fn advance(&mut self, ens: &mut ParticleEnsemble, count: u64) -> Result<()> {
        for _ in 0..count {
            self.step(ens)?;
        }
        Ok(())
    }
}

/// Number of steps of size `tau` that reach `t` (nearest integer; `t` is
/// expected to be a multiple of `tau` up to rounding).
pub fn steps_for(t: f64, tau: f64) -> u64 {
    (t / tau).round().max(0.0) as u64
}

#[cfg(test)]
mod tests;
