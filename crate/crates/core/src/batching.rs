//! Random batches and the batch-force discrepancy statistic.
//!
//! A step of the without-replacement scheme partitions the particles into
//! batches of size `p` and turns interactions on only inside batches. The
//! per-particle discrepancy between the batch force and the full force,
//!
//! ```text
//! chi_i = 1/(|C|-1) sum_{j in C, j != i} K(x_i - x_j) - 1/(N-1) sum_{j != i} K(x_i - x_j),
//! ```
//!
//! has mean zero over uniformly random partitions and variance
//! `(1/(p-1) - 1/(N-1)) Lambda_i`. [`enumerate_divisions`] lists every
//! partition so both identities can be checked exactly for small `N`.

use rand::seq::{index, SliceRandom};

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::model::InteractionModel;
use crate::rng::RngStream;

/// Largest `n` accepted by the enumeration oracle (M(5) = 945 partitions for p = 2).
pub const ENUMERATION_LIMIT: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchMode {
    Division,
    Replacement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchSchedule {
    pub batches: Vec<Vec<usize>>,
    pub mode: BatchMode,
    /// Every index `0..n` appears exactly once.
    pub covering: bool,
}

impl BatchSchedule {
    /// Index of the first batch containing `i`.
    pub fn batch_of(&self, i: usize) -> Option<usize> {
        self.batches.iter().position(|b| b.contains(&i))
    }

    /// Partition in canonical form: each batch sorted, batches ordered by first element.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .batches
            .iter()
            .map(|b| {
                let mut b = b.clone();
                b.sort_unstable();
                b
            })
            .collect();
        out.sort();
        out
    }
}

fn check_sizes(n: usize, p: usize) -> Result<()> {
    if p < 2 || p > n {
        return Err(Error::BatchSize { n, p });
    }
    Ok(())
}

fn is_covering(batches: &[Vec<usize>], n: usize) -> bool {
    let mut seen = vec![false; n];
    for &i in batches.iter().flatten() {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    seen.into_iter().all(|s| s)
}

/// Uniform random partition of `0..n` into consecutive groups of a uniform
/// permutation (Durstenfeld shuffle).
///
/// When `p` does not divide `n` the last batch holds the remainder; a
/// remainder of one joins the last full batch instead of sitting alone.
pub fn random_division(n: usize, p: usize, rng: &mut RngStream) -> Result<BatchSchedule> {
    check_sizes(n, p)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    Ok(BatchSchedule {
        batches: split_permutation(&perm, p),
        mode: BatchMode::Division,
        covering: true,
    })
}

pub(crate) fn split_permutation(perm: &[usize], p: usize) -> Vec<Vec<usize>> {
    let mut batches: Vec<Vec<usize>> = perm.chunks(p).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let single = batches.pop().unwrap();
        batches.last_mut().unwrap().extend(single);
    }
    batches
}

/// `count` independent uniform `p`-subsets of `0..n`.
pub fn random_batches_with_replacement(
    n: usize,
    p: usize,
    count: usize,
    rng: &mut RngStream,
) -> Result<BatchSchedule> {
    check_sizes(n, p)?;
    if count == 0 {
        return Err(Error::param("batch count must be at least 1"));
    }
    let batches: Vec<Vec<usize>> = (0..count)
        .map(|_| index::sample(rng, n, p).into_vec())
        .collect();
    let covering = is_covering(&batches, n);
    Ok(BatchSchedule {
        batches,
        mode: BatchMode::Replacement,
        covering,
    })
}

/// Default number of with-replacement batches per sweep, `ceil(n / p)`.
pub fn batches_per_sweep(n: usize, p: usize) -> usize {
    n.div_ceil(p)
}

/// Every partition of `0..n` into batches of size `p`, each exactly once.
pub fn enumerate_divisions(n: usize, p: usize) -> Result<Vec<BatchSchedule>> {
    check_sizes(n, p)?;
    if n > ENUMERATION_LIMIT {
        return Err(Error::param(format!(
            "enumeration limited to n <= {ENUMERATION_LIMIT}, got {n}"
        )));
    }
    if n % p != 0 {
        return Err(Error::param(format!("p={p} does not divide n={n}")));
    }
    let mut out = Vec::new();
    let mut used = vec![false; n];
    let mut current: Vec<Vec<usize>> = Vec::new();
    enumerate_rec(n, p, &mut used, &mut current, &mut out);
    Ok(out)
}

fn enumerate_rec(
    n: usize,
    p: usize,
    used: &mut [bool],
    current: &mut Vec<Vec<usize>>,
    out: &mut Vec<BatchSchedule>,
) {
    let Some(first) = used.iter().position(|u| !u) else {
        out.push(BatchSchedule {
            batches: current.clone(),
            mode: BatchMode::Division,
            covering: true,
        });
        return;
    };
    // The smallest free index anchors the next batch, so each partition is produced once.
    used[first] = true;
    let free: Vec<usize> = (first + 1..n).filter(|&k| !used[k]).collect();
    let mut pick = Vec::with_capacity(p - 1);
    choose_rec(&free, 0, p - 1, &mut pick, &mut |mates| {
        let mut batch = Vec::with_capacity(p);
        batch.push(first);
        batch.extend_from_slice(mates);
        for &m in mates {
            used[m] = true;
        }
        current.push(batch);
        enumerate_rec(n, p, used, current, out);
        current.pop();
        for &m in mates {
            used[m] = false;
        }
    });
    used[first] = false;
}

fn choose_rec(
    pool: &[usize],
    start: usize,
    k: usize,
    pick: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if pick.len() == k {
        visit(pick);
        return;
    }
    for idx in start..pool.len() {
        if pool.len() - idx < k - pick.len() {
            break;
        }
        pick.push(pool[idx]);
        choose_rec(pool, idx + 1, k, pick, visit);
        pick.pop();
    }
}

/// Number of partitions of `p n` objects into `n` unlabeled batches of size `p`:
/// `(pn)! / ((p!)^n n!)`.
pub fn division_count(n_batches: usize, p: usize) -> u128 {
    let fact = |k: usize| (1..=k as u128).product::<u128>();
    fact(p * n_batches) / (fact(p).pow(n_batches as u32) * fact(n_batches))
}

/// `1/(|batch|-1) sum_{j in batch, j != i} K(x_i - x_j)` into `out`.
pub(crate) fn batch_interaction(
    ens: &ParticleEnsemble,
    model: &InteractionModel,
    batch: &[usize],
    i: usize,
    out: &mut [f64],
) {
    let d = ens.dim();
    out.fill(0.0);
    let mut z = vec![0.0; d];
    let mut k = vec![0.0; d];
    let xi = ens.position(i);
    for &j in batch {
        if j == i {
            continue;
        }
        for (zc, (a, b)) in z.iter_mut().zip(xi.iter().zip(ens.position(j))) {
            *zc = a - b;
        }
        model.kernel.eval(i, j, &z, &mut k);
        for (o, kc) in out.iter_mut().zip(&k) {
            *o += kc;
        }
    }
    let scale = 1.0 / (batch.len() - 1) as f64;
    out.iter_mut().for_each(|o| *o *= scale);
}

/// `1/(N-1) sum_{j != i} K(x_i - x_j)`.
pub fn full_interaction(ens: &ParticleEnsemble, model: &InteractionModel, i: usize) -> Vec<f64> {
    let all: Vec<usize> = (0..ens.n()).collect();
    let mut out = vec![0.0; ens.dim()];
    batch_interaction(ens, model, &all, i, &mut out);
    out
}

/// Batch force minus full force on particle `i` under `schedule`.
pub fn chi_statistic(
    ens: &ParticleEnsemble,
    model: &InteractionModel,
    schedule: &BatchSchedule,
    i: usize,
) -> Result<Vec<f64>> {
    if i >= ens.n() {
        return Err(Error::Shape(format!("particle {i} out of range")));
    }
    let b = schedule
        .batch_of(i)
        .ok_or(Error::NotCovered { particle: i })?;
    let mut batch = vec![0.0; ens.dim()];
    batch_interaction(ens, model, &schedule.batches[b], i, &mut batch);
    let full = full_interaction(ens, model, i);
    Ok(batch.iter().zip(&full).map(|(a, b)| a - b).collect())
}

/// Variance factor `Lambda_i = 1/(N-2) sum_{j != i} |K(x_i - x_j) - mean_k K(x_i - x_k)|^2`.
pub fn lambda_i(ens: &ParticleEnsemble, model: &InteractionModel, i: usize) -> Result<f64> {
    let n = ens.n();
    if n < 3 {
        return Err(Error::param("Lambda_i needs at least 3 particles"));
    }
    if i >= n {
        return Err(Error::Shape(format!("particle {i} out of range")));
    }
    let d = ens.dim();
    let xi = ens.position(i);
    let mut forces = Vec::with_capacity(n - 1);
    let mut z = vec![0.0; d];
    for j in (0..n).filter(|&j| j != i) {
        for (zc, (a, b)) in z.iter_mut().zip(xi.iter().zip(ens.position(j))) {
            *zc = a - b;
        }
        let mut k = vec![0.0; d];
        model.kernel.eval(i, j, &z, &mut k);
        forces.push(k);
    }
    let mut mean = vec![0.0; d];
    for k in &forces {
        for (m, kc) in mean.iter_mut().zip(k) {
            *m += kc;
        }
    }
    mean.iter_mut().for_each(|m| *m /= (n - 1) as f64);
    let ss: f64 = forces
        .iter()
        .map(|k| k.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum();
    Ok(ss / (n - 2) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiMoments {
    pub mean: Vec<f64>,
    pub variance: f64,
}

/// Exact mean and variance of `chi_i` over all equally likely partitions.
pub fn chi_moments_bruteforce(
    ens: &ParticleEnsemble,
    model: &InteractionModel,
    p: usize,
    i: usize,
) -> Result<ChiMoments> {
    let divisions = enumerate_divisions(ens.n(), p)?;
    let chis = divisions
        .iter()
        .map(|s| chi_statistic(ens, model, s, i))
        .collect::<Result<Vec<_>>>()?;
    let m = chis.len() as f64;
    let mut mean = vec![0.0; ens.dim()];
    for c in &chis {
        for (a, b) in mean.iter_mut().zip(c) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m);
    let variance = chis
        .iter()
        .map(|c| c.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum::<f64>()
        / m;
    Ok(ChiMoments { mean, variance })
}

/// `(1/(p-1) - 1/(N-1)) Lambda_i`.
pub fn chi_variance_formula(
    ens: &ParticleEnsemble,
    model: &InteractionModel,
    p: usize,
    i: usize,
) -> Result<f64> {
    let n = ens.n() as f64;
    Ok((1.0 / (p as f64 - 1.0) - 1.0 / (n - 1.0)) * lambda_i(ens, model, i)?)
}
