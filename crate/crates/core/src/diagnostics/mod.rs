//! Measurements on ensembles and their reference laws.

mod laws;
mod structure;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use laws::{
    density_dyson, density_inverse_gamma, dyson_quantile, dyson_sigma, semicircle_cdf,
    semicircle_quantile, InverseGamma,
};
pub use structure::{cluster_score, neighbor_counts, reorder_permutation, sphere_energy};

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};

/// `sqrt(1/N sum_i |a_i - b_i|^2)`, velocities included when both ensembles carry them.
pub fn trajectory_error(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<f64> {
    if a.n() != b.n() || a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "ensembles differ in shape: {}x{} vs {}x{}",
            a.n(),
            a.dim(),
            b.n(),
            b.dim()
        )));
    }
    let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    let mut s = sq(a.positions(), b.positions());
    match (a.velocities(), b.velocities()) {
        (Some(u), Some(v)) => s += sq(u, v),
        (None, None) => {}
        _ => return Err(Error::Shape("only one ensemble has velocities".into())),
    }
    Ok((s / a.n() as f64).sqrt())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn check_order(order: u32) -> Result<()> {
    if order == 0 {
        return Err(Error::param("Wasserstein order must be at least 1"));
    }
    Ok(())
}

/// Order-`p` Wasserstein distance between two empirical measures on the line.
///
/// For equal sizes this is `(mean |a_(i) - b_(i)|^p)^(1/p)` over order
/// statistics. Unequal sizes are handled exactly by merging the two quantile
/// functions, which are step functions on `[0, 1]`.
pub fn wasserstein_1d(a: &[f64], b: &[f64], order: u32) -> Result<f64> {
    check_order(order)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("Wasserstein distance of an empty sample"));
    }
    let (a, b) = (sorted(a), sorted(b));
    let p = order as i32;
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs().powi(p)).sum();
        return Ok((s / a.len() as f64).powf(1.0 / order as f64));
    }
    let (na, nb) = (a.len() as u128, b.len() as u128);
    // Breakpoints k/na and l/nb compared exactly as k*nb vs l*na.
    let (mut i, mut j) = (0usize, 0usize);
    let mut last = 0u128;
    let mut s = 0.0;
    let total = na * nb;
    while i < a.len() && j < b.len() {
        let ea = (i as u128 + 1) * nb;
        let eb = (j as u128 + 1) * na;
        let next = ea.min(eb);
        s += (next - last) as f64 * (a[i] - b[j]).abs().powi(p);
        last = next;
        if ea == next {
            i += 1;
        }
        if eb == next {
            j += 1;
        }
    }
    Ok((s / total as f64).powf(1.0 / order as f64))
}

/// Order-`p` Wasserstein distance between samples and a law given by its
/// quantile function, evaluated at the midpoints `(i - 1/2)/n`.
pub fn wasserstein_to_law(samples: &[f64], quantile: impl Fn(f64) -> f64, order: u32) -> Result<f64> {
    check_order(order)?;
    if samples.is_empty() {
        return Err(Error::param("Wasserstein distance of an empty sample"));
    }
    let n = samples.len();
    let reference: Vec<f64> = (0..n).map(|i| quantile((i as f64 + 0.5) / n as f64)).collect();
    wasserstein_1d(samples, &reference, order)
}

/// Default bin count for emitted histograms.
pub const DEFAULT_BINS: usize = 60;

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Densities (`count / (total * width)`) rather than raw counts are reported.
    pub normalized: bool,
}

impl Histogram {
    /// Equal-width bins spanning `[lo, hi]`. Samples outside are dropped.
    pub fn with_range(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param(format!("bad histogram range [{lo}, {hi}] with {bins} bins")));
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
        edges[bins] = hi;
        let mut counts = vec![0u64; bins];
        for &x in samples {
            if x < lo || x > hi || x.is_nan() {
                continue;
            }
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Histogram {
            edges,
            counts,
            normalized: true,
        })
    }

    /// Equal-width bins spanning the sample range.
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("histogram of an empty sample"));
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self::with_range(samples, bins, lo, hi)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn densities(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, e)| c as f64 / (total * (e[1] - e[0])))
            .collect()
    }

    /// `left,right,count,density` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        let dens = self.densities();
        let mut body = String::from("left,right,count,density\n");
        for k in 0..self.counts.len() {
            body.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(self.edges[k]),
                fmt_f64(self.edges[k + 1]),
                self.counts[k],
                fmt_f64(dens[k])
            ));
        }
        w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// L1 distance between the histogram densities of two samples on a shared grid.
pub fn histogram_l1(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let shape = Histogram::from_samples(&all, bins)?;
    let (lo, hi) = (shape.edges[0], shape.edges[bins]);
    let ha = Histogram::with_range(a, bins, lo, hi)?;
    let hb = Histogram::with_range(b, bins, lo, hi)?;
    let width = (hi - lo) / bins as f64;
    Ok(ha
        .densities()
        .iter()
        .zip(hb.densities())
        .map(|(x, y)| (x - y).abs() * width)
        .sum())
}

/// Float formatting used by every emitted CSV: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Named measurements at one time, in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticRecord {
    pub time: f64,
    pub metrics: Vec<(String, f64)>,
}

impl DiagnosticRecord {
    pub fn new(time: f64) -> Self {
        DiagnosticRecord {
            time,
            metrics: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: f64) {
        self.metrics.push((key.to_string(), value));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite() && self.metrics.iter().all(|(_, v)| v.is_finite())
    }
}

/// Writes records as CSV with a `time` column followed by the metric keys of
/// the first record. Every record must carry the same keys in the same order.
pub fn write_records(path: &Path, records: &[DiagnosticRecord]) -> Result<()> {
    let mut out = String::from("time");
    let keys: Vec<&str> = records
        .first()
        .map(|r| r.metrics.iter().map(|(k, _)| k.as_str()).collect())
        .unwrap_or_default();
    for k in &keys {
        out.push(',');
        out.push_str(k);
    }
    out.push('\n');
    for r in records {
        if r.metrics.len() != keys.len() || r.metrics.iter().zip(&keys).any(|((k, _), w)| k != w) {
            return Err(Error::Shape(format!("record at t={} has different columns", r.time)));
        }
        if !r.is_finite() {
            return Err(Error::param(format!("record at t={} has a non-finite value", r.time)));
        }
        out.push_str(&fmt_f64(r.time));
        for (_, v) in &r.metrics {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    let mut w = create(path)?;
    w.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
