//! Initial-data samplers.

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::model::{InitialLaw, InteractionModel};
use crate::rng::RngStream;

/// Random-walk Metropolis–Hastings settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MhConfig {
    pub burn_in: usize,
    pub thin: usize,
    /// Proposal half-width as a fraction of the support length.
    pub step_fraction: f64,
}

impl Default for MhConfig {
    fn default() -> Self {
        MhConfig {
            burn_in: 10_000,
            thin: 10,
            step_fraction: 0.25,
        }
    }
}

/// Draws `count` approximately independent samples of an unnormalized density on
/// `[lo, hi]`. Each move proposes, with equal odds, a uniform point of the
/// support or a uniform random-walk step; both proposals are symmetric. Proposals
/// leaving the support are rejected, so every sample lies in `[lo, hi]`.
pub fn sample_density_mh(
    pdf: impl Fn(f64) -> f64,
    support: (f64, f64),
    count: usize,
    config: MhConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let (lo, hi) = support;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::param(format!("bad support [{lo}, {hi}]")));
    }
    if config.thin == 0 {
        return Err(Error::param("thinning must be at least 1"));
    }
    // Start from the best of a coarse grid so the chain begins inside the mass.
    let grid = 1024;
    let (mut x, mut fx) = (0..=grid)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / grid as f64;
            (x, pdf(x))
        })
        .fold((lo, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    if fx.is_nan() || fx <= 0.0 {
        return Err(Error::param("density vanishes on the support"));
    }
    let half_width = config.step_fraction * (hi - lo);
    let mut advance = |x: &mut f64, fx: &mut f64| {
        let y = if rng.uniform() < 0.5 {
            lo + (hi - lo) * rng.uniform()
        } else {
            *x + half_width * (2.0 * rng.uniform() - 1.0)
        };
        let u = rng.uniform();
        if y < lo || y > hi {
            return;
        }
        let fy = pdf(y);
        if fy > 0.0 && u * *fx < fy {
            *x = y;
            *fx = fy;
        }
    };
    for _ in 0..config.burn_in {
        advance(&mut x, &mut fx);
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..config.thin {
            advance(&mut x, &mut fx);
        }
        out.push(x);
    }
    Ok(out)
}

/// Semicircle density of radius `r`: `2 sqrt(r^2 - x^2) / (pi r^2)`.
pub fn semicircle_pdf(radius: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        let s = radius * radius - x * x;
        if s <= 0.0 {
            0.0
        } else {
            2.0 * s.sqrt() / (std::f64::consts::PI * radius * radius)
        }
    }
}

/// Samples `n` particles from the model's initial law. Second-order models also
/// receive `N(0, 1)` velocities.
pub fn sample_initial(
    model: &InteractionModel,
    n: usize,
    rng: &mut RngStream,
) -> Result<ParticleEnsemble> {
    let d = model.dim;
    let positions = match model.init {
        InitialLaw::Semicircle { radius } => {
            if d != 1 {
                return Err(Error::param("semicircle initial data is one-dimensional"));
            }
            sample_density_mh(
                semicircle_pdf(radius),
                (-radius, radius),
                n,
                MhConfig::default(),
                rng,
            )?
        }
        InitialLaw::UniformSphere => {
            let mut out = Vec::with_capacity(n * d);
            for _ in 0..n {
                let v = loop {
                    let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
                    let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if r > 1e-12 {
                        break v.into_iter().map(|c| c / r).collect::<Vec<_>>();
                    }
                };
                out.extend(v);
            }
            out
        }
        InitialLaw::HalfNormal => {
            let mut out = Vec::with_capacity(n * d);
            while out.len() < n * d {
                let y = rng.normal().abs();
                // A draw of exactly zero would violate strict positivity.
                if y > 0.0 {
                    out.push(y);
                }
            }
            out
        }
        InitialLaw::Uniform { lo, hi } => (0..n * d).map(|_| lo + (hi - lo) * rng.uniform()).collect(),
    };
    let mut ens = ParticleEnsemble::new(d, positions)?;
    if model.second_order {
        let mut v = vec![0.0; n * d];
        rng.fill_normal(&mut v);
        ens = ens.with_velocities(v)?;
    }
    Ok(ens)
}
