//! Closed-form reference laws: the transient Dyson density (a semicircle of
//! growing variance) and the inverse-Gamma wealth equilibrium.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// `sigma(t) = 1 + exp(-2t)`, the variance of the Dyson law at time `t`.
pub fn dyson_sigma(t: f64) -> f64 {
    1.0 + (-2.0 * t).exp()
}

/// `rho(x, t) = sqrt(2 sigma(t) - x^2) / (sigma(t) pi)`.
pub fn density_dyson(x: f64, t: f64) -> f64 {
    let s = dyson_sigma(t);
    let r2 = 2.0 * s - x * x;
    if r2 <= 0.0 {
        0.0
    } else {
        r2.sqrt() / (s * PI)
    }
}

/// Distribution function of the semicircle law of radius `radius`.
pub fn semicircle_cdf(x: f64, radius: f64) -> f64 {
    if x <= -radius {
        return 0.0;
    }
    if x >= radius {
        return 1.0;
    }
    let r2 = radius * radius;
    0.5 + x * (r2 - x * x).sqrt() / (PI * r2) + (x / radius).asin() / PI
}

/// Inverse of [`semicircle_cdf`] by bisection.
pub fn semicircle_quantile(u: f64, radius: f64) -> f64 {
    bisect(|x| semicircle_cdf(x, radius), u, -radius, radius)
}

/// Quantile of the Dyson law at time `t`.
pub fn dyson_quantile(u: f64, t: f64) -> f64 {
    semicircle_quantile(u, (2.0 * dyson_sigma(t)).sqrt())
}

/// Parameters of the inverse-Gamma equilibrium of the wealth model: shape
/// `kappa/D + 1`, scale `kappa eta / D`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn wealth(kappa: f64, diffusion: f64, eta: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("D", diffusion), ("eta", eta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(InverseGamma {
            shape: kappa / diffusion + 1.0,
            scale: kappa * eta / diffusion,
        })
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let (a, b) = (self.shape, self.scale);
        (a * b.ln() - ln_gamma(a) - (a + 1.0) * y.ln() - b / y).exp()
    }

    /// `P(Y <= y) = Q(shape, scale / y)` with `Q` the regularized upper incomplete gamma.
    pub fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            gamma_ur(self.shape, self.scale / y)
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        // Bisection in log y; the upper tail is heavy.
        let mut hi = self.scale.max(1.0);
        while hi < f64::MAX && self.cdf(hi) < u {
            hi *= 2.0;
        }
        let mut lo = hi;
        while lo > 0.0 && self.cdf(lo) > u {
            lo *= 0.5;
        }
        if lo == 0.0 {
            return 0.0;
        }
        bisect(|l| self.cdf(l.exp()), u, lo.ln(), hi.ln()).exp()
    }
}

/// `rho_inf(y) = (k eta / D)^{k/D+1} / Gamma(k/D+1) y^{-(2+k/D)} exp(-k eta / (D y))`.
pub fn density_inverse_gamma(y: f64, kappa: f64, diffusion: f64, eta: f64) -> Result<f64> {
    Ok(InverseGamma::wealth(kappa, diffusion, eta)?.pdf(y))
}

/// `x` in `[lo, hi]` with `f(x) = u` for nondecreasing `f`.
fn bisect(f: impl Fn(f64) -> f64, u: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
