//! Closed-form two-body flows and the single-particle maps used in splitting.
//!
//! Each pair flow preserves the pair midpoint and moves the two particles
//! symmetrically along their separation vector. Only the separation changes:
//!
//! | flow             | ODE for `d = x_i - x_j`      | separation after `tau`        |
//! |------------------|------------------------------|-------------------------------|
//! | inverse distance | `d' = 2 / d`                 | `sqrt(d^2 + 4 tau)`           |
//! | Coulomb (3-D)    | `d' = 2 d / |d|^3`           | `(|d|^3 + 6 tau)^(1/3)`       |
//! | linear           | `d' = -2 rate d`             | `|d| exp(-2 rate tau)`        |

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Separations below this are treated as coincident and replaced by a
/// separation of this size along a fixed axis.
pub const COINCIDENCE_FLOOR: f64 = 1e-14;

/// Exact flow of `dX^i = dt / (X^i - X^j)`, `dX^j = dt / (X^j - X^i)`.
pub fn pair_exact_dyson(xi: f64, xj: f64, tau: f64) -> (f64, f64) {
    let mid = 0.5 * (xi + xj);
    let mut d0 = xi - xj;
    if d0.abs() < COINCIDENCE_FLOOR {
        d0 = COINCIDENCE_FLOOR;
    }
    let half = 0.5 * d0.signum() * (d0 * d0 + 4.0 * tau).sqrt();
    (mid + half, mid - half)
}

/// Exact flow of `dX^i = (X^i - X^j) / |X^i - X^j|^3 dt` and its mirror for `j`.
pub fn pair_exact_coulomb3d(xi: &[f64; 3], xj: &[f64; 3], tau: f64) -> ([f64; 3], [f64; 3]) {
    let mut d = [xi[0] - xj[0], xi[1] - xj[1], xi[2] - xj[2]];
    let mut r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r < COINCIDENCE_FLOOR {
        d = [COINCIDENCE_FLOOR, 0.0, 0.0];
        r = COINCIDENCE_FLOOR;
    }
    let half = 0.5 * (r * r * r + 6.0 * tau).cbrt() / r;
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    for k in 0..3 {
        let mid = 0.5 * (xi[k] + xj[k]);
        a[k] = mid + half * d[k];
        b[k] = mid - half * d[k];
    }
    (a, b)
}

/// Exact flow of `dX^i = -rate (X^i - X^j) dt`, `dX^j = -rate (X^j - X^i) dt`,
/// written into `xi`, `xj` in place.
pub fn pair_exact_linear(xi: &mut [f64], xj: &mut [f64], rate: f64, tau: f64) {
    // Each particle moves the fraction w = (1 - exp(-2 rate tau)) / 2 of the
    // way to the other; this form keeps both inside their original segment.
    let w = -0.5 * (-2.0 * rate * tau).exp_m1();
    for (a, b) in xi.iter_mut().zip(xj.iter_mut()) {
        let d = *b - *a;
        *a += w * d;
        *b -= w * d;
    }
}

/// Geometric Brownian step `Y exp(-D tau + sqrt(2 D tau) z)`; conditional mean is `Y`.
#[inline]
pub fn lognormal_update(y: f64, diffusion: f64, tau: f64, z: f64) -> f64 {
    y * (-diffusion * tau + (2.0 * diffusion * tau).sqrt() * z).exp()
}

/// Applies the exact geometric-noise map to every wealth with fresh normals.
pub fn wealth_noise_step(
    ens: &mut ParticleEnsemble,
    diffusion: f64,
    tau: f64,
    rng: &mut RngStream,
) -> Result<()> {
    if let Some(i) = ens.positions().iter().position(|&y| y <= 0.0) {
        return Err(Error::param(format!("wealth of particle {i} is not positive")));
    }
    for y in ens.positions_mut() {
        *y = lognormal_update(*y, diffusion, tau, rng.normal());
    }
    Ok(())
}

/// Normalizes every position to unit Euclidean norm.
pub fn sphere_project(ens: &mut ParticleEnsemble) -> Result<()> {
    for i in 0..ens.n() {
        project_point(ens.position_mut(i)).map_err(|_| {
            Error::param(format!("particle {i} has zero norm and cannot be projected"))
        })?;
    }
    Ok(())
}

#[inline]
pub(crate) fn project_point(x: &mut [f64]) -> std::result::Result<(), ()> {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r == 0.0 || !r.is_finite() {
        return Err(());
    }
    x.iter_mut().for_each(|c| *c /= r);
    Ok(())
}
