//! Interaction forces: the full `1/(N-1)` sum and the batch sum.

use crate::ensemble::ParticleEnsemble;
use crate::model::{InteractionModel, Kernel};

/// Writes `1/(N-1) sum_{j != i} K_ij(x_i - x_j)` for every particle into `out`.
///
/// Odd kernels are evaluated once per unordered pair. One-dimensional and
/// Coulomb kernels get monomorphic loops.
pub fn full_forces(ens: &ParticleEnsemble, model: &InteractionModel, out: &mut [f64]) {
    let n = ens.n();
    let d = ens.dim();
    let x = ens.positions();
    out.fill(0.0);
    if n < 2 {
        return;
    }
    match (&model.kernel, d) {
        (Kernel::Zero, _) => return,
        (Kernel::Regularized, 1) => sym_1d(x, out, |z| z / (1.0 + z * z)),
        (Kernel::InverseDistance, 1) => sym_1d(x, out, |z| 1.0 / z),
        (Kernel::Linear { rate }, 1) => {
            let rate = *rate;
            sym_1d(x, out, move |z| -rate * z)
        }
        (Kernel::BoundedConfidence { alpha, radius }, 1) => {
            let (alpha, radius) = (*alpha, *radius);
            sym_1d(x, out, move |z| if z.abs() <= radius { -alpha * z } else { 0.0 })
        }
        (Kernel::Coulomb, 3) => coulomb_3d(x, out),
        (kernel, _) if kernel.is_odd() => sym_generic(ens, kernel, out),
        (kernel, _) => {
            let mut z = vec![0.0; d];
            let mut k = vec![0.0; d];
            for i in 0..n {
                let xi = ens.position(i);
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    diff(xi, ens.position(j), &mut z);
                    kernel.eval(i, j, &z, &mut k);
                    add(&mut out[i * d..(i + 1) * d], &k);
                }
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    out.iter_mut().for_each(|f| *f *= scale);
}

#[inline]
fn sym_1d(x: &[f64], f: &mut [f64], k: impl Fn(f64) -> f64) {
    let n = x.len();
    for i in 0..n {
        let xi = x[i];
        let mut acc = 0.0;
        for (fj, xj) in f[i + 1..].iter_mut().zip(&x[i + 1..]) {
            let v = k(xi - xj);
            acc += v;
            *fj -= v;
        }
        f[i] += acc;
    }
}

fn coulomb_3d(x: &[f64], f: &mut [f64]) {
    let n = x.len() / 3;
    for i in 0..n {
        let (a0, a1, a2) = (x[3 * i], x[3 * i + 1], x[3 * i + 2]);
        let mut acc = [0.0; 3];
        for j in i + 1..n {
            let z = [a0 - x[3 * j], a1 - x[3 * j + 1], a2 - x[3 * j + 2]];
            let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
            let s = 1.0 / (r2 * r2.sqrt());
            for k in 0..3 {
                acc[k] += z[k] * s;
                f[3 * j + k] -= z[k] * s;
            }
        }
        for k in 0..3 {
            f[3 * i + k] += acc[k];
        }
    }
}

fn sym_generic(ens: &ParticleEnsemble, kernel: &Kernel, f: &mut [f64]) {
    let (n, d) = (ens.n(), ens.dim());
    let mut z = vec![0.0; d];
    let mut k = vec![0.0; d];
    for i in 0..n {
        let xi = ens.position(i);
        for j in i + 1..n {
            diff(xi, ens.position(j), &mut z);
            kernel.eval(i, j, &z, &mut k);
            for c in 0..d {
                f[i * d + c] += k[c];
                f[j * d + c] -= k[c];
            }
        }
    }
}

/// Batch force on each member of `batch`, `1/(|batch|-1) sum_{c != a} K(x_a - x_c)`,
/// written member by member into `out` (length `|batch| * dim`).
pub(crate) fn batch_forces(
    ens: &ParticleEnsemble,
    model: &InteractionModel,
    batch: &[usize],
    out: &mut [f64],
) {
    let d = ens.dim();
    out.fill(0.0);
    let b = batch.len();
    if b < 2 {
        return;
    }
    let mut z = [0.0; 8];
    let mut k = [0.0; 8];
    let mut zv;
    let mut kv;
    let (z, k): (&mut [f64], &mut [f64]) = if d <= 8 {
        (&mut z[..d], &mut k[..d])
    } else {
        zv = vec![0.0; d];
        kv = vec![0.0; d];
        (&mut zv[..], &mut kv[..])
    };
    for (a, &i) in batch.iter().enumerate() {
        let xi = ens.position(i);
        let fa = &mut out[a * d..(a + 1) * d];
        for &j in batch {
            if j == i {
                continue;
            }
            diff(xi, ens.position(j), z);
            model.kernel.eval(i, j, z, k);
            add(fa, k);
        }
    }
    let scale = 1.0 / (b - 1) as f64;
    out.iter_mut().for_each(|f| *f *= scale);
}

#[inline]
pub(crate) fn diff(a: &[f64], b: &[f64], out: &mut [f64]) {
    for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
        *o = x - y;
    }
}

#[inline]
fn add(acc: &mut [f64], v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}
