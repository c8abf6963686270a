//! Description of an interacting particle system
//!
//! `dX^i = b(X^i) dt + (1/(N-1)) sum_{j != i} K_ij(X^i - X^j) dt + noise`
//!
//! The confinement `b`, the pair kernel `K` and the noise are data, not trait
//! objects, so the stepping loops can match once and run monomorphic inner loops.

use std::fmt;
use std::sync::Arc;

use crate::models::AdjacencyMatrix;

pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// External force `b = -grad V`.
#[derive(Clone)]
pub enum Confine {
    None,
    /// `b(x) = -beta x`
    Linear { beta: f64 },
    Custom(VectorFn),
}

impl Confine {
    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Confine::None => out.fill(0.0),
            Confine::Linear { beta } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -beta * xi;
                }
            }
            Confine::Custom(f) => f(x, out),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Confine::None)
    }
}

/// Pair interaction `K_ij(z)`, `z = x_i - x_j`.
#[derive(Clone)]
pub enum Kernel {
    Zero,
    /// `z / (1 + |z|^2)`
    Regularized,
    /// `1 / z` in one dimension (log-gas repulsion).
    InverseDistance,
    /// `z / |z|^3` (Coulomb repulsion).
    Coulomb,
    /// `-rate z`: linear attraction (rate > 0) or repulsion (rate < 0).
    Linear { rate: f64 },
    /// `-alpha 1{|z| <= radius} z` (bounded-confidence opinion exchange).
    BoundedConfidence { alpha: f64, radius: f64 },
    /// `-alpha (a_ij - beta) z` (graph-weighted attraction/repulsion).
    Weighted {
        adjacency: Arc<AdjacencyMatrix>,
        alpha: f64,
        beta: f64,
    },
    /// Translation-invariant user kernel.
    Custom { f: VectorFn, odd: bool },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, i: usize, j: usize, z: &[f64], out: &mut [f64]) {
        match self {
            Kernel::Zero => out.fill(0.0),
            Kernel::Regularized => {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                let s = 1.0 / (1.0 + r2);
                for (o, v) in out.iter_mut().zip(z) {
                    *o = v * s;
                }
            }
            Kernel::InverseDistance => {
                out[0] = 1.0 / z[0];
                out[1..].fill(0.0);
            }
            Kernel::Coulomb => {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                let s = 1.0 / (r2 * r2.sqrt());
                for (o, v) in out.iter_mut().zip(z) {
                    *o = v * s;
                }
            }
            Kernel::Linear { .. } | Kernel::BoundedConfidence { .. } | Kernel::Weighted { .. } => {
                let rate = self.linear_rate(i, j, z).unwrap_or(0.0);
                for (o, v) in out.iter_mut().zip(z) {
                    *o = -rate * v;
                }
            }
            Kernel::Custom { f, .. } => f(z, out),
        }
    }

    /// For kernels of the form `-rate(i, j, z) z`, the rate of the pair.
    #[inline]
    pub fn linear_rate(&self, i: usize, j: usize, z: &[f64]) -> Option<f64> {
        match self {
            Kernel::Zero => Some(0.0),
            Kernel::Linear { rate } => Some(*rate),
            Kernel::BoundedConfidence { alpha, radius } => {
                let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                Some(if r <= *radius { *alpha } else { 0.0 })
            }
            Kernel::Weighted {
                adjacency,
                alpha,
                beta,
            } => Some(alpha * (adjacency.weight(i, j) - beta)),
            _ => None,
        }
    }

    /// `K(-z) = -K(z)` and `K_ij = K_ji`, so pair forces are antisymmetric.
    pub fn is_odd(&self) -> bool {
        match self {
            Kernel::Custom { odd, .. } => *odd,
            Kernel::Weighted { adjacency, .. } => adjacency.is_symmetric(),
            _ => true,
        }
    }

    /// Depends only on the displacement, not on the particle labels.
    pub fn is_translation_only(&self) -> bool {
        !matches!(self, Kernel::Weighted { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    /// `sigma dB`
    Additive,
    /// `sigma Y dB` (geometric)
    Multiplicative,
    /// `sigma N^{-gamma} dB`
    AdditiveScaled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub scale_exponent: Option<f64>,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        kind: NoiseKind::None,
        sigma: 0.0,
        scale_exponent: None,
    };

    pub fn additive(sigma: f64) -> Self {
        if sigma == 0.0 {
            return Self::NONE;
        }
        NoiseSpec {
            kind: NoiseKind::Additive,
            sigma,
            scale_exponent: None,
        }
    }

    /// Noise coefficient for an ensemble of `n` particles (before the
    /// multiplicative factor for geometric noise).
    pub fn amplitude(&self, n: usize) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Additive | NoiseKind::Multiplicative => self.sigma,
            NoiseKind::AdditiveScaled => {
                self.sigma * (n as f64).powf(-self.scale_exponent.unwrap_or(0.0))
            }
        }
    }

    pub fn is_active(&self) -> bool {
        self.kind != NoiseKind::None && self.sigma != 0.0
    }
}

/// Closed-form two-body flows available for `p = 2` batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairExact {
    /// `dX^i = dt / (X^i - X^j)` in one dimension.
    InverseDistance,
    /// `dX^i = (X^i - X^j) / |X^i - X^j|^3 dt` in three dimensions.
    Coulomb3d,
    /// `dX^i = -rate (X^i - X^j) dt`, with the rate taken from the kernel.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    UnitSphere,
}

/// Law of the initial data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialLaw {
    /// Semicircle density `sqrt(R^2 - x^2) * 2 / (pi R^2)`, sampled by Metropolis–Hastings.
    Semicircle { radius: f64 },
    /// Uniform on the unit sphere in three dimensions.
    UniformSphere,
    /// `|Y|`, `Y ~ N(0, 1)`.
    HalfNormal,
    Uniform { lo: f64, hi: f64 },
}

#[derive(Clone)]
pub struct InteractionModel {
    pub name: String,
    pub dim: usize,
    pub confine: Confine,
    pub kernel: Kernel,
    pub noise: NoiseSpec,
    pub pair_exact: Option<PairExact>,
    pub constraint: Option<Constraint>,
    pub second_order: bool,
    /// The model is only defined for batches of two (single partner per step).
    pub pairwise_only: bool,
    pub init: InitialLaw,
}

impl InteractionModel {
    /// A first-order model with a user kernel and confinement.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        confine: Confine,
        kernel: Kernel,
        noise: NoiseSpec,
    ) -> Self {
        InteractionModel {
            name: name.into(),
            dim,
            confine,
            kernel,
            noise,
            pair_exact: None,
            constraint: None,
            second_order: false,
            pairwise_only: false,
            init: InitialLaw::Uniform { lo: -1.0, hi: 1.0 },
        }
    }
}

impl fmt::Debug for InteractionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InteractionModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("noise", &self.noise)
            .field("pair_exact", &self.pair_exact)
            .field("constraint", &self.constraint)
            .field("second_order", &self.second_order)
            .finish_non_exhaustive()
    }
}
