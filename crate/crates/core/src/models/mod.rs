//! Concrete interacting systems and their initial data.
//!
//! | name            | d | kernel                     | confinement | noise                  | exact pair flow |
//! |-----------------|---|----------------------------|-------------|------------------------|-----------------|
//! | `test1d`        | 1 | `z / (1 + z^2)`            | `-beta x`   | optional `sigma dB`    | none            |
//! | `hamiltonian1d` | 1 | `z / (1 + z^2)` (force)    | none        | none                   | none            |
//! | `dyson`         | 1 | `1 / z`                    | `-beta x`   | `N^{-1/2} dB`          | inverse distance|
//! | `thomson`       | 3 | `z / |z|^3` on the sphere  | none        | none                   | Coulomb         |
//! | `wealth`        | 1 | `-kappa z`                 | none        | `sqrt(2D) Y dB`        | linear          |
//! | `opinion`       | 1 | `-alpha 1{|z|<=1} z`       | none        | `N^{-gamma} dB`        | linear          |
//! | `cluster`       | 1 | `-alpha (a_ij - beta) z`   | none        | none                   | linear          |

mod graph;
mod sampling;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use graph::{
    parse_matrix_market, read_matrix_market, sbm_generate, AdjacencyMatrix, GroundTruthLabels,
};
pub use sampling::{sample_density_mh, sample_initial, semicircle_pdf, MhConfig};

use crate::error::{Error, Result};
use crate::model::{
    Confine, Constraint, InitialLaw, InteractionModel, Kernel, NoiseKind, NoiseSpec, PairExact,
};

pub const MODEL_NAMES: [&str; 7] = [
    "test1d",
    "hamiltonian1d",
    "dyson",
    "thomson",
    "wealth",
    "opinion",
    "cluster",
];

/// Numeric model coefficients by name.
pub type ModelParams = BTreeMap<String, f64>;

/// Run-level inputs some models need besides their coefficients.
#[derive(Clone, Debug, Default)]
pub struct ModelContext {
    pub n: usize,
    pub adjacency: Option<Arc<AdjacencyMatrix>>,
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParam(msg()))
    }
}

fn finite_nonneg(name: &str, v: f64) -> Result<()> {
    require(v.is_finite() && v >= 0.0, || format!("{name} must be finite and >= 0, got {v}"))
}

fn finite_pos(name: &str, v: f64) -> Result<()> {
    require(v.is_finite() && v > 0.0, || format!("{name} must be finite and > 0, got {v}"))
}

/// `dX = -beta X dt + 1/(N-1) sum K(X^i - X^j) dt`, `K(z) = z / (1 + z^2)`.
pub fn model_test1d(beta: f64) -> Result<InteractionModel> {
    finite_nonneg("beta", beta)?;
    Ok(InteractionModel {
        name: "test1d".into(),
        dim: 1,
        confine: if beta == 0.0 {
            Confine::None
        } else {
            Confine::Linear { beta }
        },
        kernel: Kernel::Regularized,
        noise: NoiseSpec::NONE,
        pair_exact: None,
        constraint: None,
        second_order: false,
        pairwise_only: false,
        init: InitialLaw::Semicircle { radius: 2.0 },
    })
}

/// Second-order variant: `X' = V`, `V' = 1/(N-1) sum K(X^i - X^j)`.
pub fn model_hamiltonian1d() -> Result<InteractionModel> {
    Ok(InteractionModel {
        name: "hamiltonian1d".into(),
        confine: Confine::None,
        second_order: true,
        ..model_test1d(0.0)?
    })
}

/// Dyson Brownian motion with the pair force normalized by `1/(N-1)`.
pub fn model_dyson(beta: f64, n: usize) -> Result<InteractionModel> {
    finite_nonneg("beta", beta)?;
    require(n >= 2, || format!("dyson needs n >= 2, got {n}"))?;
    Ok(InteractionModel {
        name: "dyson".into(),
        dim: 1,
        confine: if beta == 0.0 {
            Confine::None
        } else {
            Confine::Linear { beta }
        },
        kernel: Kernel::InverseDistance,
        noise: NoiseSpec::additive(1.0 / (n as f64).sqrt()),
        pair_exact: Some(PairExact::InverseDistance),
        constraint: None,
        second_order: false,
        pairwise_only: false,
        init: InitialLaw::Semicircle { radius: 2.0 },
    })
}

/// Coulomb charges on the unit sphere, noise-free.
pub fn model_thomson() -> Result<InteractionModel> {
    Ok(InteractionModel {
        name: "thomson".into(),
        dim: 3,
        confine: Confine::None,
        kernel: Kernel::Coulomb,
        noise: NoiseSpec::NONE,
        pair_exact: Some(PairExact::Coulomb3d),
        constraint: Some(Constraint::UnitSphere),
        second_order: false,
        pairwise_only: false,
        init: InitialLaw::UniformSphere,
    })
}

/// Homogeneous trading model with quadratic potential and geometric noise:
/// `dY^i = -kappa (Y^i - Y^theta) dt + sqrt(2D) Y^i dB^i`.
pub fn model_wealth(kappa: f64, diffusion: f64) -> Result<InteractionModel> {
    finite_pos("kappa", kappa)?;
    finite_pos("diffusion", diffusion)?;
    Ok(InteractionModel {
        name: "wealth".into(),
        dim: 1,
        confine: Confine::None,
        kernel: Kernel::Linear { rate: kappa },
        noise: NoiseSpec {
            kind: NoiseKind::Multiplicative,
            sigma: (2.0 * diffusion).sqrt(),
            scale_exponent: None,
        },
        pair_exact: Some(PairExact::Linear),
        constraint: None,
        second_order: false,
        pairwise_only: true,
        init: InitialLaw::HalfNormal,
    })
}

/// Bounded-confidence opinion exchange with influence `1{r <= 1}` and optional
/// noise `N^{-gamma} dB`.
pub fn model_opinion(alpha: f64, epsilon_exponent: Option<f64>) -> Result<InteractionModel> {
    finite_pos("alpha", alpha)?;
    if let Some(g) = epsilon_exponent {
        require(g.is_finite(), || "epsilon_exponent must be finite".into())?;
    }
    Ok(InteractionModel {
        name: "opinion".into(),
        dim: 1,
        confine: Confine::None,
        kernel: Kernel::BoundedConfidence { alpha, radius: 1.0 },
        noise: match epsilon_exponent {
            Some(g) => NoiseSpec {
                kind: NoiseKind::AdditiveScaled,
                sigma: 1.0,
                scale_exponent: Some(g),
            },
            None => NoiseSpec::NONE,
        },
        pair_exact: Some(PairExact::Linear),
        constraint: None,
        second_order: false,
        pairwise_only: true,
        init: InitialLaw::Uniform { lo: 0.0, hi: 10.0 },
    })
}

/// Graph clustering dynamics `dX^i/dt = alpha (a_{i theta} - beta)(X^theta - X^i)`.
pub fn model_cluster(
    adjacency: Arc<AdjacencyMatrix>,
    alpha: f64,
    beta: f64,
) -> Result<InteractionModel> {
    finite_pos("alpha", alpha)?;
    let max_w = adjacency.max_weight();
    require(beta > 0.0 && beta < max_w, || {
        format!("beta must lie in (0, {max_w}), got {beta}")
    })?;
    Ok(InteractionModel {
        name: "cluster".into(),
        dim: 1,
        confine: Confine::None,
        kernel: Kernel::Weighted {
            adjacency,
            alpha,
            beta,
        },
        noise: NoiseSpec::NONE,
        pair_exact: Some(PairExact::Linear),
        constraint: None,
        second_order: false,
        pairwise_only: true,
        init: InitialLaw::Uniform { lo: 0.0, hi: 50.0 },
    })
}

/// Parameter keys each model accepts, with defaults (`NaN` = optional, no default).
pub fn model_param_defaults(name: &str) -> Result<&'static [(&'static str, f64)]> {
    Ok(match name {
        "test1d" => &[("beta", 1.0), ("sigma", 0.0)],
        "hamiltonian1d" => &[],
        "dyson" => &[("beta", 1.0)],
        "thomson" => &[],
        "wealth" => &[("kappa", 1.0), ("diffusion", 1.0)],
        "opinion" => &[("alpha", 40.0), ("epsilon_exponent", f64::NAN)],
        "cluster" => &[("alpha", 40.0), ("beta", 0.5)],
        other => return Err(Error::UnknownModel(other.to_string())),
    })
}

/// Builds a named model from its coefficients. Unknown keys are rejected.
pub fn make_model(name: &str, params: &ModelParams, ctx: &ModelContext) -> Result<InteractionModel> {
    let defaults = model_param_defaults(name)?;
    for key in params.keys() {
        if !defaults.iter().any(|(k, _)| k == key) {
            return Err(Error::UnknownParam {
                model: name.to_string(),
                key: key.clone(),
            });
        }
    }
    let get = |key: &str| -> f64 {
        params.get(key).copied().unwrap_or_else(|| {
            defaults
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .unwrap_or(f64::NAN)
        })
    };
    match name {
        "test1d" => {
            let sigma = get("sigma");
            finite_nonneg("sigma", sigma)?;
            let mut m = model_test1d(get("beta"))?;
            m.noise = NoiseSpec::additive(sigma);
            Ok(m)
        }
        "hamiltonian1d" => model_hamiltonian1d(),
        "dyson" => model_dyson(get("beta"), ctx.n),
        "thomson" => model_thomson(),
        "wealth" => model_wealth(get("kappa"), get("diffusion")),
        "opinion" => {
            let g = get("epsilon_exponent");
            model_opinion(get("alpha"), (!g.is_nan()).then_some(g))
        }
        "cluster" => {
            let adjacency = ctx
                .adjacency
                .clone()
                .ok_or_else(|| Error::param("cluster model needs an adjacency matrix"))?;
            if ctx.n != 0 && adjacency.n() != ctx.n {
                return Err(Error::Shape(format!(
                    "adjacency is {0}x{0} but n = {1}",
                    adjacency.n(),
                    ctx.n
                )));
            }
            model_cluster(adjacency, get("alpha"), get("beta"))
        }
        _ => unreachable!("checked by model_param_defaults"),
    }
}

/// Splits sorted 1-D positions into clusters at gaps wider than `factor` times
/// the median adjacent gap, returning a label per particle.
pub fn labels_from_gaps(positions: &[f64], factor: f64) -> GroundTruthLabels {
    let n = positions.len();
    if n < 2 {
        return GroundTruthLabels::from_arbitrary(&vec![0; n]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
    let gaps: Vec<f64> = order
        .windows(2)
        .map(|w| positions[w[1]] - positions[w[0]])
        .collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let mut ids = vec![0i64; n];
    let mut cluster = 0i64;
    ids[order[0]] = 0;
    for (k, g) in gaps.iter().enumerate() {
        if *g > factor * median {
            cluster += 1;
        }
        ids[order[k + 1]] = cluster;
    }
    GroundTruthLabels::from_arbitrary(&ids)
}
