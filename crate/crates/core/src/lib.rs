//! Random batch methods for interacting particle systems.
//!
//! A first-order system of `N` particles
//!
//! ```text
//! dX^i = b(X^i) dt + 1/(N-1) sum_{j != i} K(X^i - X^j) dt + sigma dB^i
//! ```
//!
//! costs `O(N^2)` kernel evaluations per step when stepped directly. The random
//! batch methods turn interactions on only inside small random batches, so a
//! step costs `O(pN)`, and the error against the coupled system decays like
//! `sqrt(tau)`.
//!
//! Modules, bottom-up:
//!
//! - [`rng`], [`ensemble`], [`model`], [`plan`]: shared types.
//! - [`batching`]: random divisions and the batch-force discrepancy statistic.
//! - [`integrators`]: stepping drivers and exact pair flows.
//! - [`models`]: the concrete systems and their initial data.
//! - [`diagnostics`]: errors, distances to reference laws, structure measures.
//! - [`harness`]: coupled convergence studies, experiments and timing.
//!
//! ```
//! use rbm::integrators::{Integrator, Intra, SchemeKind, StepScheme};
//! use rbm::models::{model_test1d, sample_initial};
//! use rbm::rng::{derive_stream, stream_id, tag};
//!
//! let model = model_test1d(1.0).unwrap();
//! let mut init_rng = derive_stream(42, stream_id(tag::INIT, 0));
//! let mut ens = sample_initial(&model, 100, &mut init_rng).unwrap();
//! let scheme = StepScheme::new(&model, SchemeKind::Rbm1, Intra::Euler, 2);
//! let mut stepper = Integrator::new(&model, scheme, 0.01, 42, 100).unwrap();
//! stepper.advance(&mut ens, 100).unwrap();
//! assert!((ens.time - 1.0).abs() < 1e-12);
//! ```

pub mod batching;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod model;
pub mod models;
pub mod plan;
pub mod rng;

pub use ensemble::ParticleEnsemble;
pub use error::{Error, Result};
pub use model::InteractionModel;
pub use plan::SimPlan;
pub use rng::{derive_stream, RngStream};
