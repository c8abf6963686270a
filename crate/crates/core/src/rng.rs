//! Deterministic random streams.
//!
//! Every draw in a run comes from a stream addressed by `(master_seed, stream_id)`.
//! The generator is ChaCha8: the master seed selects the key and the stream id
//! selects the ChaCha stream, so streams with distinct ids never overlap and any
//! stream can be recreated without replaying others.
//!
//! Gaussian variates use the Box–Muller transform (both outputs are used, the
//! second one is cached). The transform is part of the replay contract.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id namespaces. The high 16 bits carry the purpose, the low 48 bits an index.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const BATCH: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const GRAPH: u64 = 4;
    pub const SAMPLER: u64 = 5;
    pub const AUX: u64 = 6;
}

const INDEX_BITS: u32 = 48;
const INDEX_MASK: u64 = (1 << INDEX_BITS) - 1;

/// Builds a stream id from a purpose tag and an index within that purpose.
pub fn stream_id(tag: u64, index: u64) -> u64 {
    (tag << INDEX_BITS) | (index & INDEX_MASK)
}

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

/// Creates the stream `(master_seed, stream_id)`.
pub fn derive_stream(master_seed: u64, stream_id: u64) -> RngStream {
    let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
    inner.set_stream(stream_id);
    RngStream {
        master_seed,
        stream_id,
        inner,
        spare_normal: None,
    }
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A sibling stream under the same master seed.
    pub fn derive(&self, stream_id: u64) -> RngStream {
        derive_stream(self.master_seed, stream_id)
    }

    /// Uniform on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - U lies in (0, 1], so the logarithm is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for z in out {
            *z = self.normal();
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
