use crate::error::{Error, Result};

/// Positions (and optionally velocities) of `n` particles in `dim` dimensions.
///
/// Coordinates live in one contiguous buffer indexed `(particle, axis)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    n: usize,
    dim: usize,
    positions: Vec<f64>,
    velocities: Option<Vec<f64>>,
    pub time: f64,
}

impl ParticleEnsemble {
    /// Builds an ensemble from a flat `(particle, axis)` buffer.
    pub fn new(dim: usize, positions: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("dimension must be positive".into()));
        }
        if positions.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} coordinates is not a multiple of dim={dim}",
                positions.len()
            )));
        }
        if let Some(k) = positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::Shape(format!(
                "non-finite coordinate for particle {}",
                k / dim
            )));
        }
        Ok(ParticleEnsemble {
            n: positions.len() / dim,
            dim,
            positions,
            velocities: None,
            time: 0.0,
        })
    }

    /// One-dimensional ensemble from scalar samples.
    pub fn from_scalars(samples: Vec<f64>) -> Result<Self> {
        Self::new(1, samples)
    }

    pub fn with_velocities(mut self, velocities: Vec<f64>) -> Result<Self> {
        if velocities.len() != self.positions.len() {
            return Err(Error::Shape(format!(
                "expected {} velocity coordinates, got {}",
                self.positions.len(),
                velocities.len()
            )));
        }
        if velocities.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite velocity".into()));
        }
        self.velocities = Some(velocities);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn position_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn velocities(&self) -> Option<&[f64]> {
        self.velocities.as_deref()
    }

    pub fn velocities_mut(&mut self) -> Option<&mut [f64]> {
        self.velocities.as_deref_mut()
    }

    pub fn has_velocities(&self) -> bool {
        self.velocities.is_some()
    }

    /// The first particle holding a non-finite coordinate, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        let bad = |buf: &[f64]| buf.iter().position(|x| !x.is_finite());
        let p = bad(&self.positions);
        let v = self.velocities.as_deref().and_then(bad);
        match (p, v) {
            (Some(a), Some(b)) => Some(a.min(b) / self.dim),
            (Some(a), None) | (None, Some(a)) => Some(a / self.dim),
            (None, None) => None,
        }
    }

    /// Scalar view for one-dimensional ensembles.
    pub fn scalars(&self) -> Option<&[f64]> {
        (self.dim == 1).then_some(self.positions.as_slice())
    }

    /// Returns a copy with particles relabeled: particle `k` of the result is
    /// particle `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Shape("permutation length".into()));
        }
        let d = self.dim;
        let gather = |buf: &[f64]| {
            perm.iter()
                .flat_map(|&i| buf[i * d..(i + 1) * d].iter().copied())
                .collect::<Vec<_>>()
        };
        Ok(ParticleEnsemble {
            n: self.n,
            dim: d,
            positions: gather(&self.positions),
            velocities: self.velocities.as_deref().map(gather),
            time: self.time,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(ParticleEnsemble::new(3, vec![0.0; 7]).is_err());
        assert!(ParticleEnsemble::new(1, vec![0.0, f64::NAN]).is_err());
        assert!(ParticleEnsemble::new(0, vec![]).is_err());
        let e = ParticleEnsemble::new(1, vec![1.0, 2.0]).unwrap();
        assert!(e.with_velocities(vec![0.0]).is_err());
    }

    #[test]
    fn indexing() {
        let e = ParticleEnsemble::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.n(), 2);
        assert_eq!(e.position(1), &[3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn construction_from_samples(xs in prop::collection::vec(-1e6f64..1e6, 0..200)) {
            let k = xs.len();
            let e = ParticleEnsemble::from_scalars(xs).unwrap();
            prop_assert_eq!(e.n(), k);
            prop_assert!(e.first_non_finite().is_none());
        }
    }
}
