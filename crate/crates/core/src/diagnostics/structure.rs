//! Structure measures: sphere energy, neighbor counts, partition agreement and
//! the reordering permutation.

use std::collections::HashMap;

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::models::GroundTruthLabels;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn require_3d(ens: &ParticleEnsemble) -> Result<()> {
    if ens.dim() != 3 {
        return Err(Error::Shape(format!("expected dim 3, got {}", ens.dim())));
    }
    Ok(())
}

/// `1/(N-1) * 1/2 sum_{i != j} 1/|x_i - x_j|`; `+inf` if two particles coincide.
pub fn sphere_energy(ens: &ParticleEnsemble) -> Result<f64> {
    require_3d(ens)?;
    let n = ens.n();
    if n < 2 {
        return Err(Error::param("energy needs at least 2 particles"));
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += 1.0 / dist(ens.position(i), ens.position(j));
        }
    }
    Ok(s / (n - 1) as f64)
}

/// For each particle, the number of others within 1.5 times the median
/// nearest-neighbor distance.
pub fn neighbor_counts(ens: &ParticleEnsemble) -> Result<Vec<usize>> {
    require_3d(ens)?;
    let n = ens.n();
    if n < 2 {
        return Err(Error::param("neighbor counts need at least 2 particles"));
    }
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let r = dist(ens.position(i), ens.position(j));
            d[i * n + j] = r;
            d[j * n + i] = r;
        }
    }
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| d[i * n + j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nearest.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        nearest[n / 2]
    } else {
        0.5 * (nearest[n / 2 - 1] + nearest[n / 2])
    };
    let cut = 1.5 * median;
    Ok((0..n)
        .map(|i| (0..n).filter(|&j| j != i && d[i * n + j] <= cut).count())
        .collect())
}

fn choose2(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
pub fn cluster_score(predicted: &GroundTruthLabels, truth: &GroundTruthLabels) -> Result<f64> {
    let (a, b) = (predicted.as_slice(), truth.as_slice());
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "label lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = joint.values().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        // Both labelings trivial in the same way (one cluster or all singletons).
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Permutation listing particle indices by ascending position (ties by index).
pub fn reorder_permutation(positions: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..positions.len()).collect();
    perm.sort_by(|&i, &j| positions[i].total_cmp(&positions[j]));
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn cloud(points: &[[f64; 3]]) -> ParticleEnsemble {
        ParticleEnsemble::new(3, points.iter().flatten().copied().collect()).unwrap()
    }

    fn labels(xs: &[usize]) -> GroundTruthLabels {
        GroundTruthLabels::from_arbitrary(&xs.iter().map(|&x| x as i64).collect::<Vec<_>>())
    }

    #[test]
    fn energy_examples() {
        let pair = cloud(&[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]);
        assert!((sphere_energy(&pair).unwrap() - 0.5).abs() < 1e-15);

        let s = 1.0 / 3f64.sqrt();
        let tetra = cloud(&[[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]]);
        // Oracle: 6 edges of length sqrt(8/3), divided by N - 1 = 3.
        let want = 6.0 / (8.0f64 / 3.0).sqrt() / 3.0;
        assert!((sphere_energy(&tetra).unwrap() - want).abs() < 1e-14);
        assert!((want - 1.224745).abs() < 1e-6);

        let same = cloud(&[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert_eq!(sphere_energy(&same).unwrap(), f64::INFINITY);
        assert!(sphere_energy(&ParticleEnsemble::from_scalars(vec![0.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn energy_rotation_invariant() {
        let mut rng = derive_stream(1, 0);
        let pts: Vec<[f64; 3]> = (0..20)
            .map(|_| {
                let v: [f64; 3] = std::array::from_fn(|_| rng.normal());
                let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                [v[0] / r, v[1] / r, v[2] / r]
            })
            .collect();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rotated: Vec<[f64; 3]> = pts.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]).collect();
        let (e0, e1) = (sphere_energy(&cloud(&pts)).unwrap(), sphere_energy(&cloud(&rotated)).unwrap());
        assert!((e0 - e1).abs() < 1e-12 * e0);
    }

    #[test]
    fn neighbor_fixtures() {
        let pair = cloud(&[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]);
        assert_eq!(neighbor_counts(&pair).unwrap(), vec![1, 1]);

        // Octahedron: 4 neighbors at sqrt(2) and the antipode at 2, which is
        // inside 1.5 * sqrt(2).
        let octa = cloud(&[
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ]);
        assert_eq!(neighbor_counts(&octa).unwrap(), vec![5; 6]);

        // Icosahedron: 5 neighbors at the edge length, next shell at phi times it.
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let r = (1.0 + phi * phi).sqrt();
        let mut ico = Vec::new();
        for &a in &[-1.0, 1.0] {
            for &b in &[-phi, phi] {
                ico.push([0.0, a / r, b / r]);
                ico.push([a / r, b / r, 0.0]);
                ico.push([b / r, 0.0, a / r]);
            }
        }
        assert_eq!(neighbor_counts(&cloud(&ico)).unwrap(), vec![5; 12]);
    }

    #[test]
    fn neighbor_symmetry() {
        let mut rng = derive_stream(2, 0);
        let xs: Vec<f64> = (0..90).map(|_| rng.normal()).collect();
        let e = ParticleEnsemble::new(3, xs).unwrap();
        let counts = neighbor_counts(&e).unwrap();
        // Total count is even because the relation is symmetric.
        assert_eq!(counts.iter().sum::<usize>() % 2, 0);
    }

    #[test]
    fn ari_examples() {
        let t = labels(&[0, 0, 1, 1]);
        assert_eq!(cluster_score(&t, &t).unwrap(), 1.0);
        assert_eq!(cluster_score(&labels(&[1, 1, 0, 0]), &t).unwrap(), 1.0);
        let constant = labels(&[0; 100]);
        let balanced = labels(&(0..100).map(|i| i % 2).collect::<Vec<_>>());
        assert!(cluster_score(&constant, &balanced).unwrap().abs() < 1e-12);
        assert!(cluster_score(&t, &labels(&[0, 0, 1])).is_err());
        // Hand-checked value: contingency [[2,1],[0,1]] gives ARI = 0.
        let ari = cluster_score(&labels(&[0, 0, 0, 1]), &labels(&[0, 0, 1, 1])).unwrap();
        assert!(ari.abs() < 1e-12, "{ari}");
    }

    #[test]
    fn reorder_examples() {
        assert_eq!(reorder_permutation(&[1.0, 2.0, 3.0]), vec![0, 1, 2]);
        assert_eq!(reorder_permutation(&[3.0, 2.0, 1.0]), vec![2, 1, 0]);
        assert_eq!(reorder_permutation(&[0.5, -1.0, 0.0]), vec![1, 2, 0]);
    }
}
