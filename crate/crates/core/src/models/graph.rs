//! Weighted graphs for the clustering dynamics.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Sparse nonnegative weights `a_ij` with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    /// Row-wise `(column, weight)` sorted by column; zero weights are not stored.
    rows: Vec<Vec<(usize, f64)>>,
    symmetric: bool,
}

impl AdjacencyMatrix {
    /// Builds from `(i, j, w)` triplets. Duplicates are summed; diagonal entries
    /// are dropped; weights are replaced by their absolute values. With
    /// `symmetric`, each off-diagonal triplet is mirrored.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        symmetric: bool,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, w) in triplets {
            if i >= n || j >= n {
                return Err(Error::Shape(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            if !w.is_finite() {
                return Err(Error::param(format!("non-finite weight at ({i}, {j})")));
            }
            if i == j || w == 0.0 {
                continue;
            }
            rows[i].push((j, w.abs()));
            if symmetric {
                rows[j].push((i, w.abs()));
            }
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(c, w) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += w,
                    _ => merged.push((c, w)),
                }
            }
            *row = merged;
        }
        let mut m = AdjacencyMatrix {
            n,
            rows,
            symmetric: false,
        };
        m.symmetric = m.check_symmetric();
        Ok(m)
    }

    fn check_symmetric(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().all(|&(j, w)| self.weight(j, i) == w))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |e| e.0) {
            Ok(k) => row[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .map(|e| e.1)
            .fold(0.0, f64::max)
    }

    /// Unordered pairs `i < j` with a nonzero weight in either direction.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, _)| (i.min(j), i.max(j))))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `|B B^T|` with the diagonal dropped.
    pub fn gram_abs(&self) -> AdjacencyMatrix {
        // Column-wise view of B so that (B B^T)_ik = sum_j B_ij B_kj.
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                cols[j].push((i, w));
            }
        }
        let mut acc = vec![0.0; self.n];
        let mut touched = Vec::new();
        let mut rows = Vec::with_capacity(self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, bij) in row {
                for &(k, bkj) in &cols[j] {
                    if k != i {
                        if acc[k] == 0.0 {
                            touched.push(k);
                        }
                        acc[k] += bij * bkj;
                    }
                }
            }
            touched.sort_unstable();
            let r: Vec<(usize, f64)> = touched
                .iter()
                .filter(|&&k| acc[k] != 0.0)
                .map(|&k| (k, acc[k].abs()))
                .collect();
            for &k in &touched {
                acc[k] = 0.0;
            }
            touched.clear();
            rows.push(r);
        }
        let mut m = AdjacencyMatrix {
            n: self.n,
            rows,
            symmetric: false,
        };
        m.symmetric = m.check_symmetric();
        m
    }

    /// Symmetric relabeling: entry `(k, l)` of the result is `(perm[k], perm[l])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<AdjacencyMatrix> {
        if perm.len() != self.n {
            return Err(Error::Shape("permutation length".into()));
        }
        let mut inverse = vec![0; self.n];
        for (k, &p) in perm.iter().enumerate() {
            inverse[p] = k;
        }
        let triplets = self.rows.iter().enumerate().flat_map(|(i, row)| {
            let inverse = &inverse;
            row.iter().map(move |&(j, w)| (inverse[i], inverse[j], w))
        });
        AdjacencyMatrix::from_triplets(self.n, triplets.collect::<Vec<_>>(), false)
    }

    /// Weighted `q`-quantile of `|i - j|` over stored entries, weighting each
    /// entry by its value. Small values mean heavy entries sit near the diagonal.
    pub fn weighted_band_percentile(&self, q: f64) -> f64 {
        let mut items: Vec<(usize, f64)> = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, w)| (i.abs_diff(j), w)))
            .collect();
        if items.is_empty() {
            return 0.0;
        }
        items.sort_by_key(|e| e.0);
        let total: f64 = items.iter().map(|e| e.1).sum();
        let mut acc = 0.0;
        for (d, w) in &items {
            acc += w;
            if acc >= q * total {
                return *d as f64;
            }
        }
        items.last().unwrap().0 as f64
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }
}

/// Cluster ids, contiguous from zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthLabels {
    labels: Vec<usize>,
}

impl GroundTruthLabels {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::param("cluster ids must be contiguous from 0"));
        }
        Ok(GroundTruthLabels { labels })
    }

    /// Relabels arbitrary ids to `0..k` in order of first appearance.
    pub fn from_arbitrary(ids: &[i64]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = ids
            .iter()
            .map(|id| {
                let next = map.len();
                *map.entry(*id).or_insert(next)
            })
            .collect();
        GroundTruthLabels { labels }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut ids = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            ids.push(t.parse::<i64>().map_err(|e| Error::Config {
                line: k + 1,
                msg: format!("bad label `{t}`: {e}"),
            })?);
        }
        Ok(Self::from_arbitrary(&ids))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = String::with_capacity(self.labels.len() * 3);
        for l in &self.labels {
            s.push_str(&l.to_string());
            s.push('\n');
        }
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

/// Stochastic block model: blocks of the given sizes, edge probability `p_in`
/// inside a block and `q_out` across blocks, independent upper-triangle entries.
pub fn sbm_generate(
    sizes: &[usize],
    p_in: f64,
    q_out: f64,
    rng: &mut RngStream,
) -> Result<(AdjacencyMatrix, GroundTruthLabels)> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&q_out) || q_out >= p_in {
        return Err(Error::param(format!(
            "need 0 <= q_out < p_in <= 1, got p_in={p_in}, q_out={q_out}"
        )));
    }
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::param("block sizes must be positive"));
    }
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = labels.len();
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let prob = if labels[i] == labels[j] { p_in } else { q_out };
            if rng.random::<f64>() < prob {
                triplets.push((i, j, 1.0));
            }
        }
    }
    let adj = AdjacencyMatrix::from_triplets(n, triplets, true)?;
    Ok((adj, GroundTruthLabels { labels }))
}

/// Reads a Matrix Market coordinate file. Symmetric and skew-symmetric storage
/// is expanded; values are replaced by absolute values.
pub fn read_matrix_market(path: &Path) -> Result<AdjacencyMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text)
}

pub fn parse_matrix_market(text: &str) -> Result<AdjacencyMatrix> {
    let err = |line: usize, msg: &str| Error::MatrixMarket {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if h.len() < 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(err(1, "missing %%MatrixMarket matrix header"));
    }
    if h[2] != "coordinate" {
        return Err(err(1, "only coordinate format is supported"));
    }
    let pattern = match h[3].as_str() {
        "pattern" => true,
        "real" | "integer" | "double" => false,
        other => return Err(err(1, &format!("unsupported field `{other}`"))),
    };
    let mirrored = match h[4].as_str() {
        "general" => false,
        "symmetric" | "skew-symmetric" | "hermitian" => true,
        other => return Err(err(1, &format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (k, line) in lines {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| err(k + 1, "bad integer"));
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(err(k + 1, "size line needs rows cols nnz"));
                }
                let (r, c) = (num(fields[0])?, num(fields[1])?);
                if r != c {
                    return Err(err(k + 1, "adjacency matrix must be square"));
                }
                size = Some((r, c, num(fields[2])?));
            }
            Some((n, _, _)) => {
                if fields.len() < if pattern { 2 } else { 3 } {
                    return Err(err(k + 1, "short entry line"));
                }
                let (i, j) = (num(fields[0])?, num(fields[1])?);
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(err(k + 1, "index out of range"));
                }
                let w = if pattern {
                    1.0
                } else {
                    fields[2]
                        .parse::<f64>()
                        .map_err(|_| err(k + 1, "bad value"))?
                };
                triplets.push((i - 1, j - 1, w));
            }
        }
    }
    let (n, _, nnz) = size.ok_or_else(|| err(2, "missing size line"))?;
    if triplets.len() != nnz {
        return Err(err(
            0,
            &format!("declared {nnz} entries, found {}", triplets.len()),
        ));
    }
    AdjacencyMatrix::from_triplets(n, triplets, mirrored)
}
