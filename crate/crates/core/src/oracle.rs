//! Exact brute-force answers on tiny instances.
//!
//! Everything here enumerates set partitions of at most twelve points into
//! exactly `k` nonempty blocks (restricted growth strings, so each unlabeled
//! partition is visited once and in lexicographic order). That is enough to
//! compute the empirical risk minimizer, the stationary set and the optimal
//! set of a finitely supported law, together with the separation factor `ε`,
//! the minimal codepoint distance `B` and the minimal optimal cell mass.

use crate::data::{lex_cmp, nearest, sq_dist, Codebook, Dataset};
use crate::error::{Error, Result};
use crate::quantization::empirical_distortion;

/// Largest point count accepted by the enumerations.
pub const MAX_POINTS: usize = 12;
/// Largest `k` accepted by [`exact_erm`].
pub const MAX_ERM_K: usize = 3;
/// Coordinate tolerance when identifying codebooks up to relabeling.
pub const DEDUP_TOL: f64 = 1e-9;
/// Relative tolerance when deciding that a stationary codebook is optimal.
pub const OPTIMAL_TOL: f64 = 1e-12;
/// Relative tolerance under which two squared distances are a tie.
pub const TIE_TOL: f64 = 1e-12;

/// A probability law on finitely many points of `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    dim: usize,
    support: Vec<f64>,
    weights: Vec<f64>,
    radius: f64,
}

impl FiniteDistribution {
    pub fn new(rows: &[Vec<f64>], weights: Vec<f64>, radius: Option<f64>) -> Result<Self> {
        let support = Dataset::from_rows(rows, radius)?;
        if weights.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} support points",
                weights.len(),
                rows.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            dim: support.dim(),
            radius: support.radius(),
            support: support.as_flat().to_vec(),
            weights,
        })
    }

    pub fn uniform(rows: &[Vec<f64>], radius: Option<f64>) -> Result<Self> {
        let n = rows.len().max(1);
        Self::new(rows, vec![1.0 / n as f64; rows.len()], radius)
    }

    pub fn uniform_scalars(values: &[f64], radius: Option<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        Self::uniform(&rows, radius)
    }

    /// Law with the empirical frequencies of `dataset`, one atom per point.
    pub fn empirical(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = dataset.len();
        Ok(Self {
            dim: dataset.dim(),
            support: dataset.as_flat().to_vec(),
            weights: vec![1.0 / n as f64; n],
            radius: dataset.radius(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.support[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.support.chunks_exact(self.dim)
    }

    /// Atoms paired with their weights.
    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points().zip(self.weights.iter().copied())
    }

    /// Exact distortion `Σ_s w_s min_j ‖x_s − c_j‖²`.
    pub fn distortion(&self, codebook: &Codebook) -> Result<f64> {
        check_dim(self.dim, codebook)?;
        Ok(self
            .atoms()
            .map(|(x, w)| w * nearest(x, codebook).1)
            .sum())
    }

    /// Mass of each Voronoi cell `W_j(c)`.
    pub fn cell_masses(&self, codebook: &Codebook) -> Result<Vec<f64>> {
        check_dim(self.dim, codebook)?;
        let mut masses = vec![0.0; codebook.k()];
        for (x, w) in self.atoms() {
            masses[nearest(x, codebook).0] += w;
        }
        Ok(masses)
    }

    /// Same law restricted to atoms of positive weight.
    fn positive_part(&self) -> (Vec<&[f64]>, Vec<f64>) {
        self.atoms().filter(|(_, w)| *w > 0.0).unzip()
    }
}

fn check_dim(dim: usize, codebook: &Codebook) -> Result<()> {
    if codebook.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: codebook.dim(),
        });
    }
    Ok(())
}

/// Calls `visit` on every partition of `0..n` into exactly `k` nonempty
/// blocks, as a restricted growth string, in lexicographic order.
fn for_each_partition(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k == 0 || k > n {
        return;
    }
    fn rec(labels: &mut Vec<usize>, used: usize, n: usize, k: usize, visit: &mut impl FnMut(&[usize])) {
        let i = labels.len();
        if i == n {
            if used == k {
                visit(labels);
            }
            return;
        }
        // Leave room to open the blocks still missing.
        let remaining = n - i;
        for b in 0..=used.min(k - 1) {
            let used_next = used.max(b + 1);
            if used_next + remaining - 1 < k {
                continue;
            }
            labels.push(b);
            rec(labels, used_next, n, k, visit);
            labels.pop();
        }
    }
    let mut labels = Vec::with_capacity(n);
    rec(&mut labels, 0, n, k, &mut visit);
}

/// Weighted block centroids and block masses.
fn block_centroids(points: &[&[f64]], weights: &[f64], labels: &[usize], k: usize, dim: usize) -> (Codebook, Vec<f64>) {
    let mut sums = vec![0.0; k * dim];
    let mut mass = vec![0.0; k];
    for ((p, &w), &b) in points.iter().zip(weights).zip(labels) {
        mass[b] += w;
        for (s, v) in sums[b * dim..(b + 1) * dim].iter_mut().zip(p.iter()) {
            *s += w * v;
        }
    }
    for b in 0..k {
        sums[b * dim..(b + 1) * dim]
            .iter_mut()
            .for_each(|s| *s /= mass[b]);
    }
    (Codebook::new(dim, sums).expect("k ≥ 1 blocks"), mass)
}

/// Unweighted cell means, summed in point order.
fn block_means(dataset: &Dataset, labels: &[usize], k: usize) -> Codebook {
    let dim = dataset.dim();
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &b) in dataset.points().zip(labels) {
        counts[b] += 1;
        for (s, v) in sums[b * dim..(b + 1) * dim].iter_mut().zip(p) {
            *s += v;
        }
    }
    for b in 0..k {
        let c = counts[b] as f64;
        sums[b * dim..(b + 1) * dim].iter_mut().for_each(|s| *s /= c);
    }
    Codebook::new(dim, sums).expect("k ≥ 1 blocks")
}

/// Exact empirical risk minimizer by enumeration of all partitions.
///
/// Ties are resolved in favour of the lexicographically smallest restricted
/// growth string, i.e. the first minimum met.
pub fn exact_erm(dataset: &Dataset, k: usize) -> Result<(Codebook, f64)> {
    let n = dataset.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 ≤ k ≤ n, got k={k}, n={n}")));
    }
    if n > MAX_POINTS || k > MAX_ERM_K {
        return Err(Error::TooLarge(format!(
            "exact ERM needs n ≤ {MAX_POINTS} and k ≤ {MAX_ERM_K}, got n={n}, k={k}"
        )));
    }
    let dim = dataset.dim();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_partition(n, k, |labels| {
        let c = block_means(dataset, labels, k);
        let cost: f64 = dataset
            .points()
            .zip(labels)
            .map(|(p, &b)| sq_dist(p, &c.as_flat()[b * dim..(b + 1) * dim]))
            .sum::<f64>()
            / n as f64;
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((labels.to_vec(), cost));
        }
    });
    let (labels, _) = best.expect("at least one partition when k ≤ n");
    let codebook = block_means(dataset, &labels, k);
    let distortion = empirical_distortion(dataset, &codebook)?;
    Ok((codebook, distortion))
}

/// All stationary codebooks of `dist` with `k` nonempty cells, canonical
/// (lexicographically sorted codepoints) and deduplicated up to relabeling.
///
/// A partition of the support contributes its block centroids when, for some
/// labeling of those centroids, the Voronoi partition with the lowest-index
/// tie-break reproduces the partition. Distances within a relative `TIE_TOL`
/// count as ties, so weighted and unweighted centroids agree. Every atom must be nearest to its own
/// centroid, and the orderings forced by tied atoms must be acyclic.
pub fn enumerate_stationary(dist: &FiniteDistribution, k: usize) -> Result<Vec<Codebook>> {
    let (points, weights) = dist.positive_part();
    let r = points.len();
    if r > MAX_POINTS {
        return Err(Error::TooLarge(format!(
            "stationary enumeration needs at most {MAX_POINTS} atoms, got {r}"
        )));
    }
    if k == 0 || k > r {
        return Err(Error::invalid(format!(
            "need 1 ≤ k ≤ {r} (atoms of positive mass), got k={k}"
        )));
    }
    let dim = dist.dim();
    let mut found: Vec<Codebook> = Vec::new();
    for_each_partition(r, k, |labels| {
        let (c, _) = block_centroids(&points, &weights, labels, k, dim);
        if !tie_break_realizable(&points, labels, &c) {
            return;
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| lex_cmp(c.codepoint(a), c.codepoint(b)));
        let canonical = c.permuted(&order);
        if !found.iter().any(|f| f.relabeled_max_diff(&canonical) <= DEDUP_TOL) {
            found.push(canonical);
        }
    });
    found.sort_by(|a, b| lex_cmp(a.as_flat(), b.as_flat()));
    Ok(found)
}

/// Whether some labeling of `c` makes the tie-broken Voronoi partition equal
/// to `labels`: each atom is nearest to its own block's centroid, and block
/// `b` must precede every other block tied with it at one of its atoms.
fn tie_break_realizable(points: &[&[f64]], labels: &[usize], c: &Codebook) -> bool {
    let k = c.k();
    let mut before = vec![vec![false; k]; k];
    for (p, &b) in points.iter().zip(labels) {
        let d: Vec<f64> = c.codepoints().map(|q| sq_dist(p, q)).collect();
        let best = d.iter().copied().fold(f64::INFINITY, f64::min);
        let slack = TIE_TOL * best.max(1.0);
        if d[b] > best + slack {
            return false;
        }
        for (j, &dj) in d.iter().enumerate() {
            if j != b && dj <= d[b] + slack {
                before[b][j] = true;
            }
        }
    }
    // Kahn's algorithm on the precedence graph.
    let mut indegree: Vec<usize> = (0..k).map(|j| (0..k).filter(|&i| before[i][j]).count()).collect();
    let mut ready: Vec<usize> = (0..k).filter(|&j| indegree[j] == 0).collect();
    let mut placed = 0;
    while let Some(i) = ready.pop() {
        placed += 1;
        for j in 0..k {
            if before[i][j] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(j);
                }
            }
        }
    }
    placed == k
}

/// Optimal/stationary structure of a finitely supported law.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    /// The stationary set, canonical and sorted.
    pub stationary: Vec<Codebook>,
    /// Exact distortion of each stationary codebook.
    pub distortions: Vec<f64>,
    /// The optimal codebooks (a subset of `stationary`).
    pub optimal: Vec<Codebook>,
    /// Separation factor; `+∞` when every stationary codebook is optimal.
    pub epsilon: f64,
    /// Smallest distance between two codepoints of an optimal codebook.
    pub b: f64,
    /// Smallest cell mass over optimal codebooks.
    pub p_min: f64,
    /// Optimal distortion.
    pub r_star: f64,
    /// `R*_{k-1} - R*_k`: the gap to codebooks with an empty cell, which satisfy
    /// the centroid condition trivially but are not listed in `stationary`.
    /// `+∞` for `k = 1`.
    pub degenerate_gap: f64,
    /// Enclosing radius of the law.
    pub radius: f64,
    pub k: usize,
}

pub fn stationary_report(dist: &FiniteDistribution, k: usize) -> Result<StationaryReport> {
    let stationary = enumerate_stationary(dist, k)?;
    let distortions = stationary
        .iter()
        .map(|c| dist.distortion(c))
        .collect::<Result<Vec<_>>>()?;
    let r_star = distortions.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = OPTIMAL_TOL * r_star.max(1.0);
    let mut optimal = Vec::new();
    let mut epsilon = f64::INFINITY;
    for (c, &r) in stationary.iter().zip(&distortions) {
        if r <= r_star + tol {
            optimal.push(c.clone());
        } else {
            epsilon = epsilon.min(r - r_star);
        }
    }
    let mut b = f64::INFINITY;
    let mut p_min = f64::INFINITY;
    for c in &optimal {
        b = b.min(c.min_separation());
        let masses = dist.cell_masses(c)?;
        p_min = masses.iter().copied().fold(p_min, f64::min);
    }
    let degenerate_gap = if k > 1 {
        let lower = enumerate_stationary(dist, k - 1)?
            .iter()
            .map(|c| dist.distortion(c))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        lower - r_star
    } else {
        f64::INFINITY
    };
    Ok(StationaryReport {
        stationary,
        distortions,
        optimal,
        epsilon,
        b,
        p_min,
        r_star,
        degenerate_gap,
        radius: dist.radius(),
        k,
    })
}

impl StationaryReport {
    /// `ε ≤ B²/4`, vacuous when `ε = +∞`.
    pub fn epsilon_bound_holds(&self) -> bool {
        !self.epsilon.is_finite() || self.epsilon <= self.b * self.b / 4.0 * (1.0 + 1e-12)
    }

    /// Separation factor with empty-cell codebooks counted as stationary:
    /// `min(epsilon, degenerate_gap)`.
    pub fn separation_with_degenerate(&self) -> f64 {
        self.epsilon.min(self.degenerate_gap)
    }

    /// `ε ≤ B²/4` for [`separation_with_degenerate`](Self::separation_with_degenerate).
    pub fn degenerate_bound_holds(&self) -> bool {
        let e = self.separation_with_degenerate();
        !e.is_finite() || e <= self.b * self.b / 4.0 * (1.0 + 1e-12)
    }
}
