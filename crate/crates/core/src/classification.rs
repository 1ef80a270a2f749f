//! Permutation-matched disagreement between partitions.

use itertools::Itertools;

use crate::data::{nearest, sq_dist, Assignment, Codebook};
use crate::distributions::{DistributionModel, Minimax, Model, TruncatedGmm};
use crate::error::{Error, Result};
use crate::normal::upper_orthant;
use crate::rng::chunked_map;

/// Largest `k` handled by exhaustive permutation search.
pub const EXHAUSTIVE_MAX_K: usize = 8;

/// Misclassification fraction and the permutation attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifRisk {
    pub value: f64,
    /// `matching[j]` is the label of the first partition matched to label `j`
    /// of the second.
    pub matching: Vec<usize>,
}

/// Permutation `σ` maximizing `Σ_j w[σ(j)][j]`, and that maximum.
///
/// Exhaustive (lexicographic order, first maximum kept) for `k ≤ 8`; the
/// Hungarian method beyond.
pub fn best_matching(weights: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let k = weights.len();
    if k == 0 {
        return (Vec::new(), 0.0);
    }
    if k <= EXHAUSTIVE_MAX_K {
        let mut best: Option<(Vec<usize>, f64)> = None;
        for perm in (0..k).permutations(k) {
            let v: f64 = perm.iter().enumerate().map(|(j, &i)| weights[i][j]).sum();
            if best.as_ref().is_none_or(|b| v > b.1) {
                best = Some((perm, v));
            }
        }
        return best.expect("k ≥ 1");
    }
    let max = weights.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    // cost[j][i]: assigning row j (second partition) to column i (first).
    let cost: Vec<Vec<f64>> = (0..k).map(|j| (0..k).map(|i| max - weights[i][j]).collect()).collect();
    let perm = hungarian(&cost);
    let v = perm.iter().enumerate().map(|(j, &i)| weights[i][j]).sum();
    (perm, v)
}

/// Minimum-cost perfect matching of a square matrix; `result[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based potentials, column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0; n];
    for j in 1..=n {
        result[p[j] - 1] = j - 1;
    }
    result
}

/// `conf[i][j]` = number of points with label `i` in `a` and `j` in `b`.
pub fn confusion_matrix(a: &Assignment, b: &Assignment, k: usize) -> Result<Vec<Vec<f64>>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("assignments of lengths {} and {}", a.len(), b.len())));
    }
    let mut conf = vec![vec![0.0; k]; k];
    for (idx, (&i, &j)) in a.cells().iter().zip(b.cells()).enumerate() {
        let bad = if i >= k { Some(i) } else if j >= k { Some(j) } else { None };
        if let Some(label) = bad {
            return Err(Error::LabelOutOfRange { index: idx, label, k });
        }
        conf[i][j] += 1.0;
    }
    Ok(conf)
}

/// `inf_σ (1/n) Σ_j |Ĉ_{σ(j)} ∩ (C_j)^c|` for two labelings of the same points.
pub fn classif_risk_empirical(a: &Assignment, b: &Assignment, k: usize) -> Result<ClassifRisk> {
    if a.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let conf = confusion_matrix(a, b, k)?;
    let (matching, matched) = best_matching(&conf);
    let n = a.len() as f64;
    Ok(ClassifRisk {
        value: (n - matched) / n,
        matching,
    })
}

/// `min_σ Σ_j ‖c_j − o_{σ(j)}‖²`, the squared distance up to relabeling.
pub fn relabeled_sq_distance(c: &Codebook, o: &Codebook) -> f64 {
    closest_relabeling(c, o).1
}

/// Relabeling `σ` of `o` closest to `c`, with `Σ_j ‖c_j − o_{σ(j)}‖²`.
pub fn closest_relabeling(c: &Codebook, o: &Codebook) -> (Vec<usize>, f64) {
    assert_eq!(c.k(), o.k(), "codebooks of different sizes");
    let k = c.k();
    // weights[i][j] = −‖o_i − c_j‖² so that maximizing matches minimizing.
    let w: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| -sq_dist(o.codepoint(i), c.codepoint(j))).collect())
        .collect();
    let (perm, v) = best_matching(&w);
    let exact: f64 = perm.iter().enumerate().map(|(j, &i)| sq_dist(c.codepoint(j), o.codepoint(i))).sum();
    debug_assert!((exact + v).abs() <= 1e-9 * exact.max(1.0));
    (perm, exact)
}

/// Reference partition for population classification risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// Voronoi partition of the mixture means.
    BayesMeans,
    /// Voronoi partition of the (oracle) optimal codebook.
    OptimalCodebook,
}

impl std::str::FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bayes_means" | "bayes-means" => Ok(Self::BayesMeans),
            "optimal_codebook" | "optimal-codebook" => Ok(Self::OptimalCodebook),
            _ => Err(Error::invalid(format!("unknown reference '{s}'"))),
        }
    }
}

/// Population classification risk with its Monte-Carlo standard error (0 when
/// computed exactly).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifRiskEstimate {
    pub value: f64,
    pub std_error: f64,
    pub matching: Vec<usize>,
    /// 0 for exact computation.
    pub n_samples: usize,
}

impl ClassifRiskEstimate {
    pub(crate) fn exact(conf: &[Vec<f64>]) -> Self {
        let total: f64 = conf.iter().flatten().sum();
        let (matching, _) = best_matching(conf);
        // Sum the unmatched entries directly: the risk can be far below the
        // rounding error of `total − matched`.
        let unmatched: f64 = (0..conf.len())
            .flat_map(|i| (0..conf.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| matching[j] != i)
            .map(|(i, j)| conf[i][j])
            .sum();
        Self {
            value: unmatched / total,
            std_error: 0.0,
            matching,
            n_samples: 0,
        }
    }
}

/// Reference codebook of `model`, if the model exposes it.
pub fn reference_codebook(model: &Model, reference: Reference) -> Result<Codebook> {
    match (model, reference) {
        (Model::Finite { report, .. }, Reference::OptimalCodebook) => report
            .as_ref()
            .map(|r| r.optimal[0].clone())
            .ok_or(Error::Unavailable("an oracle-verified optimal codebook")),
        (Model::Finite { .. }, Reference::BayesMeans) => Err(Error::Unavailable("mixture means")),
        (Model::TruncatedGmm(g), Reference::BayesMeans) => Codebook::from_rows(&g.params().means),
        (Model::TruncatedGmm(_), Reference::OptimalCodebook) => {
            Err(Error::Unavailable("an oracle-verified optimal codebook"))
        }
        // The component means of P_σ are the optimal codepoints.
        (Model::Minimax(m), _) => Ok(m.optimal_codebook()),
    }
}

/// Probability that a draw from `model` is placed in different cells by
/// `codebook` and by the reference partition, minimized over relabelings.
///
/// Exact for finite supports and the minimax family, analytic for two-cell
/// truncated mixtures whose truncated tails are negligible, Monte-Carlo
/// otherwise.
pub fn classif_risk_population(
    model: &Model,
    codebook: &Codebook,
    reference: Reference,
    n_mc: usize,
    seed: u64,
) -> Result<ClassifRiskEstimate> {
    let refcb = reference_codebook(model, reference)?;
    if codebook.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: codebook.dim(),
        });
    }
    if codebook.k() != refcb.k() {
        return Err(Error::invalid(format!(
            "codebook has k = {} but the reference has k = {}",
            codebook.k(),
            refcb.k()
        )));
    }
    match model {
        Model::Finite { dist, .. } => {
            let k = codebook.k();
            let mut conf = vec![vec![0.0; k]; k];
            for (x, w) in dist.atoms() {
                conf[nearest(x, codebook).0][nearest(x, &refcb).0] += w;
            }
            Ok(ClassifRiskEstimate::exact(&conf))
        }
        Model::Minimax(m) => Ok(ClassifRiskEstimate::exact(&minimax_confusion(m, codebook, &refcb))),
        Model::TruncatedGmm(g) => {
            if let Some(est) = gmm_two_cell_risk(g, codebook, &refcb) {
                return Ok(est);
            }
            monte_carlo_risk(model, codebook, &refcb, n_mc, seed)
        }
    }
}

/// Monte-Carlo estimate from the pooled confusion matrix.
pub fn monte_carlo_risk<M: DistributionModel + ?Sized>(
    model: &M,
    codebook: &Codebook,
    refcb: &Codebook,
    n_mc: usize,
    seed: u64,
) -> Result<ClassifRiskEstimate> {
    if n_mc < 2 {
        return Err(Error::invalid("Monte-Carlo estimation needs n_mc ≥ 2"));
    }
    let k = codebook.k();
    let dim = model.dim();
    let partials = chunked_map(n_mc, seed, |rng, count| {
        let mut local = vec![vec![0u64; k]; k];
        let mut x = vec![0.0; dim];
        for _ in 0..count {
            model.draw(rng, &mut x)?;
            local[nearest(&x, codebook).0][nearest(&x, refcb).0] += 1;
        }
        Ok::<_, Error>(local)
    })?;
    let mut total = vec![vec![0u64; k]; k];
    for local in partials {
        for (row, lrow) in total.iter_mut().zip(local) {
            for (t, l) in row.iter_mut().zip(lrow) {
                *t += l;
            }
        }
    }
    let conf_f: Vec<Vec<f64>> = total.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let (matching, matched) = best_matching(&conf_f);
    let n = n_mc as f64;
    let value = (n - matched) / n;
    Ok(ClassifRiskEstimate {
        value,
        std_error: (value * (1.0 - value) / n).sqrt(),
        matching,
        n_samples: n_mc,
    })
}

/// Exact confusion masses for `P_σ`: along each segment the two partitions
/// can only change at pairwise bisector crossings, so the segment is cut at
/// those and each piece is assigned at its midpoint.
fn minimax_confusion(m: &Minimax, a: &Codebook, b: &Codebook) -> Vec<Vec<f64>> {
    let k = a.k();
    let rho = m.rho();
    let kf = m.k() as f64;
    let mut conf = vec![vec![0.0; k]; k];
    for (i, z) in m.centers().iter().enumerate() {
        let mut cuts = vec![-rho, 0.0, rho];
        for cb in [a, b] {
            // ‖z + s e₁ − c_j‖² = q_j + 2 s l_j + s².
            let q: Vec<f64> = cb.codepoints().map(|c| sq_dist(z, c)).collect();
            let l: Vec<f64> = cb.codepoints().map(|c| z[0] - c[0]).collect();
            for j in 0..k {
                for h in j + 1..k {
                    let dl = l[j] - l[h];
                    if dl != 0.0 {
                        let s = (q[h] - q[j]) / (2.0 * dl);
                        if s > -rho && s < rho {
                            cuts.push(s);
                        }
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut x = z.clone();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let mass = (hi - lo) * m.offset_density(i, mid) / kf;
            x[0] = z[0] + mid;
            conf[nearest(&x, a).0][nearest(&x, b).0] += mass;
        }
    }
    conf
}

/// Relative size of the truncated tail tolerated by the analytic path.
const TAIL_RELATIVE: f64 = 1e-9;

/// Analytic two-cell risk for a mixture, treating each component as an
/// untruncated Gaussian. Returns `None` when not applicable or when the
/// truncated tail mass is not negligible against the result.
fn gmm_two_cell_risk(g: &TruncatedGmm, a: &Codebook, b: &Codebook) -> Option<ClassifRiskEstimate> {
    if a.k() != 2 {
        return None;
    }
    let p = g.params();
    let d = p.dim();
    let half_plane = |c: &Codebook| {
        let n: Vec<f64> = (0..d).map(|r| c.codepoint(1)[r] - c.codepoint(0)[r]).collect();
        let mid: Vec<f64> = (0..d).map(|r| 0.5 * (c.codepoint(1)[r] + c.codepoint(0)[r])).collect();
        let off: f64 = n.iter().zip(&mid).map(|(x, y)| x * y).sum();
        (n, off)
    };
    let (na, alpha) = half_plane(a);
    let (nb, beta) = half_plane(b);
    let mut conf = vec![vec![0.0; 2]; 2];
    let mut tail = 0.0;
    for (comp, &theta) in p.weights.iter().enumerate() {
        if theta == 0.0 {
            continue;
        }
        let mu = &p.means[comp];
        let sigma = &p.covariances[comp];
        let quad = |x: &[f64], y: &[f64]| -> f64 {
            let mut s = 0.0;
            for r in 0..d {
                for c in 0..d {
                    s += x[r] * sigma[(r, c)] * y[c];
                }
            }
            s
        };
        let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(u, v)| u * v).sum() };
        let sa2 = quad(&na, &na);
        let sb2 = quad(&nb, &nb);
        if sb2 <= 0.0 {
            return None;
        }
        let sb = sb2.sqrt();
        let hb = (beta - dot(&nb, mu)) / sb;
        // Cell 1 of a partition is the open half-plane {n·x > off}.
        let cells = if sa2 <= 0.0 {
            // Coincident codepoints: everything goes to cell 0 of `a`.
            let in1 = crate::normal::upper_tail(hb);
            [[1.0 - in1, in1], [0.0, 0.0]]
        } else {
            let sa = sa2.sqrt();
            let ha = (alpha - dot(&na, mu)) / sa;
            let r = quad(&na, &nb) / (sa * sb);
            [
                [upper_orthant(-ha, -hb, r), upper_orthant(-ha, hb, -r)],
                [upper_orthant(ha, -hb, -r), upper_orthant(ha, hb, r)],
            ]
        };
        for i in 0..2 {
            for j in 0..2 {
                conf[i][j] += theta * cells[i][j];
            }
        }
        tail += theta * chi2_tail_bound(d, g.eigen_max()[comp], p.radius - crate::data::norm(mu));
    }
    let est = ClassifRiskEstimate::exact(&conf);
    if est.value == 0.0 || tail <= TAIL_RELATIVE * est.value {
        Some(est)
    } else {
        None
    }
}

/// Chernoff bound on `P(‖X − μ‖ > t)` for `X ~ N(μ, Σ)` with largest
/// eigenvalue `lambda`: `P(χ²_d > x) ≤ (x/d · e^{1 − x/d})^{d/2}` for `x > d`.
fn chi2_tail_bound(d: usize, lambda: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let x = t * t / lambda;
    let df = d as f64;
    if x <= df {
        return 1.0;
    }
    let ratio = x / df;
    (0.5 * df * (ratio.ln() + 1.0 - ratio)).exp()
}
