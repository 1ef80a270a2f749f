//! Margin-condition and clusterability diagnostics.
//!
//! The boundary-mass function `p(t) = P(B(N(c), t))` is stored as the sorted
//! list of point-to-boundary distances with cumulative weights, so every
//! evaluation is exact. A law satisfies the margin condition with radius `r₀`
//! when `p(t) ≤ B p_min t / (128 M²)` for all `0 ≤ t ≤ r₀`.

use std::fmt::Write as _;

use crate::classification::{closest_relabeling, ClassifRiskEstimate};
use crate::data::{nearest, sq_dist, Codebook, Dataset};
use crate::error::{Error, Result};
use crate::oracle::{stationary_report, FiniteDistribution, StationaryReport, MAX_POINTS, OPTIMAL_TOL};
use crate::quantization::empirical_distortion;

/// Default number of grid points for the `r₀` scan.
pub const R0_GRID: usize = 512;
/// Absolute slack when comparing exact sums against closed-form bounds.
const CMP_TOL: f64 = 1e-12;

fn check_codebook(dim: usize, codebook: &Codebook) -> Result<()> {
    if codebook.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            found: dim,
        });
    }
    for i in 0..codebook.k() {
        for j in i + 1..codebook.k() {
            if codebook.codepoint(i) == codebook.codepoint(j) {
                return Err(Error::DuplicateCodepoints(i, j));
            }
        }
    }
    Ok(())
}

/// Signed depth of `x` beyond the bisector of `c_i, c_j`, measured towards `c_j`.
fn projection(x: &[f64], ci: &[f64], cj: &[f64]) -> f64 {
    let r = sq_dist(ci, cj).sqrt();
    x.iter()
        .zip(ci.iter().zip(cj))
        .map(|(x, (a, b))| (x - 0.5 * (a + b)) * (b - a))
        .sum::<f64>()
        / r
}

fn boundary_distance_unchecked(point: &[f64], codebook: &Codebook) -> f64 {
    let j = nearest(point, codebook).0;
    let cj = codebook.codepoint(j);
    (0..codebook.k())
        .filter(|&i| i != j)
        .map(|i| projection(point, codebook.codepoint(i), cj).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Distance from `point` to the frontier `N(c)` of the Voronoi tessellation.
///
/// For `x` in cell `j` this is the distance to the nearest bisector hyperplane
/// between `c_j` and another codepoint. `+∞` when `k = 1`.
pub fn boundary_distance(point: &[f64], codebook: &Codebook) -> Result<f64> {
    check_codebook(point.len(), codebook)?;
    Ok(boundary_distance_unchecked(point, codebook))
}

/// Step function `t ↦ P(B(N(c), t))` for a weighted point set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProfile {
    distances: Vec<f64>,
    cumulative: Vec<f64>,
}

impl BoundaryProfile {
    fn from_atoms<'a>(
        dim: usize,
        atoms: impl Iterator<Item = (&'a [f64], f64)>,
        codebook: &Codebook,
    ) -> Result<Self> {
        check_codebook(dim, codebook)?;
        let mut pairs: Vec<(f64, f64)> = atoms
            .filter(|(_, w)| *w > 0.0)
            .map(|(x, w)| (boundary_distance_unchecked(x, codebook), w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let (distances, cumulative) = pairs
            .into_iter()
            .map(|(d, w)| {
                acc += w;
                (d, acc)
            })
            .unzip();
        Ok(Self {
            distances,
            cumulative,
        })
    }

    pub fn empirical(dataset: &Dataset, codebook: &Codebook) -> Result<Self> {
        let w = 1.0 / dataset.len().max(1) as f64;
        Self::from_atoms(dataset.dim(), dataset.points().map(|x| (x, w)), codebook)
    }

    pub fn population(dist: &FiniteDistribution, codebook: &Codebook) -> Result<Self> {
        Self::from_atoms(dist.dim(), dist.atoms(), codebook)
    }

    /// Mass of points whose boundary distance is at most `t`.
    pub fn mass_at(&self, t: f64) -> f64 {
        let idx = self.distances.partition_point(|&d| d <= t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Sorted boundary distances (jump locations of the step function).
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Smallest boundary distance, `+∞` if there are no points.
    pub fn smallest(&self) -> f64 {
        self.distances.first().copied().unwrap_or(f64::INFINITY)
    }
}

/// Empirical `p̂(t)`: fraction of sample points within `t` of the frontier.
pub fn empirical_boundary_mass(dataset: &Dataset, codebook: &Codebook, t: f64) -> Result<f64> {
    Ok(BoundaryProfile::empirical(dataset, codebook)?.mass_at(t))
}

/// Where the boundary mass comes from.
#[derive(Debug, Clone, Copy)]
pub enum MassSource<'a> {
    Population(&'a FiniteDistribution),
    Empirical(&'a Dataset),
}

impl MassSource<'_> {
    pub fn radius(&self) -> f64 {
        match self {
            Self::Population(d) => d.radius(),
            Self::Empirical(d) => d.radius(),
        }
    }

    fn profile(&self, codebook: &Codebook) -> Result<BoundaryProfile> {
        match self {
            Self::Population(d) => BoundaryProfile::population(d, codebook),
            Self::Empirical(d) => BoundaryProfile::empirical(d, codebook),
        }
    }

    fn cell_masses(&self, codebook: &Codebook) -> Vec<f64> {
        let mut masses = vec![0.0; codebook.k()];
        match self {
            Self::Population(d) => {
                for (x, w) in d.atoms() {
                    masses[nearest(x, codebook).0] += w;
                }
            }
            Self::Empirical(d) => {
                let w = 1.0 / d.len().max(1) as f64;
                for x in d.points() {
                    masses[nearest(x, codebook).0] += w;
                }
            }
        }
        masses
    }
}

/// Outcome of a margin-condition check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginCheck {
    pub holds: bool,
    /// Smallest checked `t` with `p(t) > slope·t`; `0` when the frontier
    /// itself carries mass.
    pub first_violation: Option<f64>,
    pub b: f64,
    pub p_min: f64,
    /// `B p_min / (128 M²)`.
    pub slope: f64,
}

/// `sup_c p_c(t)` over a set of codebooks.
fn sup_mass(profiles: &[BoundaryProfile], t: f64) -> f64 {
    profiles.iter().map(|p| p.mass_at(t)).fold(0.0, f64::max)
}

/// First `t` in `(0, r0]` where the bound fails, checking the grid and every
/// jump of the step functions (the worst point of each flat piece).
fn first_violation(profiles: &[BoundaryProfile], slope: f64, r0: f64, grid_size: usize) -> Option<f64> {
    if sup_mass(profiles, 0.0) > 0.0 {
        return Some(0.0);
    }
    let mut candidates: Vec<f64> = (1..=grid_size)
        .map(|i| r0 * i as f64 / grid_size as f64)
        .collect();
    for p in profiles {
        candidates.extend(p.distances().iter().copied().filter(|&d| d > 0.0 && d <= r0));
    }
    candidates.sort_by(f64::total_cmp);
    candidates
        .into_iter()
        .find(|&t| sup_mass(profiles, t) > slope * t)
}

fn margin_constants(source: &MassSource, optimal: &[Codebook]) -> (f64, f64, f64) {
    let m = source.radius();
    let b = optimal.iter().map(Codebook::min_separation).fold(f64::INFINITY, f64::min);
    let p_min = optimal
        .iter()
        .flat_map(|c| source.cell_masses(c))
        .fold(f64::INFINITY, f64::min);
    (b, p_min, b * p_min / (128.0 * m * m))
}

/// Checks `sup_c p_c(t) ≤ B p_min t / (128 M²)` on `grid_size` uniform points
/// of `(0, r0]` and at every jump of the boundary-mass functions.
///
/// `B` and `p_min` are taken from the supplied codebooks under `source`.
pub fn margin_check(
    source: MassSource,
    optimal: &[Codebook],
    r0: f64,
    grid_size: usize,
) -> Result<MarginCheck> {
    if optimal.is_empty() {
        return Err(Error::invalid("no optimal codebooks supplied"));
    }
    if !(r0 > 0.0 && r0.is_finite()) || grid_size == 0 {
        return Err(Error::invalid("r0 must be positive and grid_size at least 1"));
    }
    let profiles = optimal
        .iter()
        .map(|c| source.profile(c))
        .collect::<Result<Vec<_>>>()?;
    let (b, p_min, slope) = margin_constants(&source, optimal);
    let first = first_violation(&profiles, slope, r0, grid_size);
    Ok(MarginCheck {
        holds: first.is_none(),
        first_violation: first,
        b,
        p_min,
        slope,
    })
}

/// Largest point of the uniform `grid_size` grid on `(0, 2M]` up to which the
/// margin condition holds exactly; `0` if it fails arbitrarily close to `0`.
fn r0_scan(profiles: &[BoundaryProfile], slope: f64, radius: f64, grid_size: usize) -> f64 {
    let top = 2.0 * radius;
    let grid = |i: usize| top * i as f64 / grid_size as f64;
    match first_violation(profiles, slope, top, grid_size) {
        None => top,
        Some(v) => (1..=grid_size)
            .map(grid)
            .take_while(|&t| t < v)
            .last()
            .unwrap_or(0.0),
    }
}

/// `4kM² (1/ε ∨ 64M² / (p_min B² r₀²))`; `+∞` when `r₀ = 0`.
pub fn kappa0(k: usize, radius: f64, epsilon: f64, p_min: f64, b: f64, r0: f64) -> f64 {
    if r0 <= 0.0 || p_min <= 0.0 {
        return f64::INFINITY;
    }
    let m2 = radius * radius;
    let inv_eps = if epsilon.is_finite() { 1.0 / epsilon } else { 0.0 };
    4.0 * k as f64 * m2 * inv_eps.max(64.0 * m2 / (p_min * b * b * r0 * r0))
}

/// Plug-in margin parameters and clusterability verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginDiagnostics {
    pub k: usize,
    /// Sample size, or support size for a finite law.
    pub n: usize,
    pub radius: f64,
    pub b_hat: f64,
    pub p_min_hat: f64,
    /// One step function per codebook; `p̂` is their pointwise maximum.
    pub profiles: Vec<BoundaryProfile>,
    pub r0_max: f64,
    pub kappa0: f64,
    pub clusterable_f: Vec<(f64, bool)>,
}

impl MarginDiagnostics {
    /// Diagnostics of a sample relative to a fitted codebook (usually the
    /// ERM). `ε` is treated as `+∞`.
    pub fn empirical(dataset: &Dataset, erm: &Codebook, f_values: &[f64]) -> Result<Self> {
        let source = MassSource::Empirical(dataset);
        let profiles = vec![source.profile(erm)?];
        let optimal = std::slice::from_ref(erm);
        let (b, p_min, slope) = margin_constants(&source, optimal);
        let r0_max = r0_scan(&profiles, slope, dataset.radius(), R0_GRID);
        let clusterable_f = f_values
            .iter()
            .map(|&f| Ok((f, f_clusterability_check(dataset, erm, f)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k: erm.k(),
            n: dataset.len(),
            radius: dataset.radius(),
            b_hat: b,
            p_min_hat: p_min,
            profiles,
            r0_max,
            kappa0: kappa0(erm.k(), dataset.radius(), f64::INFINITY, p_min, b, r0_max),
            clusterable_f,
        })
    }

    /// Exact diagnostics of a finite law from its oracle report.
    pub fn population(dist: &FiniteDistribution, report: &StationaryReport) -> Result<Self> {
        let source = MassSource::Population(dist);
        let profiles = report
            .optimal
            .iter()
            .map(|c| source.profile(c))
            .collect::<Result<Vec<_>>>()?;
        let slope = report.b * report.p_min / (128.0 * dist.radius() * dist.radius());
        let r0_max = r0_scan(&profiles, slope, dist.radius(), R0_GRID);
        Ok(Self {
            k: report.k,
            n: dist.len(),
            radius: dist.radius(),
            b_hat: report.b,
            p_min_hat: report.p_min,
            profiles,
            r0_max,
            kappa0: kappa0(report.k, dist.radius(), report.epsilon, report.p_min, report.b, r0_max),
            clusterable_f: Vec::new(),
        })
    }

    /// `p̂(t)`.
    pub fn boundary_mass(&self, t: f64) -> f64 {
        sup_mass(&self.profiles, t)
    }

    pub fn margin_slope(&self) -> f64 {
        self.b_hat * self.p_min_hat / (128.0 * self.radius * self.radius)
    }

    /// One `key = value` per line.
    pub fn to_report(&self) -> String {
        let smallest = self
            .profiles
            .iter()
            .map(BoundaryProfile::smallest)
            .fold(f64::INFINITY, f64::min);
        let mut out = String::new();
        let _ = writeln!(out, "k = {}", self.k);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "radius = {}", self.radius);
        let _ = writeln!(out, "b_hat = {}", self.b_hat);
        let _ = writeln!(out, "p_min_hat = {}", self.p_min_hat);
        let _ = writeln!(out, "margin_slope = {}", self.margin_slope());
        let _ = writeln!(out, "boundary_min = {smallest}");
        let _ = writeln!(out, "r0_max = {}", self.r0_max);
        let _ = writeln!(out, "kappa0 = {}", self.kappa0);
        for (f, ok) in &self.clusterable_f {
            let _ = writeln!(out, "clusterable_f.{f} = {ok}");
        }
        out
    }
}

/// `f`-clusterability of `dataset` around `erm`:
/// `‖c_i − c_j‖ ≥ f √R̂(c) (n_i^{-1/2} + n_j^{-1/2})` for all `i ≠ j`.
pub fn f_clusterability_check(dataset: &Dataset, erm: &Codebook, f: f64) -> Result<bool> {
    check_codebook(dataset.dim(), erm)?;
    let mut counts = vec![0usize; erm.k()];
    for x in dataset.points() {
        counts[nearest(x, erm).0] += 1;
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCell(j));
    }
    let scale = f * empirical_distortion(dataset, erm)?.sqrt();
    let k = erm.k();
    Ok((0..k).all(|i| {
        (i + 1..k).all(|j| {
            let lhs = sq_dist(erm.codepoint(i), erm.codepoint(j)).sqrt();
            let rhs = scale * (1.0 / (counts[i] as f64).sqrt() + 1.0 / (counts[j] as f64).sqrt());
            lhs >= rhs
        })
    }))
}

/// `(premise, conclusion)` with premise `p̂(16M²f / (√(n p̂_min) B̂)) ≤ p̂_min`
/// and conclusion [`f_clusterability_check`].
pub fn empirical_margin_implies_clusterable(
    dataset: &Dataset,
    erm: &Codebook,
    f: f64,
) -> Result<(bool, bool)> {
    let conclusion = f_clusterability_check(dataset, erm, f)?;
    let source = MassSource::Empirical(dataset);
    let profile = source.profile(erm)?;
    let (b, p_min, _) = margin_constants(&source, std::slice::from_ref(erm));
    let m = dataset.radius();
    let t = 16.0 * m * m * f / ((dataset.len() as f64 * p_min).sqrt() * b);
    Ok((profile.mass_at(t) <= p_min, conclusion))
}

fn in_closed_cell(x: &[f64], codebook: &Codebook, j: usize) -> bool {
    let dj = sq_dist(x, codebook.codepoint(j));
    codebook.codepoints().all(|c| dj <= sq_dist(x, c))
}

/// `P({0 ≤ ⟨x − (c_i+c_j)/2, (c_j−c_i)/r_ij⟩ ≤ t} ∩ V_j)` with `V_j` closed.
pub fn pij_mass(dist: &FiniteDistribution, codebook: &Codebook, i: usize, j: usize, t: f64) -> Result<f64> {
    check_pair(dist, codebook, i, j)?;
    let (ci, cj) = (codebook.codepoint(i), codebook.codepoint(j));
    Ok(dist
        .atoms()
        .filter(|(x, _)| in_closed_cell(x, codebook, j))
        .filter(|(x, _)| (0.0..=t).contains(&projection(x, ci, cj)))
        .map(|(_, w)| w)
        .sum())
}

fn check_pair(dist: &FiniteDistribution, codebook: &Codebook, i: usize, j: usize) -> Result<()> {
    check_codebook(dist.dim(), codebook)?;
    if i == j || i >= codebook.k() || j >= codebook.k() {
        return Err(Error::invalid(format!("invalid cell pair ({i}, {j})")));
    }
    Ok(())
}

/// `∫₀^T p_ij(c, s) ds`, exact: each atom at depth `u ∈ [0, T]` contributes
/// `w (T − u)`.
pub fn pij_integral(dist: &FiniteDistribution, codebook: &Codebook, i: usize, j: usize, upper: f64) -> Result<f64> {
    check_pair(dist, codebook, i, j)?;
    let (ci, cj) = (codebook.codepoint(i), codebook.codepoint(j));
    Ok(dist
        .atoms()
        .filter(|(x, _)| in_closed_cell(x, codebook, j))
        .map(|(x, w)| {
            let u = projection(x, ci, cj);
            if u >= 0.0 && u <= upper {
                w * (upper - u)
            } else {
                0.0
            }
        })
        .sum())
}

/// Result of the optimality necessary-condition check.
#[derive(Debug, Clone, PartialEq)]
pub struct NecessaryConditionReport {
    pub holds: bool,
    /// `min (bound − integral)` over pairs, grid points and both bounds.
    pub worst_slack: f64,
    /// Oracle verdict on the codebook; `None` when the support is too large
    /// to enumerate.
    pub verified_optimal: Option<bool>,
}

impl NecessaryConditionReport {
    /// True when the codebook is not known to be optimal, so a failure is
    /// not a contradiction.
    pub fn flagged(&self) -> bool {
        self.verified_optimal != Some(true)
    }
}

fn oracle_optimal(dist: &FiniteDistribution, codebook: &Codebook) -> Result<Option<bool>> {
    if dist.len() > MAX_POINTS {
        return Ok(None);
    }
    let report = stationary_report(dist, codebook.k())?;
    let r = dist.distortion(codebook)?;
    Ok(Some(r <= report.r_star + OPTIMAL_TOL * report.r_star.max(1.0)))
}

/// For every ordered pair `i ≠ j` and `t` in `t_grid ⊂ (0, 1/2)`, with
/// `r = ‖c_i − c_j‖` and `p_ℓ` the cell masses:
///
/// ```text
/// ∫₀^{t r} p_ij(c, s) ds ≤ 2t² r [p_i/(1−2t) ∧ p_j/(1+2t)]
/// ∫₀^{t r} p_ij(c, s) ds ≤ t² r (p_i + p_j)/2
/// ```
pub fn necessary_condition_check(
    dist: &FiniteDistribution,
    codebook: &Codebook,
    t_grid: &[f64],
) -> Result<NecessaryConditionReport> {
    if let Some(&t) = t_grid.iter().find(|&&t| !(t > 0.0 && t < 0.5)) {
        return Err(Error::invalid(format!("t = {t} is outside (0, 1/2)")));
    }
    check_codebook(dist.dim(), codebook)?;
    let masses = dist.cell_masses(codebook)?;
    let k = codebook.k();
    let mut worst = f64::INFINITY;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let r = sq_dist(codebook.codepoint(i), codebook.codepoint(j)).sqrt();
            for &t in t_grid {
                let lhs = pij_integral(dist, codebook, i, j, t * r)?;
                let first = 2.0 * t * t * r * (masses[i] / (1.0 - 2.0 * t)).min(masses[j] / (1.0 + 2.0 * t));
                let second = t * t * r * (masses[i] + masses[j]) / 2.0;
                worst = worst.min(first - lhs).min(second - lhs);
            }
        }
    }
    Ok(NecessaryConditionReport {
        holds: worst >= -CMP_TOL,
        worst_slack: worst,
        verified_optimal: oracle_optimal(dist, codebook)?,
    })
}

/// `P(B(N(c), r)) ≤ 8k r / B` on every `r` of `r_grid`.
pub fn cor1_check(dist: &FiniteDistribution, codebook: &Codebook, b: f64, r_grid: &[f64]) -> Result<bool> {
    let profile = BoundaryProfile::population(dist, codebook)?;
    let k = codebook.k() as f64;
    Ok(r_grid
        .iter()
        .all(|&r| profile.mass_at(r) <= 8.0 * k * r / b + CMP_TOL))
}

/// Terms of `(1/16M²) Var(γ(c,·) − γ(c*(c),·)) ≤ ‖c − c*(c)‖² ≤ κ₀ (R(c) − R*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceBound {
    /// `Var(γ(c,X) − γ(c*(c),X)) / 16M²`.
    pub lhs: f64,
    /// `‖c − c*(c)‖²` after optimal relabeling.
    pub middle: f64,
    /// `κ₀ (R(c) − R*)`.
    pub rhs: f64,
    pub kappa0: f64,
    /// Closest optimal codebook, relabeled to match `c`.
    pub closest: Codebook,
    pub left_holds: bool,
    /// Only evaluated when the law satisfies the margin condition with some
    /// positive radius.
    pub right_holds: Option<bool>,
}

/// Evaluates both sides exactly, with `c*(c)` the closest optimal codebook.
pub fn variance_bound_check(
    dist: &FiniteDistribution,
    codebook: &Codebook,
    report: &StationaryReport,
) -> Result<VarianceBound> {
    check_codebook(dist.dim(), codebook)?;
    let (closest, middle) = closest_optimal(codebook, report)?;
    let m = dist.radius();
    let (mut mean, mut second) = (0.0, 0.0);
    for (x, w) in dist.atoms() {
        let diff = nearest(x, codebook).1 - nearest(x, &closest).1;
        mean += w * diff;
        second += w * diff * diff;
    }
    let var = (second - mean * mean).max(0.0);
    let lhs = var / (16.0 * m * m);
    let diag = MarginDiagnostics::population(dist, report)?;
    let excess = (dist.distortion(codebook)? - report.r_star).max(0.0);
    let rhs = diag.kappa0 * excess;
    let scale = middle.max(1.0);
    Ok(VarianceBound {
        lhs,
        middle,
        rhs,
        kappa0: diag.kappa0,
        closest,
        left_holds: lhs <= middle + CMP_TOL * scale,
        right_holds: (diag.r0_max > 0.0).then_some(middle <= rhs + CMP_TOL * scale),
    })
}

/// Closest optimal codebook of `report` to `codebook`, relabeled to match it,
/// with the squared distance.
pub fn closest_optimal(codebook: &Codebook, report: &StationaryReport) -> Result<(Codebook, f64)> {
    report
        .optimal
        .iter()
        .map(|o| {
            let (perm, d) = closest_relabeling(codebook, o);
            (o.permuted(&perm), d)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::Unavailable("an optimal codebook"))
}

/// Distortion-to-classification link on a finite law satisfying the margin
/// condition with radius `r₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkCheck {
    pub excess: f64,
    /// `p_min B² r₀² / 64M² ∧ ε`.
    pub delta: f64,
    /// Classification risk between `C(c)` and `C(c*(c))`.
    pub risk: f64,
    /// `(√p_min / 16M) √excess`.
    pub bound: f64,
    /// `excess ≤ delta`.
    pub applicable: bool,
    pub holds: bool,
}

/// Evaluates `R_classif(C(c), C(c*(c))) ≤ (√p_min / 16M) √(R(c) − R*)`
/// exactly.
pub fn link_check(
    dist: &FiniteDistribution,
    codebook: &Codebook,
    report: &StationaryReport,
    r0: f64,
) -> Result<LinkCheck> {
    check_codebook(dist.dim(), codebook)?;
    let (closest, _) = closest_optimal(codebook, report)?;
    let k = codebook.k();
    let mut conf = vec![vec![0.0; k]; k];
    for (x, w) in dist.atoms() {
        conf[nearest(x, codebook).0][nearest(x, &closest).0] += w;
    }
    let risk = ClassifRiskEstimate::exact(&conf).value;
    let m = dist.radius();
    let excess = (dist.distortion(codebook)? - report.r_star).max(0.0);
    let delta = (report.p_min * report.b * report.b * r0 * r0 / (64.0 * m * m)).min(report.epsilon);
    let bound = report.p_min.sqrt() / (16.0 * m) * excess.sqrt();
    Ok(LinkCheck {
        excess,
        delta,
        risk,
        bound,
        applicable: excess <= delta,
        holds: risk <= bound + CMP_TOL,
    })
}
