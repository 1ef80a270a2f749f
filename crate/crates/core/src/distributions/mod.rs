//! Synthetic laws with known ground truth.
//!
//! Three families are provided: finitely supported laws (ground truth by
//! enumeration), truncated Gaussian mixtures (rejection sampled) and the
//! tilted-segment family `P_σ` whose optimal codebook and distortion gaps are
//! known in closed form.

mod gmm;
mod minimax;
pub(crate) mod spec;

pub use gmm::{c1_constant, sample_truncated_gmm, TruncatedGmm, TruncatedGmmParams};
pub use minimax::{
    minimax_centers, minimax_exact_distortion, minimax_true_gap, sample_minimax, Minimax,
    MinimaxParams, SignVector,
};
pub use spec::{parse_model_spec, read_model_spec, DeltaRule, ModelSpec, SigmaRule};

use rand::Rng as _;

use crate::data::{Codebook, Dataset};
use crate::error::{Error, Result};
use crate::oracle::{stationary_report, FiniteDistribution, StationaryReport, MAX_POINTS};
use crate::rng::{rng_from, Rng};

/// A law on `ℝ^d` that can be sampled and, sometimes, integrated exactly.
pub trait DistributionModel: Sync {
    fn dim(&self) -> usize;

    /// Radius `M` of a ball centred at the origin containing the support.
    fn radius(&self) -> f64;

    /// Writes one draw into `out` (length `dim`).
    fn draw(&self, rng: &mut Rng, out: &mut [f64]) -> Result<()>;

    /// Exact population distortion of `codebook`, when available.
    fn exact_distortion(&self, _codebook: &Codebook) -> Option<f64> {
        None
    }
}

impl DistributionModel for FiniteDistribution {
    fn dim(&self) -> usize {
        FiniteDistribution::dim(self)
    }

    fn radius(&self) -> f64 {
        FiniteDistribution::radius(self)
    }

    fn draw(&self, rng: &mut Rng, out: &mut [f64]) -> Result<()> {
        let i = inverse_cdf_index(self.weights(), rng.gen::<f64>());
        out.copy_from_slice(self.point(i));
        Ok(())
    }

    fn exact_distortion(&self, codebook: &Codebook) -> Option<f64> {
        self.distortion(codebook).ok()
    }
}

/// First index whose cumulative weight exceeds `u ∈ [0, 1)`.
fn inverse_cdf_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if acc > target && w > 0.0 {
            return i;
        }
    }
    last_positive
}

/// Ground truth attached to a model (and to samples drawn from it).
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub optimal_codebook: Codebook,
    pub optimal_distortion: f64,
    pub b: f64,
    pub p_min: f64,
}

/// A sample with the component of origin of each point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWithTruth {
    pub dataset: Dataset,
    pub latent_labels: Vec<usize>,
    pub truth: Option<Truth>,
    /// Fraction of rejected proposals (truncated mixtures only).
    pub rejection_rate: Option<f64>,
}

/// I.i.d. draws from a finite law by inverse CDF on the weights. The latent
/// label is the support index. Ground truth for `k` cells is filled in when
/// the support is small enough to enumerate.
pub fn sample_finite(
    dist: &FiniteDistribution,
    k: usize,
    n: usize,
    seed: u64,
) -> Result<SampleWithTruth> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let truth = finite_truth(dist, k).ok().map(|r| truth_from_report(&r));
    sample_finite_with(dist, truth, n, seed)
}

fn sample_finite_with(
    dist: &FiniteDistribution,
    truth: Option<Truth>,
    n: usize,
    seed: u64,
) -> Result<SampleWithTruth> {
    let mut rng = rng_from(seed);
    let dim = dist.dim();
    let mut points = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let i = inverse_cdf_index(dist.weights(), rng.gen::<f64>());
        points.extend_from_slice(dist.point(i));
        labels.push(i);
    }
    let dataset = Dataset::new(dim, points, Some(labels.clone()), Some(dist.radius()))?;
    Ok(SampleWithTruth {
        dataset,
        latent_labels: labels,
        truth,
        rejection_rate: None,
    })
}

fn finite_truth(dist: &FiniteDistribution, k: usize) -> Result<StationaryReport> {
    let atoms = dist.weights().iter().filter(|w| **w > 0.0).count();
    if atoms > MAX_POINTS {
        return Err(Error::TooLarge(format!("{atoms} atoms")));
    }
    stationary_report(dist, k)
}

fn truth_from_report(r: &StationaryReport) -> Truth {
    Truth {
        optimal_codebook: r.optimal[0].clone(),
        optimal_distortion: r.r_star,
        b: r.b,
        p_min: r.p_min,
    }
}

/// A concrete law from one of the three families, with cached ground truth.
#[derive(Debug, Clone)]
pub enum Model {
    Finite {
        dist: FiniteDistribution,
        report: Option<StationaryReport>,
    },
    TruncatedGmm(TruncatedGmm),
    Minimax(Minimax),
}

impl Model {
    /// Finite law; the stationary report for `k` cells is computed once.
    pub fn finite(dist: FiniteDistribution, k: usize) -> Self {
        let report = finite_truth(&dist, k).ok();
        Model::Finite { dist, report }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Model::Finite { .. } => "finite",
            Model::TruncatedGmm(_) => "tgmm",
            Model::Minimax(_) => "minimax",
        }
    }

    pub fn truth(&self) -> Option<Truth> {
        match self {
            Model::Finite { report, .. } => report.as_ref().map(truth_from_report),
            Model::TruncatedGmm(_) => None,
            Model::Minimax(m) => Some(m.truth()),
        }
    }

    /// Every optimal codebook, when known.
    pub fn optimal_codebooks(&self) -> Option<Vec<Codebook>> {
        match self {
            Model::Finite { report, .. } => report.as_ref().map(|r| r.optimal.clone()),
            Model::TruncatedGmm(_) => None,
            Model::Minimax(m) => Some(vec![m.optimal_codebook()]),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleWithTruth> {
        match self {
            Model::Finite { dist, report } => {
                sample_finite_with(dist, report.as_ref().map(truth_from_report), n, seed)
            }
            Model::TruncatedGmm(g) => sample_truncated_gmm(g.params(), n, seed),
            Model::Minimax(m) => sample_minimax(m.params(), n, seed),
        }
    }
}

impl DistributionModel for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Finite { dist, .. } => dist.dim(),
            Model::TruncatedGmm(g) => g.dim(),
            Model::Minimax(m) => m.dim(),
        }
    }

    fn radius(&self) -> f64 {
        match self {
            Model::Finite { dist, .. } => dist.radius(),
            Model::TruncatedGmm(g) => g.radius(),
            Model::Minimax(m) => m.radius(),
        }
    }

    fn draw(&self, rng: &mut Rng, out: &mut [f64]) -> Result<()> {
        match self {
            Model::Finite { dist, .. } => DistributionModel::draw(dist, rng, out),
            Model::TruncatedGmm(g) => g.draw(rng, out),
            Model::Minimax(m) => m.draw(rng, out),
        }
    }

    fn exact_distortion(&self, codebook: &Codebook) -> Option<f64> {
        match self {
            Model::Finite { dist, .. } => DistributionModel::exact_distortion(dist, codebook),
            Model::TruncatedGmm(g) => g.exact_distortion(codebook),
            Model::Minimax(m) => m.exact_distortion(codebook),
        }
    }
}
