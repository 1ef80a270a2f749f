use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{inverse_cdf_index, DistributionModel, SampleWithTruth};
use crate::data::{norm, sq_dist, Dataset};
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};

/// Consecutive rejections after which a draw gives up.
pub const MAX_CONSECUTIVE_REJECTIONS: u64 = 1_000_000;
/// Smallest acceptable estimated acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-3;
const ACCEPTANCE_WARMUP: u64 = 1000;

/// Mixture of Gaussians, each component restricted to `B(0, M)` and
/// renormalised.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGmmParams {
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub weights: Vec<f64>,
    pub radius: f64,
}

impl TruncatedGmmParams {
    /// Components with covariance `σ² I`.
    pub fn spherical(means: Vec<Vec<f64>>, sigma: f64, weights: Vec<f64>, radius: f64) -> Result<Self> {
        let d = means.first().map_or(0, Vec::len);
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        let cov = DMatrix::identity(d, d) * (sigma * sigma);
        let covariances = vec![cov; means.len()];
        let p = Self {
            means,
            covariances,
            weights,
            radius,
        };
        p.validate()?;
        Ok(p)
    }

    /// Equal weights, covariance `σ² I`.
    pub fn symmetric(means: Vec<Vec<f64>>, sigma: f64, radius: f64) -> Result<Self> {
        let k = means.len();
        Self::spherical(means, sigma, vec![1.0 / k.max(1) as f64; k], radius)
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.means.len();
        if k == 0 {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        for m in &self.means {
            if m.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.len(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite mixture mean"));
            }
        }
        if self.covariances.len() != k || self.weights.len() != k {
            return Err(Error::invalid(format!(
                "{k} means but {} covariances and {} weights",
                self.covariances.len(),
                self.weights.len()
            )));
        }
        for s in &self.covariances {
            if s.nrows() != d || s.ncols() != d {
                return Err(Error::invalid(format!("covariance must be {d}x{d}")));
            }
            if (s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0) {
                return Err(Error::invalid("covariance is not symmetric"));
            }
            if s.clone().cholesky().is_none() {
                return Err(Error::invalid("covariance is not positive definite"));
            }
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("mixture weights must be a probability vector"));
        }
        let max_mean = self.means.iter().map(|m| norm(m)).fold(0.0, f64::max);
        if !(self.radius.is_finite() && self.radius >= 2.0 * max_mean && self.radius > 0.0) {
            return Err(Error::invalid(format!(
                "truncation radius {} must be at least twice the largest mean norm {max_mean}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Validated mixture with cached Cholesky factors.
#[derive(Debug, Clone)]
pub struct TruncatedGmm {
    params: TruncatedGmmParams,
    chol: Vec<DMatrix<f64>>,
    eig_max: Vec<f64>,
    eig_min: Vec<f64>,
}

impl TruncatedGmm {
    pub fn new(params: TruncatedGmmParams) -> Result<Self> {
        params.validate()?;
        let chol = params
            .covariances
            .iter()
            .map(|s| s.clone().cholesky().expect("validated").l())
            .collect();
        let eigs: Vec<DVector<f64>> = params
            .covariances
            .iter()
            .map(|s| s.clone().symmetric_eigen().eigenvalues)
            .collect();
        Ok(Self {
            eig_max: eigs.iter().map(|e| e.max()).collect(),
            eig_min: eigs.iter().map(|e| e.min()).collect(),
            params,
            chol,
        })
    }

    pub fn params(&self) -> &TruncatedGmmParams {
        &self.params
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    /// Largest eigenvalue of each covariance.
    pub fn eigen_max(&self) -> &[f64] {
        &self.eig_max
    }

    /// `σ`: square root of the largest covariance eigenvalue over components.
    pub fn sigma(&self) -> f64 {
        self.eig_max.iter().copied().fold(0.0, f64::max).sqrt()
    }

    /// `σ₋`: square root of the smallest covariance eigenvalue over components.
    pub fn sigma_minus(&self) -> f64 {
        self.eig_min.iter().copied().fold(f64::INFINITY, f64::min).sqrt()
    }

    /// `B̃`: smallest distance between two means (+∞ for one component).
    pub fn b_tilde(&self) -> f64 {
        let m = &self.params.means;
        let mut best = f64::INFINITY;
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                best = best.min(sq_dist(&m[i], &m[j]).sqrt());
            }
        }
        best
    }

    pub fn theta_min(&self) -> f64 {
        self.params.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether `σ/B̃ ≤ 1/(16 c₁ √d)`, the regime in which every optimal
    /// codepoint lies within `c₁ σ √d` of its mean.
    pub fn means_localize_optimum(&self, eta: f64) -> bool {
        let d = self.params.dim() as f64;
        let c1 = c1_constant(self.k(), self.params.dim(), eta, self.theta_min());
        self.sigma() / self.b_tilde() <= 1.0 / (16.0 * c1 * d.sqrt())
    }

    /// One untruncated draw from component `j`.
    fn gaussian(&self, j: usize, rng: &mut Rng, out: &mut [f64]) {
        let d = out.len();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let l = &self.chol[j];
        let m = &self.params.means[j];
        for (r, o) in out.iter_mut().enumerate() {
            let mut v = m[r];
            for (c, zc) in z.iter().enumerate().take(r + 1) {
                v += l[(r, c)] * zc;
            }
            *o = v;
        }
    }

    /// Rejection-samples component `j`; returns the number of rejections.
    fn draw_component(&self, j: usize, rng: &mut Rng, out: &mut [f64]) -> Result<u64> {
        let r2 = self.params.radius * self.params.radius;
        let mut rejected = 0u64;
        loop {
            self.gaussian(j, rng, out);
            if out.iter().map(|v| v * v).sum::<f64>() <= r2 {
                return Ok(rejected);
            }
            rejected += 1;
            if rejected > MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::RejectionStall(rejected));
            }
        }
    }
}

impl DistributionModel for TruncatedGmm {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn radius(&self) -> f64 {
        self.params.radius
    }

    fn draw(&self, rng: &mut Rng, out: &mut [f64]) -> Result<()> {
        let j = inverse_cdf_index(&self.params.weights, rng.gen::<f64>());
        self.draw_component(j, rng, out).map(|_| ())
    }
}

/// `c₁ = √(k 2^{d+2} / ((1−η) θ_min))`.
pub fn c1_constant(k: usize, d: usize, eta: f64, theta_min: f64) -> f64 {
    (k as f64 * 2f64.powi(d as i32 + 2) / ((1.0 - eta) * theta_min)).sqrt()
}

/// Draws `n` points: component by weight, Gaussian draw, rejected until it
/// falls in `B(0, M)`. The latent label is the component. The largest
/// per-component rejection fraction is reported as the estimate of `η`.
pub fn sample_truncated_gmm(params: &TruncatedGmmParams, n: usize, seed: u64) -> Result<SampleWithTruth> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let model = TruncatedGmm::new(params.clone())?;
    let k = model.k();
    let d = params.dim();
    let mut rng = rng_from(seed);
    let mut points = vec![0.0; n * d];
    let mut labels = Vec::with_capacity(n);
    let mut tries = vec![0u64; k];
    let mut rejects = vec![0u64; k];
    for i in 0..n {
        let j = inverse_cdf_index(&params.weights, rng.gen::<f64>());
        let r = model.draw_component(j, &mut rng, &mut points[i * d..(i + 1) * d])?;
        tries[j] += r + 1;
        rejects[j] += r;
        labels.push(j);
        let total: u64 = tries.iter().sum();
        let accepted = (i + 1) as f64;
        if total >= ACCEPTANCE_WARMUP && accepted / (total as f64) < MIN_ACCEPTANCE {
            return Err(Error::invalid(format!(
                "estimated acceptance rate {:.2e} is below {MIN_ACCEPTANCE:e}",
                accepted / total as f64
            )));
        }
    }
    let eta = (0..k)
        .filter(|&j| tries[j] > 0)
        .map(|j| rejects[j] as f64 / tries[j] as f64)
        .fold(0.0, f64::max);
    let dataset = Dataset::new(d, points, Some(labels.clone()), Some(params.radius))?;
    Ok(SampleWithTruth {
        dataset,
        latent_labels: labels,
        truth: None,
        rejection_rate: Some(eta),
    })
}
