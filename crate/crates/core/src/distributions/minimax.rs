use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use super::{DistributionModel, SampleWithTruth, Truth};
use crate::data::{nearest, norm, sq_dist, Codebook, Dataset};
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};

/// A vector of signs `σ ∈ {−1, +1}^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::invalid("sign vector must be nonempty"));
        }
        if let Some(s) = signs.iter().find(|s| s.abs() != 1) {
            return Err(Error::invalid(format!("sign entries must be ±1, got {s}")));
        }
        Ok(Self(signs))
    }

    pub fn all_positive(k: usize) -> Self {
        Self(vec![1; k])
    }

    /// Independent fair signs.
    pub fn random(k: usize, rng: &mut Rng) -> Self {
        Self((0..k).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        f64::from(self.0[i])
    }

    /// `H(σ, σ') = Σ |σ_i − σ'_i| / 2`.
    pub fn hamming(&self, other: &SignVector) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::invalid(format!(
                "sign vectors of lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count())
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<&str> = self.0.iter().map(|&v| if v > 0 { "+" } else { "-" }).collect();
        f.write_str(&s.join(" "))
    }
}

impl FromStr for SignVector {
    type Err = Error;

    /// Accepts `+`/`-`, `+1`/`-1` or `1`/`-1`, separated by spaces or commas.
    fn from_str(s: &str) -> Result<Self> {
        let signs = s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| match t {
                "+" | "+1" | "1" => Ok(1),
                "-" | "-1" => Ok(-1),
                other => Err(Error::invalid(format!("bad sign '{other}'"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        SignVector::new(signs)
    }
}

/// Parameters of the tilted-segment family `P_σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxParams {
    pub k: usize,
    pub d: usize,
    pub radius: f64,
    pub sigma: SignVector,
    pub delta: f64,
}

impl MinimaxParams {
    pub fn new(k: usize, d: usize, radius: f64, sigma: SignVector, delta: f64) -> Result<Self> {
        let p = Self {
            k,
            d,
            radius,
            sigma,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 {
            return Err(Error::invalid("k and d must be positive"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {}", self.radius)));
        }
        if self.sigma.len() != self.k {
            return Err(Error::invalid(format!(
                "sign vector has length {} but k = {}",
                self.sigma.len(),
                self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::invalid(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        Ok(())
    }

    /// `Δ = 3M / (4 k^{1/d})`.
    pub fn big_delta(&self) -> f64 {
        big_delta(self.k, self.d, self.radius)
    }

    /// `ρ = Δ / 8`.
    pub fn rho(&self) -> f64 {
        self.big_delta() / 8.0
    }

    /// `ρ²/3 − δ²ρ²/4`.
    pub fn optimal_distortion(&self) -> f64 {
        let r2 = self.rho() * self.rho();
        r2 / 3.0 - self.delta * self.delta * r2 / 4.0
    }

    pub fn with_sigma(&self, sigma: SignVector) -> Result<Self> {
        Self::new(self.k, self.d, self.radius, sigma, self.delta)
    }
}

fn big_delta(k: usize, d: usize, radius: f64) -> f64 {
    3.0 * radius / (4.0 * (k as f64).powf(1.0 / d as f64))
}

/// Grid placement of `k` centres in `B(0, M − Δ/8)` with pairwise distance at
/// least `Δ`: the first `k` nodes (lexicographic) of a centred cubic grid of
/// side `Δ` on the first `d'` axes, `g^{d'} ≥ k`, with `d'` chosen to make
/// the layout as compact as possible.
pub fn minimax_centers(k: usize, d: usize, radius: f64) -> Result<Vec<Vec<f64>>> {
    if k == 0 || d == 0 {
        return Err(Error::invalid("k and d must be positive"));
    }
    let delta = big_delta(k, d, radius);
    // Use the first `d'` axes, choosing the layout with the smallest radius.
    let mut best: Option<(f64, usize, usize)> = None;
    for used in 1..=d {
        let mut g = 1usize;
        while g.checked_pow(used as u32).is_some_and(|v| v < k) {
            g += 1;
        }
        let extent = (used as f64).sqrt() * (g as f64 - 1.0) / 2.0 * delta;
        if best.is_none_or(|b| extent < b.0) {
            best = Some((extent, used, g));
        }
    }
    let (_, used, g) = best.expect("d ≥ 1");
    let offset = (g as f64 - 1.0) / 2.0;
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|mut idx| {
            let mut z = vec![0.0; d];
            for coord in z[..used].iter_mut().rev() {
                *coord = (((idx % g) as f64) - offset) * delta;
                idx /= g;
            }
            z
        })
        .collect();
    let limit = radius - delta / 8.0;
    for (i, z) in centers.iter().enumerate() {
        if norm(z) > limit * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "packing failure: centre {i} has norm {} > M − Δ/8 = {limit}",
                norm(z)
            )));
        }
        for w in &centers[..i] {
            if sq_dist(z, w).sqrt() < delta * (1.0 - 1e-12) {
                return Err(Error::invalid("packing failure: centres closer than Δ"));
            }
        }
    }
    Ok(centers)
}

/// `P_σ` with its centres precomputed.
#[derive(Debug, Clone)]
pub struct Minimax {
    params: MinimaxParams,
    centers: Vec<Vec<f64>>,
}

impl Minimax {
    pub fn new(params: MinimaxParams) -> Result<Self> {
        params.validate()?;
        let centers = minimax_centers(params.k, params.d, params.radius)?;
        Ok(Self { params, centers })
    }

    pub fn params(&self) -> &MinimaxParams {
        &self.params
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn rho(&self) -> f64 {
        self.params.rho()
    }

    pub fn delta(&self) -> f64 {
        self.params.delta
    }

    pub fn sigma(&self) -> &SignVector {
        &self.params.sigma
    }

    /// `c_τ` with `c_{τ,i} = z_i + τ_i (δρ/2) e₁`.
    pub fn codebook_for(&self, tau: &SignVector) -> Result<Codebook> {
        if tau.len() != self.k() {
            return Err(Error::invalid("sign vector length differs from k"));
        }
        let shift = self.delta() * self.rho() / 2.0;
        let rows: Vec<Vec<f64>> = self
            .centers
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let mut c = z.clone();
                c[0] += tau.get(i) * shift;
                c
            })
            .collect();
        Codebook::from_rows(&rows)
    }

    pub fn optimal_codebook(&self) -> Codebook {
        self.codebook_for(&self.params.sigma).expect("validated")
    }

    pub fn truth(&self) -> Truth {
        let c = self.optimal_codebook();
        Truth {
            b: c.min_separation(),
            optimal_codebook: c,
            optimal_distortion: self.params.optimal_distortion(),
            p_min: 1.0 / self.k() as f64,
        }
    }

    /// Sign vector whose codebook is closest to `codebook`: the side of `z_i`
    /// (along `e₁`) on which codepoint `i` lies, `+` on ties.
    pub fn nearest_signs(&self, codebook: &Codebook) -> Result<SignVector> {
        if codebook.k() != self.k() || codebook.dim() != self.params.d {
            return Err(Error::invalid("codebook shape differs from the model"));
        }
        SignVector::new(
            (0..self.k())
                .map(|i| if codebook.codepoint(i)[0] >= self.centers[i][0] { 1 } else { -1 })
                .collect(),
        )
    }

    /// Density of the offset `s` along `e₁` within cell `i`.
    pub fn offset_density(&self, i: usize, s: f64) -> f64 {
        let rho = self.rho();
        if s.abs() > rho {
            return 0.0;
        }
        let tilt = self.params.sigma.get(i) * self.delta();
        if s >= 0.0 {
            (1.0 + tilt) / (2.0 * rho)
        } else {
            (1.0 - tilt) / (2.0 * rho)
        }
    }

    fn draw_offset(&self, i: usize, rng: &mut Rng) -> f64 {
        let p_pos = (1.0 + self.params.sigma.get(i) * self.delta()) / 2.0;
        let u: f64 = rng.gen();
        let mag = self.rho() * rng.gen::<f64>();
        if u < p_pos {
            mag
        } else {
            -mag
        }
    }
}

impl DistributionModel for Minimax {
    fn dim(&self) -> usize {
        self.params.d
    }

    fn radius(&self) -> f64 {
        self.params.radius
    }

    fn draw(&self, rng: &mut Rng, out: &mut [f64]) -> Result<()> {
        let i = rng.gen_range(0..self.k());
        let s = self.draw_offset(i, rng);
        out.copy_from_slice(&self.centers[i]);
        out[0] += s;
        Ok(())
    }

    fn exact_distortion(&self, codebook: &Codebook) -> Option<f64> {
        exact_distortion_impl(self, codebook).ok()
    }
}

/// Draws `n` points: a uniform cell `i`, then the tilted offset along `e₁`.
pub fn sample_minimax(params: &MinimaxParams, n: usize, seed: u64) -> Result<SampleWithTruth> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let model = Minimax::new(params.clone())?;
    let d = params.d;
    let mut rng = rng_from(seed);
    let mut points = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let i = rng.gen_range(0..params.k);
        let s = model.draw_offset(i, &mut rng);
        let start = points.len();
        points.extend_from_slice(&model.centers[i]);
        points[start] += s;
        labels.push(i);
    }
    let dataset = Dataset::new(d, points, Some(labels.clone()), Some(params.radius))?;
    Ok(SampleWithTruth {
        dataset,
        latent_labels: labels,
        truth: Some(model.truth()),
        rejection_rate: None,
    })
}

/// `R(c_{σ'}, P_σ) − R(c_σ, P_σ) = δ²ρ² H(σ, σ') / k`.
///
/// Each cell has mass `1/k` and its codepoint moves by `δρ` when the sign
/// flips, which gives the constant above.
pub fn minimax_true_gap(sigma: &SignVector, sigma_prime: &SignVector, params: &MinimaxParams) -> Result<f64> {
    let h = sigma.hamming(sigma_prime)?;
    if sigma.len() != params.k {
        return Err(Error::invalid("sign vector length differs from k"));
    }
    let dr = params.delta * params.rho();
    Ok(dr * dr * h as f64 / params.k as f64)
}

/// Exact `R(c, P_σ)` when each segment lies in a single Voronoi cell of `c`.
pub fn minimax_exact_distortion(params: &MinimaxParams, codebook: &Codebook) -> Result<f64> {
    exact_distortion_impl(&Minimax::new(params.clone())?, codebook)
}

fn exact_distortion_impl(model: &Minimax, codebook: &Codebook) -> Result<f64> {
    let d = model.params.d;
    if codebook.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: codebook.dim(),
        });
    }
    let rho = model.rho();
    let k = model.k() as f64;
    let mut total = 0.0;
    for (i, z) in model.centers.iter().enumerate() {
        let mut a = z.clone();
        let mut b = z.clone();
        a[0] -= rho;
        b[0] += rho;
        let (ja, _) = nearest(&a, codebook);
        let (jb, _) = nearest(&b, codebook);
        if ja != jb {
            return Err(Error::SplitInterval { interval: i });
        }
        let c = codebook.codepoint(ja);
        let mean_offset = model.params.sigma.get(i) * model.delta() * rho / 2.0;
        total += sq_dist(z, c) + 2.0 * mean_offset * (z[0] - c[0]) + rho * rho / 3.0;
    }
    Ok(total / k)
}
