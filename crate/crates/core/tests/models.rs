//! Sampler and ground-truth checks for the synthetic families.

mod common;

use quantlab::distributions::{sample_minimax, Minimax, MinimaxParams, SignVector, TruncatedGmm, TruncatedGmmParams};
use quantlab::margin::{margin_check, MassSource, R0_GRID};
use quantlab::normal;
use quantlab::oracle::FiniteDistribution;
use quantlab::quantization::centroid_residual;
use quantlab::Codebook;

fn minimax(k: usize, d: usize, delta: f64, seed: u64) -> MinimaxParams {
    let sigma = SignVector::random(k, &mut common::rng(seed));
    MinimaxParams::new(k, d, 1.0, sigma, delta).unwrap()
}

#[test]
fn minimax_cells_are_equally_likely() {
    let k = 4;
    let n = 40_000;
    let params = minimax(k, 2, 0.5, 1);
    let s = sample_minimax(&params, n, 2).unwrap();
    let mut counts = vec![0usize; k];
    for &l in &s.latent_labels {
        counts[l] += 1;
    }
    let tol = 4.0 * (1.0 / (k * n) as f64).sqrt();
    for c in counts {
        let f = c as f64 / n as f64;
        assert!((f - 1.0 / k as f64).abs() <= tol, "frequency {f}");
    }
}

#[test]
fn claimed_optimum_satisfies_the_centroid_condition_in_the_limit() {
    let k = 3;
    let params = minimax(k, 2, 0.6, 3);
    let model = Minimax::new(params.clone()).unwrap();
    let c = model.optimal_codebook();
    let rho = params.rho();
    let mut last = f64::INFINITY;
    for (i, n) in [1_000usize, 16_000, 256_000].into_iter().enumerate() {
        let ds = sample_minimax(&params, n, 10 + i as u64).unwrap().dataset;
        let res = centroid_residual(&ds, &c).unwrap();
        assert!(res <= 5.0 * rho * (k as f64 / n as f64).sqrt(), "n {n}: residual {res}");
        assert!(res < last);
        last = res;
    }
}

/// Midpoint discretization of a one-dimensional symmetric two-component
/// mixture on `[-M, M]`.
fn discretized_mixture(mean: f64, sigma: f64, radius: f64, cells: usize) -> FiniteDistribution {
    let h = 2.0 * radius / cells as f64;
    let xs: Vec<f64> = (0..cells).map(|i| -radius + (i as f64 + 0.5) * h).collect();
    let dens: Vec<f64> = xs
        .iter()
        .map(|&x| normal::pdf((x - mean) / sigma) + normal::pdf((x + mean) / sigma))
        .collect();
    let total: f64 = dens.iter().sum();
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    FiniteDistribution::new(&rows, dens.iter().map(|d| d / total).collect(), Some(radius)).unwrap()
}

/// Symmetric optimum `(-a, a)`: each codepoint is the mean of its half-line.
fn symmetric_optimum(dist: &FiniteDistribution) -> Codebook {
    let (mut mass, mut moment) = (0.0, 0.0);
    for (x, w) in dist.atoms() {
        if x[0] > 0.0 {
            mass += w;
            moment += w * x[0];
        }
    }
    let a = moment / mass;
    Codebook::from_scalars(&[-a, a]).unwrap()
}

fn check_tgmm_margin(sigma: f64) {
    let (mean, radius) = (2.0, 8.0);
    let gmm = TruncatedGmm::new(TruncatedGmmParams::symmetric(vec![vec![-mean], vec![mean]], sigma, radius).unwrap())
        .unwrap();
    let dist = discretized_mixture(mean, sigma, radius, 8000);
    let c = symmetric_optimum(&dist);
    assert!(centroid_residual_on(&dist, &c) < 1e-12);
    let chk = margin_check(MassSource::Population(&dist), &[c], gmm.b_tilde() / 8.0, R0_GRID).unwrap();
    assert!(chk.holds, "sigma {sigma}: first violation at {:?}", chk.first_violation);
}

fn centroid_residual_on(dist: &FiniteDistribution, c: &Codebook) -> f64 {
    let mut sums = [(0.0, 0.0); 2];
    for (x, w) in dist.atoms() {
        let j = quantlab::assign(x, c).unwrap();
        sums[j].0 += w;
        sums[j].1 += w * x[0];
    }
    (0..2).map(|j| (sums[j].1 / sums[j].0 - c.codepoint(j)[0]).abs()).fold(0.0, f64::max)
}

#[test]
fn tgmm_in_the_localized_regime_satisfies_the_margin_condition() {
    let sigma = 0.04;
    let gmm = TruncatedGmm::new(TruncatedGmmParams::symmetric(vec![vec![-2.0], vec![2.0]], sigma, 8.0).unwrap())
        .unwrap();
    assert!(gmm.means_localize_optimum(0.0));
    check_tgmm_margin(sigma);
}

#[test]
fn tgmm_of_the_classification_study_satisfies_the_margin_condition() {
    check_tgmm_margin(0.25);
}
