//! Seeded generators shared by the integration tests.
#![allow(dead_code)]

use quantlab::oracle::FiniteDistribution;
use quantlab::rng::{rng_from, Rng};
use quantlab::{Codebook, Dataset};
use rand::Rng as _;

pub fn rng(seed: u64) -> Rng {
    rng_from(seed)
}

/// Coordinates on a small integer lattice (many ties) or continuous.
pub fn coords(rng: &mut Rng, n: usize, d: usize, lattice: bool) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if lattice {
                        rng.gen_range(-5i32..=5) as f64
                    } else {
                        rng.gen_range(-10.0..10.0)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn dataset(rng: &mut Rng, n: usize, d: usize) -> Dataset {
    let lattice = rng.gen_bool(0.5);
    Dataset::from_rows(&coords(rng, n, d, lattice), None).unwrap()
}

/// Finite law on `n` distinct points with random positive weights.
pub fn finite(rng: &mut Rng, n: usize, d: usize) -> FiniteDistribution {
    loop {
        let lattice = rng.gen_bool(0.5);
        let mut rows = coords(rng, n, d, lattice);
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.dedup();
        if rows.len() < n {
            continue;
        }
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1u32..=8) as f64).collect();
        let total: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let head: f64 = w[..n - 1].iter().sum();
        w[n - 1] = 1.0 - head;
        return FiniteDistribution::new(&rows, w, None).unwrap();
    }
}

/// Codebook drawn uniformly in the cube inscribed in `B(0, radius)`.
pub fn codebook_in_ball(rng: &mut Rng, k: usize, d: usize, radius: f64) -> Codebook {
    let h = radius / (d as f64).sqrt();
    let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.gen_range(-h..h)).collect()).collect();
    Codebook::from_rows(&rows).unwrap()
}

/// `k` tight clusters of `per` points around well separated centres.
pub fn separated(rng: &mut Rng, k: usize, per: usize, d: usize, spread: f64) -> Dataset {
    let mut rows = Vec::new();
    for c in 0..k {
        for _ in 0..per {
            rows.push(
                (0..d)
                    .map(|a| if a == 0 { 20.0 * c as f64 } else { 0.0 } + rng.gen_range(-spread..spread))
                    .collect(),
            );
        }
    }
    Dataset::from_rows(&rows, None).unwrap()
}
