//! Distortion functionals for the squared Euclidean contrast.

use crate::data::{nearest, sq_dist, Assignment, Codebook, Dataset};
use crate::distributions::DistributionModel;
use crate::error::{Error, Result};
use crate::rng::{chunked_moments, MeanEstimate};

/// A distortion value with its Monte-Carlo standard error (0 when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Number of Monte-Carlo draws; 0 for an exact value.
    pub n_samples: usize,
}

impl DistortionEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            n_samples: 0,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.n_samples == 0
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Contrast `γ(c, x) = min_j ‖x − c_j‖²`.
pub fn gamma(codebook: &Codebook, point: &[f64]) -> Result<f64> {
    check_dim(codebook.dim(), point.len())?;
    Ok(nearest(point, codebook).1)
}

/// Mean of `γ(c, X_i)` over the dataset.
pub fn empirical_distortion(dataset: &Dataset, codebook: &Codebook) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(codebook.dim(), dataset.dim())?;
    let total: f64 = dataset.points().map(|p| nearest(p, codebook).1).sum();
    Ok(total / dataset.len() as f64)
}

/// Cell means with a flag for every empty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidUpdate {
    pub codebook: Codebook,
    /// `empty[j]` is true when no point fell in cell `j`; the codepoint then
    /// keeps its previous value.
    pub empty: Vec<bool>,
}

impl CentroidUpdate {
    pub fn empty_count(&self) -> usize {
        self.empty.iter().filter(|e| **e).count()
    }
}

/// Replaces every codepoint by the mean of its cell. Empty cells keep the
/// codepoint of `previous` and are flagged.
pub fn centroid_update(
    dataset: &Dataset,
    assignment: &Assignment,
    previous: &Codebook,
) -> Result<CentroidUpdate> {
    if assignment.len() != dataset.len() {
        return Err(Error::invalid(format!(
            "assignment of length {} for {} points",
            assignment.len(),
            dataset.len()
        )));
    }
    if assignment.k() != previous.k() {
        return Err(Error::invalid(format!(
            "assignment has k={} but codebook has k={}",
            assignment.k(),
            previous.k()
        )));
    }
    check_dim(previous.dim(), dataset.dim())?;
    let dim = dataset.dim();
    let k = previous.k();
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &j) in dataset.points().zip(assignment.cells()) {
        counts[j] += 1;
        for (s, v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut codebook = previous.clone();
    let mut empty = vec![false; k];
    for j in 0..k {
        if counts[j] == 0 {
            empty[j] = true;
            continue;
        }
        let c = counts[j] as f64;
        for (dst, s) in codebook.codepoint_mut(j).iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
            *dst = s / c;
        }
    }
    Ok(CentroidUpdate { codebook, empty })
}

/// Largest distance between a codepoint and the mean of its (nonempty) cell.
/// Zero exactly on the empirical stationary set.
pub fn centroid_residual(dataset: &Dataset, codebook: &Codebook) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let assignment = crate::data::partition(dataset, codebook)?;
    let update = centroid_update(dataset, &assignment, codebook)?;
    Ok((0..codebook.k())
        .filter(|&j| !update.empty[j])
        .map(|j| sq_dist(update.codebook.codepoint(j), codebook.codepoint(j)).sqrt())
        .fold(0.0, f64::max))
}

/// Population distortion `P γ(c, ·)`.
///
/// Exact when the model can integrate the codebook in closed form; otherwise
/// the mean of `γ` over `n_mc` draws, in fixed chunks so the value does not
/// depend on the number of worker threads.
pub fn population_distortion<M: DistributionModel + ?Sized>(
    model: &M,
    codebook: &Codebook,
    n_mc: usize,
    seed: u64,
) -> Result<DistortionEstimate> {
    check_dim(model.dim(), codebook.dim())?;
    if let Some(v) = model.exact_distortion(codebook) {
        return Ok(DistortionEstimate::exact(v));
    }
    monte_carlo_distortion(model, codebook, n_mc, seed)
}

/// Monte-Carlo estimate of `P γ(c, ·)`, bypassing any exact integrator.
pub fn monte_carlo_distortion<M: DistributionModel + ?Sized>(
    model: &M,
    codebook: &Codebook,
    n_mc: usize,
    seed: u64,
) -> Result<DistortionEstimate> {
    check_dim(model.dim(), codebook.dim())?;
    if n_mc < 2 {
        return Err(Error::invalid("Monte-Carlo estimation needs n_mc ≥ 2"));
    }
    let dim = model.dim();
    let (sum, sum_sq) = chunked_moments(n_mc, seed, |rng, count| {
        let mut x = vec![0.0; dim];
        let mut acc = (0.0, 0.0);
        for _ in 0..count {
            model.draw(rng, &mut x)?;
            let g = nearest(&x, codebook).1;
            acc.0 += g;
            acc.1 += g * g;
        }
        Ok::<_, Error>(acc)
    })?;
    let est = MeanEstimate::from_moments(sum, sum_sq, n_mc);
    Ok(DistortionEstimate {
        value: est.mean,
        std_error: est.std_error,
        n_samples: n_mc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::partition;
    use crate::oracle::FiniteDistribution;
    use proptest::prelude::*;

    fn four() -> Dataset {
        Dataset::from_scalars(&[0.0, 1.0, 10.0, 11.0], None).unwrap()
    }

    fn cb(v: &[f64]) -> Codebook {
        Codebook::from_scalars(v).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let c = Codebook::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(gamma(&c, &[3.0, 3.0]).unwrap(), 1.0);
        assert_eq!(gamma(&c, &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(gamma(&cb(&[0.5, 10.5]), &[11.0]).unwrap(), 0.25);
        assert!(gamma(&c, &[1.0]).is_err());
    }

    #[test]
    fn empirical_distortion_examples() {
        assert_eq!(empirical_distortion(&four(), &cb(&[0.5, 10.5])).unwrap(), 0.25);
        assert_eq!(empirical_distortion(&four(), &cb(&[11.0, 0.0, 10.0, 1.0])).unwrap(), 0.0);
        let d = Dataset::from_scalars(&[0.0, 1.0], None).unwrap();
        assert_eq!(empirical_distortion(&d, &cb(&[0.0])).unwrap(), 0.5);
        let empty = Dataset::new(1, vec![], None, None).unwrap();
        assert!(matches!(empirical_distortion(&empty, &cb(&[0.0])), Err(Error::EmptyDataset)));
    }

    #[test]
    fn centroid_update_examples() {
        let a = Assignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let u = centroid_update(&four(), &a, &cb(&[0.0, 0.0])).unwrap();
        assert_eq!(u.codebook.as_flat(), &[0.5, 10.5]);
        assert_eq!(u.empty, vec![false, false]);

        let a = Assignment::new(vec![0, 0, 0, 0], 2).unwrap();
        let u = centroid_update(&four(), &a, &cb(&[1.0, 99.0])).unwrap();
        assert_eq!(u.codebook.as_flat(), &[5.5, 99.0]);
        assert_eq!(u.empty, vec![false, true]);

        let a = Assignment::new(vec![2, 0, 3, 1], 4).unwrap();
        let u = centroid_update(&four(), &a, &cb(&[0.0; 4])).unwrap();
        assert_eq!(u.codebook.as_flat(), &[1.0, 11.0, 0.0, 10.0]);
    }

    #[test]
    fn centroid_residual_examples() {
        assert_eq!(centroid_residual(&four(), &cb(&[0.5, 10.5])).unwrap(), 0.0);
        assert_eq!(centroid_residual(&four(), &cb(&[0.0, 10.5])).unwrap(), 0.5);
        assert_eq!(centroid_residual(&four(), &cb(&[5.5])).unwrap(), 0.0);
    }

    #[test]
    fn population_distortion_is_exact_on_finite_support() {
        let dist = FiniteDistribution::uniform_scalars(&[0.0, 1.0, 10.0, 11.0], None).unwrap();
        let e = population_distortion(&dist, &cb(&[0.5, 10.5]), 100, 1).unwrap();
        assert_eq!(e, DistortionEstimate::exact(0.25));
        let e = population_distortion(&dist, &cb(&[0.0, 1.0, 10.0, 11.0]), 100, 1).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn monte_carlo_agrees_with_exact_sum() {
        let dist = FiniteDistribution::uniform_scalars(&[0.0, 1.0, 10.0, 11.0], None).unwrap();
        let mut hits = 0;
        for seed in 0..40 {
            let e = monte_carlo_distortion(&dist, &cb(&[0.0, 10.0]), 20_000, seed).unwrap();
            if (e.value - 0.5).abs() <= 4.0 * e.std_error {
                hits += 1;
            }
        }
        assert!(hits >= 38, "{hits}/40 within 4 s.e.");
    }

    proptest! {
        #[test]
        fn lloyd_half_steps_do_not_increase_distortion(
            pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..40),
            init in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..5),
        ) {
            let rows: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
            let d = Dataset::from_rows(&rows, None).unwrap();
            let c = Codebook::from_rows(&init.iter().map(|&(a, b)| vec![a, b]).collect::<Vec<_>>()).unwrap();
            let before = empirical_distortion(&d, &c).unwrap();
            let a = partition(&d, &c).unwrap();
            let after = empirical_distortion(&d, &centroid_update(&d, &a, &c).unwrap().codebook).unwrap();
            prop_assert!(after <= before + 1e-12 * before.max(1.0));
        }

        #[test]
        fn excess_distortion_bounded_by_codebook_distance(
            support in prop::collection::vec(-5.0f64..5.0, 3..8),
            shift in prop::collection::vec(-1.0f64..1.0, 2),
        ) {
            let dist = FiniteDistribution::uniform_scalars(&support, None).unwrap();
            let Ok(rep) = crate::oracle::stationary_report(&dist, 2) else { return Ok(()); };
            let star = &rep.optimal[0];
            let c = Codebook::from_scalars(&[star.as_flat()[0] + shift[0], star.as_flat()[1] + shift[1]]).unwrap();
            let dist_sq = rep.optimal.iter().map(|o| crate::classification::relabeled_sq_distance(&c, o)).fold(f64::INFINITY, f64::min);
            let excess = dist.distortion(&c).unwrap() - rep.r_star;
            prop_assert!(excess <= dist_sq + 1e-12);
        }
    }
}
