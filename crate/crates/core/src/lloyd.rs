//! Lloyd iterations, k-means++ seeding and multi-start ERM approximation.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use rayon::prelude::*;

use crate::data::{nearest, partition, Codebook, Dataset};
use crate::error::{Error, Result};
use crate::quantization::{centroid_update, empirical_distortion};
use crate::rng::rng_from;

/// What to do with a cell that receives no point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyCellPolicy {
    /// Move the codepoint onto the point with the largest current contrast.
    #[default]
    ReseedFarthest,
    /// Keep the previous codepoint.
    DropAndKeep,
}

impl std::str::FromStr for EmptyCellPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reseed_farthest" | "reseed-farthest" => Ok(Self::ReseedFarthest),
            "drop_and_keep" | "drop-and-keep" => Ok(Self::DropAndKeep),
            _ => Err(Error::invalid(format!("unknown empty-cell policy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydOptions {
    pub max_iters: usize,
    /// Stop once the relative decrease of the distortion is at most `tol`
    /// (0 runs to an exact fixed point).
    pub tol: f64,
    pub empty_cell_policy: EmptyCellPolicy,
    /// Iterations performed before the `tol` rule may stop the run.
    pub min_iters: usize,
}

impl Default for LloydOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 0.0,
            empty_cell_policy: EmptyCellPolicy::ReseedFarthest,
            min_iters: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    pub codebook: Codebook,
    pub iterations: usize,
    /// Empirical distortion after each step.
    pub distortion_trace: Vec<f64>,
    /// True only when the last step left the codebook unchanged.
    pub converged: bool,
    pub empty_cell_events: usize,
}

impl LloydResult {
    pub fn final_distortion(&self) -> f64 {
        *self.distortion_trace.last().expect("at least one step")
    }
}

/// Outcome of a single Lloyd step.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydStep {
    pub codebook: Codebook,
    pub changed: bool,
    pub empty_cells: usize,
}

/// One assign-then-average step with the default empty-cell policy.
pub fn lloyd_step(dataset: &Dataset, codebook: &Codebook) -> Result<(Codebook, bool)> {
    let s = lloyd_step_with(dataset, codebook, EmptyCellPolicy::default())?;
    Ok((s.codebook, s.changed))
}

/// One assign-then-average step. `changed` is false exactly when the codebook
/// is reproduced bit for bit, i.e. at a fixed point.
pub fn lloyd_step_with(dataset: &Dataset, codebook: &Codebook, policy: EmptyCellPolicy) -> Result<LloydStep> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let assignment = partition(dataset, codebook)?;
    let update = centroid_update(dataset, &assignment, codebook)?;
    let empty_cells = update.empty_count();
    let mut next = update.codebook;
    if empty_cells > 0 && policy == EmptyCellPolicy::ReseedFarthest {
        reseed_farthest(dataset, &mut next, &update.empty);
    }
    let changed = next.as_flat().iter().zip(codebook.as_flat()).any(|(a, b)| a.to_bits() != b.to_bits());
    Ok(LloydStep {
        codebook: next,
        changed,
        empty_cells,
    })
}

/// Moves each empty codepoint, in index order, onto the point farthest from
/// the codepoints already in use (lowest point index on ties). A cell is left
/// alone when every point is already covered exactly.
fn reseed_farthest(dataset: &Dataset, codebook: &mut Codebook, empty: &[bool]) {
    let dim = codebook.dim();
    let mut active: Vec<usize> = (0..codebook.k()).filter(|&j| !empty[j]).collect();
    for j in (0..codebook.k()).filter(|&j| empty[j]) {
        let live = Codebook::new(dim, active.iter().flat_map(|&a| codebook.codepoint(a).to_vec()).collect())
            .expect("at least one nonempty cell");
        let mut best = (0usize, 0.0f64);
        for (i, p) in dataset.points().enumerate() {
            let g = nearest(p, &live).1;
            if g > best.1 {
                best = (i, g);
            }
        }
        if best.1 > 0.0 {
            codebook.codepoint_mut(j).copy_from_slice(dataset.point(best.0));
            active.push(j);
        }
    }
}

/// Iterates [`lloyd_step_with`] until a fixed point, the `tol` rule, or
/// `max_iters`.
pub fn run_lloyd(dataset: &Dataset, init: &Codebook, opts: &LloydOptions) -> Result<LloydResult> {
    if opts.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::invalid("tol must be nonnegative"));
    }
    if init.dim() != dataset.dim() {
        return Err(Error::DimensionMismatch {
            expected: dataset.dim(),
            found: init.dim(),
        });
    }
    let mut prev = empirical_distortion(dataset, init)?;
    let mut codebook = init.clone();
    let mut trace = Vec::new();
    let mut events = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let step = lloyd_step_with(dataset, &codebook, opts.empty_cell_policy)?;
        iterations += 1;
        events += step.empty_cells;
        codebook = step.codebook;
        let d = empirical_distortion(dataset, &codebook)?;
        trace.push(d);
        if !step.changed {
            converged = true;
            break;
        }
        if opts.tol > 0.0 && iterations >= opts.min_iters && prev - d <= opts.tol * prev {
            break;
        }
        prev = d;
    }
    Ok(LloydResult {
        codebook,
        iterations,
        distortion_trace: trace,
        converged,
        empty_cell_events: events,
    })
}

/// D² seeding: a uniform first centre, then each centre drawn with
/// probability proportional to its squared distance to the chosen ones.
pub fn kmeanspp_init(dataset: &Dataset, k: usize, seed: u64) -> Result<Codebook> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let distinct = dataset.distinct_count();
    if k > distinct {
        return Err(Error::invalid(format!("k = {k} exceeds the {distinct} distinct points")));
    }
    let mut rng = rng_from(seed);
    let n = dataset.len();
    let first = rng.gen_range(0..n);
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = dataset
        .points()
        .map(|p| crate::data::sq_dist(p, dataset.point(first)))
        .collect();
    while chosen.len() < k {
        let idx = WeightedIndex::new(&d2).map_err(|e| Error::invalid(format!("seeding weights: {e}")))?;
        let next = idx.sample(&mut rng);
        chosen.push(next);
        let c = dataset.point(next);
        for (w, p) in d2.iter_mut().zip(dataset.points()) {
            *w = w.min(crate::data::sq_dist(p, c));
        }
    }
    let flat = chosen.iter().flat_map(|&i| dataset.point(i).to_vec()).collect();
    Codebook::new(dataset.dim(), flat)
}

/// Best of `restarts` k-means++-seeded Lloyd runs; restart `r` uses seed
/// `seed + r`, ties go to the lower restart index.
pub fn multi_start_erm(
    dataset: &Dataset,
    k: usize,
    restarts: usize,
    seed: u64,
    opts: &LloydOptions,
) -> Result<LloydResult> {
    if restarts == 0 {
        return Err(Error::invalid("restarts must be at least 1"));
    }
    let runs: Vec<Result<LloydResult>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let init = kmeanspp_init(dataset, k, seed.wrapping_add(r as u64))?;
            run_lloyd(dataset, &init, opts)
        })
        .collect();
    let mut best: Option<LloydResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.final_distortion() < b.final_distortion()) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts ≥ 1"))
}

/// Whether `R̂(init) / R̂(ĉ_n) < f²/128 − 1`.
pub fn is_good_init(dataset: &Dataset, init: &Codebook, erm_distortion: f64, f: f64) -> Result<bool> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::invalid(format!("f must be positive, got {f}")));
    }
    if !erm_distortion.is_finite() || erm_distortion < 0.0 {
        return Err(Error::invalid(format!("invalid ERM distortion {erm_distortion}")));
    }
    if erm_distortion == 0.0 {
        return Err(Error::ZeroErmDistortion);
    }
    let ratio = empirical_distortion(dataset, init)? / erm_distortion;
    Ok(ratio < f * f / 128.0 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_erm;
    use crate::quantization::centroid_residual;
    use proptest::prelude::*;

    fn four() -> Dataset {
        Dataset::from_scalars(&[0.0, 1.0, 10.0, 11.0], None).unwrap()
    }

    fn cb(v: &[f64]) -> Codebook {
        Codebook::from_scalars(v).unwrap()
    }

    #[test]
    fn step_examples() {
        let (c, changed) = lloyd_step(&four(), &cb(&[0.0, 10.0])).unwrap();
        assert_eq!(c.as_flat(), &[0.5, 10.5]);
        assert!(changed);
        let (c, changed) = lloyd_step(&four(), &cb(&[0.5, 10.5])).unwrap();
        assert_eq!(c.as_flat(), &[0.5, 10.5]);
        assert!(!changed);
        let (c, _) = lloyd_step(&four(), &cb(&[-3.0])).unwrap();
        assert_eq!(c.as_flat(), &[5.5]);
    }

    #[test]
    fn run_examples() {
        let r = run_lloyd(&four(), &cb(&[0.0, 10.0]), &LloydOptions::default()).unwrap();
        assert!(r.converged && r.iterations <= 2);
        assert_eq!(r.codebook.as_flat(), &[0.5, 10.5]);
        assert_eq!(r.final_distortion(), 0.25);

        let r = run_lloyd(&four(), &cb(&[0.5, 10.5]), &LloydOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!((r.iterations, r.distortion_trace.len()), (1, 1));
    }

    #[test]
    fn duplicate_init_triggers_policy() {
        let init = cb(&[3.0, 3.0]);
        let before = empirical_distortion(&four(), &init).unwrap();
        let r = run_lloyd(&four(), &init, &LloydOptions::default()).unwrap();
        assert!(r.empty_cell_events >= 1);
        assert_eq!(r.codebook.k(), 2);
        assert!(r.final_distortion() <= before);
        assert!(r.distortion_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.codebook.canonical().as_flat(), &[0.5, 10.5]);

        let opts = LloydOptions {
            empty_cell_policy: EmptyCellPolicy::DropAndKeep,
            ..Default::default()
        };
        let r = run_lloyd(&four(), &cb(&[20.0, 20.0]), &opts).unwrap();
        assert_eq!(r.codebook.as_flat(), &[5.5, 20.0]);
        assert!(r.converged);
    }

    #[test]
    fn reseed_picks_farthest_point() {
        // After averaging, cell 0 holds everything at 5.5; 0 and 11 tie at
        // γ = 30.25 and the lower index wins.
        let step = lloyd_step_with(&four(), &cb(&[3.0, 3.0]), EmptyCellPolicy::ReseedFarthest).unwrap();
        assert_eq!(step.codebook.as_flat(), &[5.5, 0.0]);
        assert_eq!(step.empty_cells, 1);
    }

    #[test]
    fn tolerance_stop_is_not_convergence() {
        let data = Dataset::from_scalars(&(0..50).map(|i| (i * i) as f64 / 50.0).collect::<Vec<_>>(), None).unwrap();
        let opts = LloydOptions {
            tol: 0.5,
            ..Default::default()
        };
        let r = run_lloyd(&data, &cb(&[0.0, 0.1, 0.2]), &opts).unwrap();
        assert!(!r.converged);
        let opts = LloydOptions {
            tol: 0.5,
            min_iters: 3,
            ..Default::default()
        };
        let r2 = run_lloyd(&data, &cb(&[0.0, 0.1, 0.2]), &opts).unwrap();
        assert!(r2.iterations >= 3 || r2.converged);
    }

    #[test]
    fn kmeanspp_examples() {
        let d = four();
        let c = kmeanspp_init(&d, 4, 5).unwrap();
        assert_eq!(c.canonical().as_flat(), &[0.0, 1.0, 10.0, 11.0]);
        assert_eq!(empirical_distortion(&d, &c).unwrap(), 0.0);
        let c = kmeanspp_init(&d, 1, 5).unwrap();
        assert!([0.0, 1.0, 10.0, 11.0].contains(&c.as_flat()[0]));
        assert_eq!(kmeanspp_init(&d, 2, 42).unwrap(), kmeanspp_init(&d, 2, 42).unwrap());
        let dup = Dataset::from_scalars(&[1.0, 1.0, 2.0], None).unwrap();
        assert!(kmeanspp_init(&dup, 3, 0).is_err());
    }

    #[test]
    fn kmeanspp_split_frequency() {
        // P(split) = ½(221/222 + 181/182) ≈ 0.9953.
        let d = four();
        let splits = (0..10_000u64)
            .filter(|&s| {
                let c = kmeanspp_init(&d, 2, s).unwrap();
                (c.as_flat()[0] < 5.0) != (c.as_flat()[1] < 5.0)
            })
            .count();
        assert!(splits >= 9500, "{splits}");
    }

    #[test]
    fn multi_start_examples() {
        let r = multi_start_erm(&four(), 2, 20, 1, &LloydOptions::default()).unwrap();
        assert_eq!(r.final_distortion(), 0.25);

        let d = four();
        let single = multi_start_erm(&d, 2, 1, 77, &LloydOptions::default()).unwrap();
        let direct = run_lloyd(&d, &kmeanspp_init(&d, 2, 77).unwrap(), &LloydOptions::default()).unwrap();
        assert_eq!(single, direct);

        let pts = [0.0, 0.3, 0.7, 20.0, 20.4, 21.0, 40.0, 40.2, 41.1];
        let d = Dataset::from_scalars(&pts, None).unwrap();
        let (_, exact) = exact_erm(&d, 3).unwrap();
        let r = multi_start_erm(&d, 3, 50, 3, &LloydOptions::default()).unwrap();
        assert!((r.final_distortion() - exact).abs() <= 1e-12);
    }

    #[test]
    fn good_init_examples() {
        let d = four();
        let erm = cb(&[0.5, 10.5]);
        assert!(is_good_init(&d, &erm, 0.25, 32.0).unwrap());
        // f = 16 puts the threshold at exactly 1.
        assert!(!is_good_init(&d, &erm, 0.25, 16.0).unwrap());
        let c10 = cb(&[0.5 - 2.0f64.sqrt() * 1.5, 10.5]);
        let ratio = empirical_distortion(&d, &c10).unwrap() / 0.25;
        assert!(ratio > 7.0);
        assert!(!is_good_init(&d, &c10, 0.25, 32.0).unwrap());
        assert!(matches!(is_good_init(&d, &erm, 0.0, 32.0), Err(Error::ZeroErmDistortion)));
    }

    proptest! {
        #[test]
        fn trace_monotone_and_fixed_point_sound(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..30),
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let rows: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
            let d = Dataset::from_rows(&rows, None).unwrap();
            let k = k.min(d.distinct_count());
            let init = kmeanspp_init(&d, k, seed).unwrap();
            let r = run_lloyd(&d, &init, &LloydOptions::default()).unwrap();
            let start = empirical_distortion(&d, &init).unwrap();
            prop_assert!(r.distortion_trace[0] <= start);
            prop_assert!(r.distortion_trace.windows(2).all(|w| w[1] <= w[0]));
            if r.converged {
                prop_assert!(centroid_residual(&d, &r.codebook).unwrap() <= 1e-12);
                prop_assert!(!lloyd_step(&d, &r.codebook).unwrap().1);
            }
        }
    }
}
