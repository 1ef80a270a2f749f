//! Seeded replicate studies over a grid of sample sizes.
//!
//! Replicate `r` at sample size `n` draws everything from
//! `derive_seed(base_seed, [n, r])`, so any row can be reproduced alone and
//! the output does not depend on the number of worker threads.

mod report;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use report::{
    fit_loglog_slope, format_rate_csv, parse_rate_csv, render_loglog_svg, Column, SlopeFit, CSV_HEADER,
};

use crate::classification::{classif_risk_empirical, classif_risk_population, Reference};
use crate::data::{partition, Codebook, Dataset};
use crate::distributions::spec::{parse_entries, parse_model_entries, read_model_spec, Table};
use crate::distributions::{Model, ModelSpec};
use crate::error::{Error, Result};
use crate::lloyd::{is_good_init, kmeanspp_init, multi_start_erm, run_lloyd, LloydOptions};
use crate::margin::f_clusterability_check;
use crate::quantization::population_distortion;
use crate::rng::{derive_seed, MeanEstimate};

/// Default sample-size grid `128, 256, …, 8192`.
pub fn default_n_grid() -> Vec<usize> {
    (7..=13).map(|e| 1usize << e).collect()
}

/// How `f` is chosen in the clusterability study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FRule {
    /// `f = √(p_min n)`.
    SqrtPminN,
    Fixed(f64),
}

impl FRule {
    pub fn resolve(self, p_min: f64, n: usize) -> f64 {
        match self {
            FRule::SqrtPminN => (p_min * n as f64).sqrt(),
            FRule::Fixed(f) => f,
        }
    }
}

impl std::str::FromStr for FRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt_pmin_n" => Ok(FRule::SqrtPminN),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|f| f.is_finite() && *f >= 0.0)
                .map(FRule::Fixed)
                .ok_or_else(|| Error::invalid(format!("f must be 'sqrt_pmin_n' or a nonnegative number, got '{s}'"))),
        }
    }
}

/// Parameters shared by all studies.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub k: usize,
    /// Strictly increasing.
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub restarts: usize,
    pub base_seed: u64,
    /// Draws used when a population quantity has no closed form.
    pub n_mc: usize,
    pub f_rule: FRule,
    pub lloyd: LloydOptions,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults: the standard grid, 200 replicates, 20 restarts, seed 0.
    pub fn new(model: ModelSpec, k: usize) -> Self {
        Self {
            model,
            k,
            n_grid: default_n_grid(),
            replicates: 200,
            restarts: 20,
            base_seed: 0,
            n_mc: 100_000,
            f_rule: FRule::SqrtPminN,
            lloyd: LloydOptions::default(),
            csv: None,
            svg: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n_grid must be nonempty and strictly increasing"));
        }
        if self.n_grid[0] < self.k {
            return Err(Error::invalid("every n must be at least k"));
        }
        if self.replicates == 0 || self.restarts == 0 {
            return Err(Error::invalid("replicates and restarts must be at least 1"));
        }
        Ok(())
    }
}

/// Parses an experiment configuration.
///
/// ```text
/// k = 2
/// n_grid = 128 256 512
/// replicates = 200
/// restarts = 20
/// base_seed = 7
/// model = four_point.model      # or an inline [model] section
/// ```
///
/// Optional keys: `n_mc`, `f` (`sqrt_pmin_n` or a number), `max_iters`,
/// `tol`, `empty_cell_policy`, `csv`, `svg`. Relative paths resolve against
/// `base_dir`.
pub fn parse_config(text: &str, base_dir: Option<&Path>) -> Result<ExperimentConfig> {
    let entries = parse_entries(text)?;
    let (top, rest): (Vec<_>, Vec<_>) = entries.into_iter().partition(|e| e.section.is_none());
    if let Some(e) = rest.iter().find(|e| e.section.as_deref() != Some("model")) {
        return Err(Error::parse(e.line, format!("unknown section '{}'", e.section.as_deref().unwrap_or(""))));
    }
    let t = Table::new(&top)?;
    let resolve = |p: &str| match base_dir {
        Some(dir) if Path::new(p).is_relative() => dir.join(p),
        _ => PathBuf::from(p),
    };
    let model = match (t.raw("model"), rest.is_empty()) {
        (Some((line, _)), false) => {
            return Err(Error::parse(line, "both 'model' and a [model] section are given"));
        }
        (Some((_, path)), true) => read_model_spec(&resolve(path))?,
        (None, false) => parse_model_entries(&rest)?,
        (None, true) => return Err(Error::parse(1, "missing 'model' key or [model] section")),
    };
    let mut cfg = ExperimentConfig::new(model, t.required_parsed("k")?);
    if let Some((line, s)) = t.raw("n_grid") {
        cfg.n_grid = s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::parse(line, format!("bad sample size '{s}'"))))
            .collect::<Result<_>>()?;
    }
    if let Some(v) = t.parsed("replicates")? {
        cfg.replicates = v;
    }
    if let Some(v) = t.parsed("restarts")? {
        cfg.restarts = v;
    }
    if let Some(v) = t.parsed("base_seed")? {
        cfg.base_seed = v;
    }
    if let Some(v) = t.parsed("n_mc")? {
        cfg.n_mc = v;
    }
    if let Some(v) = t.parsed("f")? {
        cfg.f_rule = v;
    }
    if let Some(v) = t.parsed("max_iters")? {
        cfg.lloyd.max_iters = v;
    }
    if let Some(v) = t.parsed("tol")? {
        cfg.lloyd.tol = v;
    }
    if let Some(v) = t.parsed("empty_cell_policy")? {
        cfg.lloyd.empty_cell_policy = v;
    }
    cfg.csv = t.raw("csv").map(|(_, p)| resolve(p));
    cfg.svg = t.raw("svg").map(|(_, p)| resolve(p));
    t.reject_unknown()?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path.parent())
}

/// One aggregated row; columns a study does not produce are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub replicates: usize,
    pub base_seed: u64,
    pub mean_excess_distortion: Option<f64>,
    pub std_error: Option<f64>,
    pub mean_classif_risk: Option<f64>,
    pub std_error_classif: Option<f64>,
    pub clusterable_fraction: Option<f64>,
    /// Replicates that are clusterable with `f > 32` and a good initialization.
    pub lloyd_eligible: Option<usize>,
    /// Eligible replicates whose Lloyd/ERM disagreement exceeds `81/(8f²) + 1/n`.
    pub lloyd_violations: Option<usize>,
    /// Free-form warnings, `;`-separated.
    pub flag: String,
}

impl RateRow {
    fn empty(n: usize, cfg: &ExperimentConfig) -> Self {
        Self {
            n,
            replicates: cfg.replicates,
            base_seed: cfg.base_seed,
            mean_excess_distortion: None,
            std_error: None,
            mean_classif_risk: None,
            std_error_classif: None,
            clusterable_fraction: None,
            lloyd_eligible: None,
            lloyd_violations: None,
            flag: String::new(),
        }
    }
}

/// Seed of replicate `r` at sample size `n`.
pub fn replicate_seed(base_seed: u64, n: usize, r: usize) -> u64 {
    derive_seed(base_seed, &[n as u64, r as u64])
}

// Sub-streams of a replicate seed.
const MODEL_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;
const ERM_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;
const MC_STREAM: u64 = 4;

/// A model shared by every replicate, or rebuilt per replicate when the
/// specification depends on `n` or draws a sign vector.
enum ModelSource<'a> {
    Shared(Model),
    PerReplicate(&'a ModelSpec),
}

impl ModelSource<'_> {
    fn new(cfg: &ExperimentConfig) -> Result<ModelSource<'_>> {
        if cfg.model.is_fixed() {
            Ok(ModelSource::Shared(cfg.model.build(cfg.k, cfg.n_grid[0], cfg.base_seed)?))
        } else {
            Ok(ModelSource::PerReplicate(&cfg.model))
        }
    }

    fn get(&self, k: usize, n: usize, seed: u64) -> Result<std::borrow::Cow<'_, Model>> {
        match self {
            ModelSource::Shared(m) => Ok(std::borrow::Cow::Borrowed(m)),
            ModelSource::PerReplicate(spec) => Ok(std::borrow::Cow::Owned(spec.build(k, n, seed)?)),
        }
    }
}

/// Runs `body(n, r, seed)` for every grid point and replicate, in parallel,
/// and returns the results grouped by `n` in replicate order.
fn run_grid<T, F>(cfg: &ExperimentConfig, body: F) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(usize, usize, u64) -> Result<T> + Sync,
{
    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let mut results = jobs
        .par_iter()
        .map(|&(n, r)| body(n, r, replicate_seed(cfg.base_seed, n, r)))
        .collect::<Result<Vec<T>>>()?
        .into_iter();
    Ok(cfg
        .n_grid
        .iter()
        .map(|_| results.by_ref().take(cfg.replicates).collect())
        .collect())
}

struct Fit {
    dataset: Dataset,
    erm: Codebook,
    erm_distortion: f64,
}

fn fit_replicate(cfg: &ExperimentConfig, model: &Model, n: usize, seed: u64) -> Result<Fit> {
    let sample = model.sample(n, derive_seed(seed, &[SAMPLE_STREAM]))?;
    let run = multi_start_erm(&sample.dataset, cfg.k, cfg.restarts, derive_seed(seed, &[ERM_STREAM]), &cfg.lloyd)?;
    Ok(Fit {
        erm_distortion: run.final_distortion(),
        erm: run.codebook,
        dataset: sample.dataset,
    })
}

/// Excess population distortion and whether Monte-Carlo was needed.
fn excess_distortion(cfg: &ExperimentConfig, model: &Model, codebook: &Codebook, seed: u64) -> Result<(f64, bool)> {
    let truth = model.truth().ok_or(Error::Unavailable("an exact optimal distortion"))?;
    let est = population_distortion(model, codebook, cfg.n_mc, derive_seed(seed, &[MC_STREAM]))?;
    Ok(((est.value - truth.optimal_distortion).max(0.0), !est.is_exact()))
}

fn add_flag(flag: &mut String, msg: &str) {
    if !flag.split(';').any(|f| f == msg) {
        if !flag.is_empty() {
            flag.push(';');
        }
        flag.push_str(msg);
    }
}

/// Mean excess distortion `R(ĉ_n) − R*` of the multi-start ERM per sample
/// size.
pub fn rate_study(cfg: &ExperimentConfig) -> Result<Vec<RateRow>> {
    cfg.validate()?;
    let source = ModelSource::new(cfg)?;
    let per_n = run_grid(cfg, |n, _, seed| {
        let model = source.get(cfg.k, n, derive_seed(seed, &[MODEL_STREAM]))?;
        let fit = fit_replicate(cfg, &model, n, seed)?;
        excess_distortion(cfg, &model, &fit.erm, seed)
    })?;
    Ok(cfg
        .n_grid
        .iter()
        .zip(per_n)
        .map(|(&n, reps)| {
            let values: Vec<f64> = reps.iter().map(|r| r.0).collect();
            let est = MeanEstimate::from_values(&values);
            let mut row = RateRow::empty(n, cfg);
            row.mean_excess_distortion = Some(est.mean);
            row.std_error = Some(est.std_error);
            if reps.iter().any(|r| r.1) {
                add_flag(&mut row.flag, "mc_distortion");
            }
            row
        })
        .collect())
}

/// Whether the model is a two-component truncated mixture with equal
/// spherical covariances and equal weights.
fn classification_hypotheses(model: &Model) -> bool {
    let Model::TruncatedGmm(g) = model else {
        return false;
    };
    let p = g.params();
    let d = p.dim();
    let c0 = &p.covariances[0];
    let spherical = c0 == &(nalgebra::DMatrix::identity(d, d) * c0[(0, 0)]);
    p.k() == 2 && spherical && p.covariances.iter().all(|c| c == c0) && p.weights.iter().all(|&w| w == p.weights[0])
}

/// Population classification risk of the multi-start Lloyd output against
/// the Bayes partition of the mixture means.
pub fn classif_study(cfg: &ExperimentConfig) -> Result<Vec<RateRow>> {
    cfg.validate()?;
    let source = ModelSource::new(cfg)?;
    let per_n = run_grid(cfg, |n, _, seed| {
        let model = source.get(cfg.k, n, derive_seed(seed, &[MODEL_STREAM]))?;
        let fit = fit_replicate(cfg, &model, n, seed)?;
        let risk = classif_risk_population(
            &model,
            &fit.erm,
            Reference::BayesMeans,
            cfg.n_mc,
            derive_seed(seed, &[MC_STREAM]),
        )?;
        Ok((risk.value, risk.n_samples > 0, classification_hypotheses(&model)))
    })?;
    Ok(cfg
        .n_grid
        .iter()
        .zip(per_n)
        .map(|(&n, reps)| {
            let values: Vec<f64> = reps.iter().map(|r| r.0).collect();
            let est = MeanEstimate::from_values(&values);
            let mut row = RateRow::empty(n, cfg);
            row.mean_classif_risk = Some(est.mean);
            row.std_error_classif = Some(est.std_error);
            if reps.iter().any(|r| r.1) {
                add_flag(&mut row.flag, "mc_risk");
            }
            if reps.iter().any(|r| !r.2) {
                add_flag(&mut row.flag, "outside_hypotheses");
            }
            row
        })
        .collect())
}

/// Outcome of one clusterability replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterabilityReplicate {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub f: f64,
    pub clusterable: bool,
    /// Initialization passes the good-initialization test for this `f`.
    pub good_init: bool,
    /// Fraction of sample points on which Lloyd from the separate k-means++
    /// seed and the multi-start ERM disagree, after relabeling.
    pub disagreement: f64,
    /// `81/(8f²) + 1/n`.
    pub disagreement_bound: f64,
    pub excess_distortion: Option<f64>,
}

impl ClusterabilityReplicate {
    /// Clusterable with `f > 32` and a good initialization.
    pub fn eligible(&self) -> bool {
        self.clusterable && self.good_init && self.f > 32.0
    }

    pub fn violates(&self) -> bool {
        self.eligible() && self.disagreement > self.disagreement_bound
    }
}

/// Every replicate of the clusterability study, grouped by `n`.
pub fn clusterability_replicates(cfg: &ExperimentConfig) -> Result<Vec<Vec<ClusterabilityReplicate>>> {
    cfg.validate()?;
    let source = ModelSource::new(cfg)?;
    run_grid(cfg, |n, r, seed| {
        let model = source.get(cfg.k, n, derive_seed(seed, &[MODEL_STREAM]))?;
        let p_min = match cfg.f_rule {
            FRule::Fixed(_) => 0.0,
            FRule::SqrtPminN => model.truth().ok_or(Error::Unavailable("a ground-truth p_min"))?.p_min,
        };
        let f = cfg.f_rule.resolve(p_min, n);
        let fit = fit_replicate(cfg, &model, n, seed)?;
        let clusterable = match f_clusterability_check(&fit.dataset, &fit.erm, f) {
            Ok(v) => v,
            Err(Error::EmptyCell(_)) => false,
            Err(e) => return Err(e),
        };
        let init = kmeanspp_init(&fit.dataset, cfg.k, derive_seed(seed, &[INIT_STREAM]))?;
        let good_init = f > 0.0
            && match is_good_init(&fit.dataset, &init, fit.erm_distortion, f) {
                Ok(v) => v,
                Err(Error::ZeroErmDistortion) => false,
                Err(e) => return Err(e),
            };
        let lloyd = run_lloyd(&fit.dataset, &init, &cfg.lloyd)?;
        let disagreement = classif_risk_empirical(
            &partition(&fit.dataset, &lloyd.codebook)?,
            &partition(&fit.dataset, &fit.erm)?,
            cfg.k,
        )?
        .value;
        let excess_distortion = match model.truth() {
            Some(_) => Some(excess_distortion(cfg, &model, &fit.erm, seed)?.0),
            None => None,
        };
        Ok(ClusterabilityReplicate {
            n,
            replicate: r,
            seed,
            f,
            clusterable,
            good_init,
            disagreement,
            disagreement_bound: 81.0 / (8.0 * f * f) + 1.0 / n as f64,
            excess_distortion,
        })
    })
}

/// Fraction of replicates that are `f`-clusterable around the ERM, with the
/// Lloyd/ERM disagreement counts.
pub fn clusterability_study(cfg: &ExperimentConfig) -> Result<Vec<RateRow>> {
    Ok(clusterability_rows(cfg, &clusterability_replicates(cfg)?))
}

/// Aggregates [`clusterability_replicates`] output.
pub fn clusterability_rows(cfg: &ExperimentConfig, reps: &[Vec<ClusterabilityReplicate>]) -> Vec<RateRow> {
    cfg.n_grid
        .iter()
        .zip(reps)
        .map(|(&n, reps)| {
            let mut row = RateRow::empty(n, cfg);
            let clusterable = reps.iter().filter(|r| r.clusterable).count();
            row.clusterable_fraction = Some(clusterable as f64 / reps.len() as f64);
            row.lloyd_eligible = Some(reps.iter().filter(|r| r.eligible()).count());
            row.lloyd_violations = Some(reps.iter().filter(|r| r.violates()).count());
            let excess: Option<Vec<f64>> = reps.iter().map(|r| r.excess_distortion).collect();
            if let Some(values) = excess {
                let est = MeanEstimate::from_values(&values);
                row.mean_excess_distortion = Some(est.mean);
                row.std_error = Some(est.std_error);
            }
            row
        })
        .collect()
}
