//! `quantlab` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad input, 3 internal failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quantlab::data::{format_dataset, read_dataset, write_dataset};
use quantlab::distributions::{read_model_spec, DistributionModel, ModelSpec};
use quantlab::experiments::{
    clusterability_study, classif_study, fit_loglog_slope, format_rate_csv, parse_rate_csv, rate_study, read_config,
    render_loglog_svg, Column, ExperimentConfig, RateRow,
};
use quantlab::lloyd::{multi_start_erm, EmptyCellPolicy, LloydOptions};
use quantlab::margin::MarginDiagnostics;
use quantlab::oracle::{exact_erm, MAX_ERM_K, MAX_POINTS};
use quantlab::{Codebook, Dataset, Error};

#[derive(Parser)]
#[command(name = "quantlab", version, about = "k-means quantization and classification laboratory")]
struct Cli {
    /// Base seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model or experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (`sample`) or directory (studies).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write study results as CSV.
    #[arg(long, global = true)]
    csv: bool,
    /// Also render a log-log SVG plot.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run multi-start Lloyd on a dataset file.
    Fit {
        dataset: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        /// `reseed-farthest` or `drop-and-keep`.
        #[arg(long, default_value = "reseed-farthest")]
        empty_cell_policy: EmptyCellPolicy,
    },
    /// Exact empirical risk minimizer of a tiny dataset.
    ErmExact {
        dataset: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Margin and clusterability report of a dataset.
    Diagnose {
        dataset: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        /// Comma-separated clusterability factors; default `√(p̂_min n)`.
        #[arg(long, value_delimiter = ',')]
        f: Vec<f64>,
    },
    /// Draw a sample from a model specification (`--config`).
    Sample {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Cells used for ground truth; defaults to the model's own count.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Excess-distortion rate study.
    Rate,
    /// Classification-risk rate study.
    Classif,
    /// Clusterability frequency study.
    Clusterability,
    /// Log-log slope of a study CSV column.
    Slope {
        csv_file: PathBuf,
        #[arg(long, default_value = "mean_excess_distortion")]
        column: Column,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::RejectionStall(_) | Error::SplitInterval { .. } => 3,
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 1, msg: msg.into() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("quantlab: {e}");
            return ExitCode::from(3);
        }
    }
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("quantlab: {}", f.msg);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(3),
    }
}

fn codebook_lines(c: &Codebook) -> String {
    c.codepoints()
        .map(|p| p.iter().map(f64::to_string).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Fit {
            dataset,
            k,
            restarts,
            max_iters,
            tol,
            empty_cell_policy,
        } => {
            let ds = read_dataset(dataset)?;
            let opts = LloydOptions {
                max_iters: *max_iters,
                tol: *tol,
                empty_cell_policy: *empty_cell_policy,
                ..LloydOptions::default()
            };
            let res = multi_start_erm(&ds, *k, *restarts, seed, &opts)?;
            println!("distortion = {}", res.final_distortion());
            println!("iterations = {}", res.iterations);
            println!("converged = {}", res.converged);
            println!("empty_cell_events = {}", res.empty_cell_events);
            println!("codebook:\n{}", codebook_lines(&res.codebook));
        }
        Command::ErmExact { dataset, k } => {
            let ds = read_dataset(dataset)?;
            let (c, d) = exact_erm(&ds, *k)?;
            println!("distortion = {d}");
            println!("codebook:\n{}", codebook_lines(&c));
        }
        Command::Diagnose { dataset, k, restarts, f } => {
            let ds = read_dataset(dataset)?;
            let erm = fitted_erm(&ds, *k, *restarts, seed)?;
            let f_values = if f.is_empty() {
                let counts = quantlab::partition(&ds, &erm)?.counts();
                let p_min = counts.iter().copied().min().unwrap_or(0) as f64 / ds.len() as f64;
                vec![(p_min * ds.len() as f64).sqrt()]
            } else {
                f.clone()
            };
            print!("{}", MarginDiagnostics::empirical(&ds, &erm, &f_values)?.to_report());
        }
        Command::Sample { n, k } => {
            let path = cli.config.as_deref().ok_or_else(|| usage("sample needs --config <model file>"))?;
            let spec = read_model_spec(path)?;
            let k = k.unwrap_or_else(|| default_k(&spec));
            let model = spec.build(k, *n, spec.seed().unwrap_or(seed))?;
            let sample = model.sample(*n, cli.seed.or(spec.seed()).unwrap_or(0))?;
            let ds = sample.dataset.with_labels(sample.latent_labels)?;
            match &cli.out {
                Some(p) => write_dataset(p, &ds)?,
                None => print!("{}", format_dataset(&ds)),
            }
            eprintln!("family = {}, dim = {}, n = {}", model.family(), model.dim(), n);
        }
        Command::Rate => study(cli, "rate", rate_study, Column::MeanExcessDistortion)?,
        Command::Classif => study(cli, "classif", classif_study, Column::MeanClassifRisk)?,
        Command::Clusterability => study(cli, "clusterability", clusterability_study, Column::ClusterableFraction)?,
        Command::Slope { csv_file, column } => {
            let text = std::fs::read_to_string(csv_file).map_err(|e| Error::Io {
                path: csv_file.clone(),
                source: e,
            })?;
            let fit = fit_loglog_slope(&parse_rate_csv(&text)?, *column)?;
            println!(
                "column = {}, slope = {:.6}, band = [{:.6}, {:.6}], rows = {}, excluded = {:?}",
                column.name(),
                fit.slope,
                fit.band.0,
                fit.band.1,
                fit.rows_used,
                fit.excluded
            );
        }
    }
    Ok(())
}

fn default_k(spec: &ModelSpec) -> usize {
    match spec {
        ModelSpec::Minimax { k, .. } => *k,
        ModelSpec::TruncatedGmm { params, .. } => params.k(),
        ModelSpec::Finite { .. } => 2,
    }
}

/// Exact ERM when enumeration is feasible, multi-start Lloyd otherwise.
fn fitted_erm(ds: &Dataset, k: usize, restarts: usize, seed: u64) -> Result<Codebook, Failure> {
    if ds.len() <= MAX_POINTS && k <= MAX_ERM_K {
        return Ok(exact_erm(ds, k)?.0);
    }
    Ok(multi_start_erm(ds, k, restarts, seed, &LloydOptions::default())?.codebook)
}

fn study(
    cli: &Cli,
    name: &str,
    body: fn(&ExperimentConfig) -> quantlab::Result<Vec<RateRow>>,
    column: Column,
) -> Result<(), Failure> {
    let path = cli.config.as_deref().ok_or_else(|| usage(format!("{name} needs --config <experiment file>")))?;
    let mut cfg = read_config(path)?;
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    let rows = body(&cfg)?;
    let csv = format_rate_csv(&rows);
    let csv_path = cli.out.as_deref().map(|d| d.join(format!("{name}.csv"))).or(cfg.csv.clone());
    match csv_path {
        Some(p) if cli.csv || cli.out.is_some() || cfg.csv.is_some() => write_text(&p, &csv)?,
        _ => print!("{csv}"),
    }
    if cli.svg || cfg.svg.is_some() {
        let svg_path = match (&cli.out, &cfg.svg) {
            (Some(d), _) => d.join(format!("{name}.svg")),
            (None, Some(p)) => p.clone(),
            (None, None) => PathBuf::from(format!("{name}.svg")),
        };
        write_text(&svg_path, &render_loglog_svg(&rows, column, &format!("{name}: {}", column.name())))?;
    }
    if let Ok(fit) = fit_loglog_slope(&rows, column) {
        eprintln!(
            "{}: slope {:.4} (95% band [{:.4}, {:.4}])",
            column.name(),
            fit.slope,
            fit.band.0,
            fit.band.1
        );
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}
