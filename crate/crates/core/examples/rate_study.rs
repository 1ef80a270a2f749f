// A small excess-distortion rate study on the four-point law, with its
// log-log slope.
//
// ```text
// cargo run --release --example rate_study
// ```

use quantlab::distributions::parse_model_spec;
use quantlab::experiments::{fit_loglog_slope, format_rate_csv, rate_study, Column, ExperimentConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = parse_model_spec("family = finite\nsupport = 0; 1; 10; 11\nM = 11\n")?;
    let mut cfg = ExperimentConfig::new(spec, 2);
    cfg.n_grid = vec![64, 128, 256, 512];
    cfg.replicates = 40;
    cfg.restarts = 5;
    cfg.base_seed = 9;
    let rows = rate_study(&cfg)?;
    print!("{}", format_rate_csv(&rows));
    let fit = fit_loglog_slope(&rows, Column::MeanExcessDistortion)?;
    println!("slope {:.3}, 95% band [{:.3}, {:.3}]", fit.slope, fit.band.0, fit.band.1);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
