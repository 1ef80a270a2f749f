// Margin condition on a finite law and on a sample of it.
//
// ```text
// cargo run --example margin_diagnostics
// ```

use quantlab::distributions::DistributionModel;
use quantlab::lloyd::{multi_start_erm, LloydOptions};
use quantlab::margin::{margin_check, MarginDiagnostics, MassSource, R0_GRID};
use quantlab::oracle::{stationary_report, FiniteDistribution};
use quantlab::rng::rng_from;
use quantlab::Dataset;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let rows = vec![vec![-3.0, 0.0], vec![-2.0, 1.0], vec![2.0, 0.5], vec![3.0, -0.5], vec![0.0, 4.0]];
    let dist = FiniteDistribution::new(&rows, vec![0.25, 0.15, 0.25, 0.15, 0.2], None)?;
    let rep = stationary_report(&dist, 3)?;
    let pop = MarginDiagnostics::population(&dist, &rep)?;
    println!("population diagnostics:\n{}", pop.to_report());
    let chk = margin_check(MassSource::Population(&dist), &rep.optimal, pop.r0_max.max(1e-9), R0_GRID)?;
    println!("margin condition up to r0 = {:.4}: {}", pop.r0_max, chk.holds);

    let mut rng = rng_from(3);
    let mut sample = Vec::new();
    let mut x = vec![0.0; 2];
    for _ in 0..2000 {
        dist.draw(&mut rng, &mut x)?;
        sample.push(x.clone());
    }
    let ds = Dataset::from_rows(&sample, Some(dist.radius()))?;
    let erm = multi_start_erm(&ds, 3, 10, 1, &LloydOptions::default())?.codebook;
    let emp = MarginDiagnostics::empirical(&ds, &erm, &[1.0, 10.0, 40.0])?;
    println!("\nempirical diagnostics (n = 2000):\n{}", emp.to_report());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
