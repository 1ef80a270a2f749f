// Clusterability of samples and agreement between Lloyd and the ERM.
//
// ```text
// cargo run --release --example clusterability
// ```

use quantlab::distributions::parse_model_spec;
use quantlab::experiments::{clusterability_replicates, ExperimentConfig};
use quantlab::lloyd::{multi_start_erm, LloydOptions};
use quantlab::margin::{empirical_margin_implies_clusterable, f_clusterability_check};
use quantlab::Dataset;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Three tight groups of 1000 points around -10, 0 and 10.
    let values: Vec<f64> = (0..3000).map(|i| 10.0 * (i % 3) as f64 - 10.0 + (i / 3) as f64 / 1000.0 - 0.5).collect();
    let ds = Dataset::from_scalars(&values, None)?;
    let erm = multi_start_erm(&ds, 3, 10, 0, &LloydOptions::default())?.codebook;
    for f in [0.5, 2.0, 8.0] {
        let (premise, clusterable) = empirical_margin_implies_clusterable(&ds, &erm, f)?;
        assert_eq!(clusterable, f_clusterability_check(&ds, &erm, f)?);
        println!("f = {f}: empirical margin premise {premise}, clusterable {clusterable}");
    }

    let spec = parse_model_spec("family = finite\nsupport = 0; 1; 10; 11\nM = 11\n")?;
    let mut cfg = ExperimentConfig::new(spec, 2);
    cfg.n_grid = vec![256, 4096];
    cfg.replicates = 20;
    cfg.restarts = 5;
    for reps in clusterability_replicates(&cfg)? {
        let n = reps[0].n;
        let clusterable = reps.iter().filter(|r| r.clusterable).count();
        let eligible: Vec<_> = reps.iter().filter(|r| r.eligible()).collect();
        let worst = eligible.iter().map(|r| r.disagreement).fold(0.0, f64::max);
        println!(
            "n = {n}: {clusterable}/{} clusterable, {} eligible, max disagreement {worst}",
            reps.len(),
            eligible.len()
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
