// Brute-force oracles: exact ERM, the stationary set and its separation.
//
// ```text
// cargo run --example exact_oracle
// ```

use quantlab::oracle::{exact_erm, stationary_report, FiniteDistribution};
use quantlab::Dataset;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ds = Dataset::from_scalars(&[0.0, 1.0, 10.0, 11.0], None)?;
    let (c, d) = exact_erm(&ds, 2)?;
    println!("exact ERM of {{0, 1, 10, 11}}: {:?}, distortion {d}", c.as_flat());
    assert_eq!(d, 0.25);

    // A law with several stationary codebooks of different quality.
    let dist = FiniteDistribution::uniform_scalars(&[0.0, 0.1, 5.0, 5.1, 10.0, 10.3], None)?;
    let rep = stationary_report(&dist, 2)?;
    println!("stationary codebooks (k = 2):");
    for (c, r) in rep.stationary.iter().zip(&rep.distortions) {
        let tag = if rep.optimal.contains(c) { "optimal" } else { "" };
        println!("  {:?}  R = {r:.5} {tag}", c.as_flat());
    }
    println!("eps = {:.5}, B = {:.4}, p_min = {:.4}, R* = {:.5}", rep.epsilon, rep.b, rep.p_min, rep.r_star);
    println!(
        "counting codebooks with an empty cell: eps = {:.5}",
        rep.separation_with_degenerate()
    );
    println!("eps <= B^2/4: {}", rep.epsilon_bound_holds());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
