// Lloyd's algorithm from a k-means++ seed on three well separated blobs.
//
// ```text
// cargo run --example lloyd_basics
// ```

use quantlab::lloyd::{kmeanspp_init, multi_start_erm, run_lloyd, LloydOptions};
use quantlab::quantization::centroid_residual;
use quantlab::rng::rng_from;
use quantlab::{partition, Dataset};
use rand::Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rng_from(42);
    let centres = [[-6.0, 0.0], [0.0, 5.0], [6.0, 0.0]];
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|i| {
            let c = centres[i % 3];
            vec![c[0] + rng.gen_range(-1.0..1.0), c[1] + rng.gen_range(-1.0..1.0)]
        })
        .collect();
    let ds = Dataset::from_rows(&rows, None)?;

    let init = kmeanspp_init(&ds, 3, 7)?;
    let run = run_lloyd(&ds, &init, &LloydOptions::default())?;
    println!("single run: {} iterations, converged = {}", run.iterations, run.converged);
    println!("distortion trace: {:?}", run.distortion_trace);
    assert!(run.distortion_trace.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(centroid_residual(&ds, &run.codebook)?, 0.0);

    let best = multi_start_erm(&ds, 3, 10, 7, &LloydOptions::default())?;
    println!("best of 10 restarts: {:.6}", best.final_distortion());
    for (j, (c, n)) in best.codebook.codepoints().zip(partition(&ds, &best.codebook)?.counts()).enumerate() {
        println!("  cell {j}: ({:.3}, {:.3}) with {n} points", c[0], c[1]);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
