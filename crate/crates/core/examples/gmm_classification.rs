// Truncated Gaussian mixture: sampling, then the population
// misclassification of the k-means codebook as n grows.
//
// ```text
// cargo run --release --example gmm_classification
// ```

use quantlab::classification::{classif_risk_population, Reference};
use quantlab::distributions::{Model, TruncatedGmm, TruncatedGmmParams};
use quantlab::lloyd::{multi_start_erm, LloydOptions};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = TruncatedGmmParams::symmetric(vec![vec![-2.0, 0.0], vec![2.0, 0.0]], 0.5, 8.0)?;
    let gmm = TruncatedGmm::new(params)?;
    println!("B~ = {}, sigma = {}", gmm.b_tilde(), gmm.sigma());
    let model = Model::TruncatedGmm(gmm);
    for (i, n) in [100usize, 1000, 10_000].into_iter().enumerate() {
        let sample = model.sample(n, 100 + i as u64)?;
        let fit = multi_start_erm(&sample.dataset, 2, 5, 1, &LloydOptions::default())?;
        let risk = classif_risk_population(&model, &fit.codebook, Reference::BayesMeans, 100_000, 5)?;
        println!(
            "n = {n:>5}: codebook {:?}, misclassification {:.3e} (s.e. {:.1e})",
            fit.codebook.as_flat().iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            risk.value,
            risk.std_error
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
