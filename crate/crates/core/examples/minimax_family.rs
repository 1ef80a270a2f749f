// The tilted-segment family: exact distortions and the gap between two
// sign vectors, checked against Monte Carlo.
//
// ```text
// cargo run --release --example minimax_family
// ```

use quantlab::distributions::{minimax_exact_distortion, minimax_true_gap, Minimax, MinimaxParams, SignVector};
use quantlab::quantization::monte_carlo_distortion;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let sigma = SignVector::new(vec![1, -1, 1, 1])?;
    let tau = SignVector::new(vec![-1, -1, 1, -1])?;
    let params = MinimaxParams::new(4, 2, 1.0, sigma.clone(), 0.4)?;
    let model = Minimax::new(params.clone())?;
    println!("rho = {:.5}, Delta = {:.5}", params.rho(), params.big_delta());
    println!("R* = {:.8}", params.optimal_distortion());

    let c_tau = model.codebook_for(&tau)?;
    let exact = minimax_exact_distortion(&params, &c_tau)?;
    let mc = monte_carlo_distortion(&model, &c_tau, 200_000, 11)?;
    println!("R(c_tau) exact {exact:.8}, Monte Carlo {:.8} +- {:.1e}", mc.value, mc.std_error);
    println!(
        "gap R(c_tau) - R(c_sigma) = {:.3e} over Hamming distance {}",
        minimax_true_gap(&sigma, &tau, &params)?,
        sigma.hamming(&tau)?
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
