// Misclassification between partitions, empirical and population.
//
// ```text
// cargo run --example classification_risk
// ```

use quantlab::classification::{classif_risk_empirical, classif_risk_population, Reference};
use quantlab::distributions::Model;
use quantlab::oracle::FiniteDistribution;
use quantlab::{Assignment, Codebook};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Same partition under swapped labels, then one point moved.
    let a = Assignment::new(vec![0, 0, 1, 1, 2, 2], 3)?;
    let b = Assignment::new(vec![2, 2, 0, 0, 1, 1], 3)?;
    let c = Assignment::new(vec![2, 0, 0, 0, 1, 1], 3)?;
    println!("relabeled partition: risk {}", classif_risk_empirical(&a, &b, 3)?.value);
    let moved = classif_risk_empirical(&a, &c, 3)?;
    println!("one point moved: risk {:.4}, matching {:?}", moved.value, moved.matching);

    // Exact population risk of a shifted codebook on a finite law.
    let dist = FiniteDistribution::uniform_scalars(&[0.0, 1.0, 2.0, 10.0, 11.0], None)?;
    let model = Model::finite(dist, 2);
    for c2 in [10.5, 6.0, 3.0, 1.0] {
        let cb = Codebook::from_scalars(&[0.0, c2])?;
        let r = classif_risk_population(&model, &cb, Reference::OptimalCodebook, 0, 0)?;
        println!("codebook (0, {c2:.1}): population risk {:.3}", r.value);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
