//! Error bounds for the known-P and unknown-P estimators and the sample
//! size needed for a target relative accuracy.

use misscov::datagen::{build_covariance, SpectrumSpec};
use misscov::diagnostics::{bound_thm1, bound_thm2, sample_complexity_mcar, BoundConstants};
use misscov::masks::{empirical_prob_matrix, prob_matrix, sample_mask, MaskMechanism};
use misscov::matlin::{masked_hadamard_inverse, operator_norm};

fn main() -> misscov::error::Result<()> {
    let n = 50;
    let model = build_covariance(&SpectrumSpec::geometric(n, 4.0, 2))?;
    let sigma = model.sigma();
    let norm = operator_norm(sigma);
    let c = BoundConstants::default();
    let mech = MaskMechanism::uniform_independent(n, 0.6)?;
    let p = prob_matrix(&mech)?;

    println!("{:>8} {:>12} {:>12}", "N", "known P", "P_hat");
    for nn in [100, 1000, 10_000, 100_000] {
        let b1 = bound_thm1(sigma, &p, nn, &c)?;
        let mask = sample_mask(&mech, nn, nn as u64);
        let (_, support) = masked_hadamard_inverse(&empirical_prob_matrix(&mask)?, nn)?;
        let b2 = bound_thm2(sigma, &empirical_prob_matrix(&mask)?, &support, nn, &c)?;
        println!(
            "{nn:>8} {:>12.4} {:>12.4}",
            b1.value / norm,
            b2.value / norm
        );
        for w in &b1.warnings {
            println!("         warning: {w:?}");
        }
    }
    for eps in [0.5, 0.05, 0.01] {
        let sc = sample_complexity_mcar(sigma, &p, eps, &c)?;
        println!(
            "eps = {eps}: N >= {} ({} iterations)",
            sc.n_samples, sc.iterations
        );
    }
    Ok(())
}
