//! Estimation when the observation probabilities are unknown: the
//! empirical co-observation frequencies replace P on the observed pairs.

use misscov::datagen::{build_covariance, sample_gaussian, SpectrumSpec};
use misscov::estimators::{estimate_known_p, estimate_unknown_p, ObservationBatch};
use misscov::masks::{empirical_prob_matrix, prob_matrix, sample_mask, MaskMechanism};
use misscov::matlin::operator_norm;

fn main() -> misscov::error::Result<()> {
    let (n, nn) = (30, 500);
    let model = build_covariance(&SpectrumSpec::geometric(n, 4.0, 3))?;
    let sigma = model.sigma();
    let mech = MaskMechanism::uniform_independent(n, 0.5)?;
    let p = prob_matrix(&mech)?;

    let x = sample_gaussian(&model, nn, 10);
    let batch = ObservationBatch::observe(&x, sample_mask(&mech, nn, 11))?;
    let p_hat = empirical_prob_matrix(batch.mask())?;
    println!("max |P_hat - P| = {:.4}", p_hat.max_abs_diff(&p));

    let known = estimate_known_p(&batch, &p)?;
    let unknown = estimate_unknown_p(&batch)?;
    let norm = operator_norm(sigma);
    for r in [&known, &unknown] {
        let err = operator_norm(&r.sigma_hat.sub(sigma)?) / norm;
        println!(
            "{:>10}: relative error {err:.4}, observed pairs {}",
            r.estimator.as_str(),
            r.observed_pairs.len()
        );
    }
    Ok(())
}
