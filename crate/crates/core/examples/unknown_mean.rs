//! Unbiased estimation with an unknown, nonzero mean, for known and
//! unknown observation probabilities.

use misscov::datagen::{build_covariance, sample_gaussian, SpectrumSpec};
use misscov::estimators::{
    estimate_unknown_mean_known_p, estimate_unknown_mean_unknown_p, theta_invertible,
    ObservationBatch,
};
use misscov::masks::{prob_matrix, sample_mask, MaskMechanism};
use misscov::matlin::operator_norm;

fn main() -> misscov::error::Result<()> {
    let (n, nn) = (10, 400);
    let mean: Vec<f64> = (0..n).map(|i| 5.0 - i as f64).collect();
    let model = build_covariance(&SpectrumSpec::geometric(n, 2.5, 5))?.with_mean(mean)?;
    let sigma = model.sigma();
    let mech = MaskMechanism::uniform_independent(n, 0.7)?;
    let p = prob_matrix(&mech)?;

    let batch =
        ObservationBatch::observe(&sample_gaussian(&model, nn, 1), sample_mask(&mech, nn, 2))?;
    let check = theta_invertible(batch.mask());
    println!("theta invertible on every pair: {}", check.is_ok());

    let norm = operator_norm(sigma);
    let known = estimate_unknown_mean_known_p(&batch, &p)?;
    let unknown = estimate_unknown_mean_unknown_p(&batch)?;
    for r in [&known, &unknown] {
        let err = operator_norm(&r.sigma_hat.sub(sigma)?) / norm;
        println!("{:>22}: relative error {err:.4}", r.estimator.as_str());
    }
    Ok(())
}
