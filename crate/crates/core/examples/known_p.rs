//! Unbiased covariance estimate from MCAR data with known observation
//! probabilities, compared with the naive zero-filled sample covariance.

use misscov::datagen::{build_covariance, sample_gaussian, SpectrumSpec};
use misscov::estimators::{estimate_known_p, sample_covariance, MeanMode, ObservationBatch};
use misscov::masks::{prob_matrix, sample_mask, MaskMechanism};
use misscov::matlin::{operator_norm, SymmetricMatrix};

fn main() -> misscov::error::Result<()> {
    let (n, nn) = (20, 2000);
    let model = build_covariance(&SpectrumSpec::geometric(n, 3.0, 7))?;
    let sigma = model.sigma();
    let x = sample_gaussian(&model, nn, 1);

    let mech =
        MaskMechanism::independent((0..n).map(|i| 0.4 + 0.5 * i as f64 / n as f64).collect())?;
    let p = prob_matrix(&mech)?;
    let batch = ObservationBatch::observe(&x, sample_mask(&mech, nn, 2))?;

    let report = estimate_known_p(&batch, &p)?;
    let naive = sample_covariance(batch.values(), &MeanMode::Zero)?;
    let rel = |s: &SymmetricMatrix| operator_norm(&s.sub(sigma).unwrap()) / operator_norm(sigma);

    println!(
        "n = {n}, N = {nn}, estimator = {}",
        report.estimator.as_str()
    );
    println!(
        "relative error, known-P estimator: {:.4}",
        rel(&report.sigma_hat)
    );
    println!(
        "relative error, zero-filled sample covariance: {:.4}",
        rel(&naive)
    );
    println!("digest: {:016x}", report.digest);
    Ok(())
}
