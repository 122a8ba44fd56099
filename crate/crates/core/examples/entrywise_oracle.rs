//! Closed-form entrywise mean squared error against a small simulation.

use misscov::datagen::{sample_gaussian, PopulationModel};
use misscov::diagnostics::{entrywise_error_oracle, OracleMode};
use misscov::estimators::{estimate_known_p, estimate_unknown_p, ObservationBatch};
use misscov::masks::{prob_matrix, sample_mask, MaskMechanism};
use misscov::matlin::SymmetricMatrix;
use misscov::rng::derive_seed;

fn main() -> misscov::error::Result<()> {
    let sigma = SymmetricMatrix::new(nalgebra::DMatrix::from_row_slice(
        2,
        2,
        &[1.0, 0.6, 0.6, 1.5],
    ))?;
    let model = PopulationModel::new(sigma.clone())?;
    let mech = MaskMechanism::uniform_independent(2, 0.5)?;
    let p = prob_matrix(&mech)?;
    let (nn, trials) = (30, 20_000);
    let mut sq = [0.0; 2];
    for r in 0..trials {
        let x = sample_gaussian(&model, nn, derive_seed(1, &[r, 0]));
        let b = ObservationBatch::observe(&x, sample_mask(&mech, nn, derive_seed(1, &[r, 1])))?;
        sq[0] += (estimate_known_p(&b, &p)?.sigma_hat.get(0, 1) - 0.6).powi(2);
        sq[1] += (estimate_unknown_p(&b)?.sigma_hat.get(0, 1) - 0.6).powi(2);
    }
    for (k, mode) in [OracleMode::KnownP, OracleMode::UnknownP]
        .into_iter()
        .enumerate()
    {
        let oracle = entrywise_error_oracle(&sigma, &p, nn, (0, 1), mode)?;
        println!(
            "{mode:?}: simulated {:.5}, closed form {oracle:.5}",
            sq[k] / trials as f64
        );
    }
    Ok(())
}
