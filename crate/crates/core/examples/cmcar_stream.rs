//! Streaming estimation under conditionally MCAR observations: each block's
//! probabilities depend on the running estimate from earlier blocks.

use std::sync::Arc;

use misscov::datagen::{build_covariance, SpectrumSpec};
use misscov::diagnostics::{bound_thm3, BoundConstants, CmcarBoundInputs};
use misscov::estimators::CmcarAccumulator;
use misscov::masks::{draw_cmcar_block, CmcarSchedule};
use misscov::matlin::{operator_norm, SymmetricMatrix};
use misscov::rng::derive_seed;

fn main() -> misscov::error::Result<()> {
    let n = 15;
    let model = build_covariance(&SpectrumSpec::geometric(n, 3.0, 9))?;
    let sigma = model.sigma();
    // Spend more observations on the variables with larger estimated variance.
    let rule = Arc::new(
        move |_t: usize, hist: Option<&SymmetricMatrix>| match hist {
            None => vec![1.0; n],
            Some(h) => {
                let d = h.diagonal();
                let top = d.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
                d.iter()
                    .map(|v| (0.2 + 0.8 * v.max(0.0) / top).min(1.0))
                    .collect()
            }
        },
    );
    let schedule = CmcarSchedule::new(n, 0.2, vec![10, 40], rule)?;

    let mut acc = CmcarAccumulator::new(n);
    let mut probs = Vec::new();
    for t in 1..=25 {
        let history = if t == 1 {
            None
        } else {
            Some(acc.current_estimate()?)
        };
        let block = draw_cmcar_block(
            &schedule,
            &model,
            t,
            history.as_ref(),
            derive_seed(42, &[t as u64]),
        )?;
        acc.ingest(&block.batch, &block.prob_matrix)?;
        probs.push((block.prob_matrix, block.batch.n_samples()));
        if t % 5 == 0 {
            let err = operator_norm(&acc.current_estimate()?.sub(sigma)?) / operator_norm(sigma);
            println!(
                "T = {t:>2}, N = {:>4}, relative error {err:.4}",
                acc.total_n()
            );
        }
    }
    let inputs = CmcarBoundInputs::from_blocks(sigma, probs.iter().map(|(p, k)| (p, *k)))?;
    let bound = bound_thm3(&inputs, sigma, &BoundConstants::default())?;
    println!(
        "bound (unit constants) / ||Sigma|| = {:.4}",
        bound.value / operator_norm(sigma)
    );
    Ok(())
}
