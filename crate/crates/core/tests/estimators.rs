use nalgebra::DMatrix;

use misscov::datagen::{build_covariance, sample_gaussian, PopulationModel, SpectrumSpec};
use misscov::diagnostics::{entrywise_error_oracle, OracleMode};
use misscov::estimators::{estimate_unknown_mean_known_p, estimate_unknown_p, ObservationBatch};
use misscov::harness::experiments::plugin_mean_estimate;
use misscov::masks::{empirical_prob_matrix, prob_matrix, sample_mask, MaskMechanism};
use misscov::matlin::SymmetricMatrix;
use misscov::rng::derive_seed;

/// Largest `|mean - target| / se` over the entries of a sequence of matrices.
fn max_z(samples: &[DMatrix<f64>], target: &DMatrix<f64>) -> f64 {
    let k = samples.len() as f64;
    let mut worst: f64 = 0.0;
    for idx in 0..target.len() {
        let mean = samples.iter().map(|m| m[idx]).sum::<f64>() / k;
        let var = samples.iter().map(|m| (m[idx] - mean).powi(2)).sum::<f64>() / (k - 1.0);
        let se = (var / k).sqrt();
        let dev = (mean - target[idx]).abs();
        worst = worst.max(if se > 0.0 {
            dev / se
        } else if dev > 0.0 {
            f64::INFINITY
        } else {
            0.0
        });
    }
    worst
}

fn shifted_model() -> (PopulationModel, DMatrix<f64>, DMatrix<f64>) {
    let mu = vec![1.5, -1.0, 0.5];
    let model = build_covariance(&SpectrumSpec::geometric(3, 2.0, 31))
        .unwrap()
        .with_mean(mu.clone())
        .unwrap();
    let sigma = model.sigma().as_matrix().clone();
    let mu = DMatrix::from_column_slice(3, 1, &mu);
    (model, sigma, mu)
}

#[test]
fn second_moments_of_masked_data_with_fixed_mask() {
    let (model, sigma, mu) = shifted_model();
    let nn = 12;
    let mech = MaskMechanism::independent(vec![0.5, 0.7, 0.9]).unwrap();
    let mask = sample_mask(&mech, nn, 1);
    let p_hat = empirical_prob_matrix(&mask).unwrap().into_matrix();
    let counts = DMatrix::from_iterator(3, 1, mask.counts().iter().map(|&c| c as f64));
    let mu_mu = &mu * mu.transpose();
    let ry_target = p_hat.component_mul(&(&sigma + &mu_mu));
    let ybar_target = p_hat.component_mul(&sigma)
        + (&counts * counts.transpose() / nn as f64).component_mul(&mu_mu);

    let mut ry = Vec::new();
    let mut ybar = Vec::new();
    for r in 0..20_000u64 {
        let x = sample_gaussian(&model, nn, derive_seed(5, &[r]));
        let y = ObservationBatch::observe(&x, mask.clone())
            .unwrap()
            .values()
            .clone();
        ry.push(&y * y.transpose() / nn as f64);
        let sum = y.column_sum();
        ybar.push(&sum * sum.transpose() / nn as f64);
    }
    assert!(max_z(&ry, &ry_target) <= 4.0);
    assert!(max_z(&ybar, &ybar_target) <= 4.0);
}

#[test]
fn unknown_p_entrywise_error_matches_closed_form() {
    let sigma =
        SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, -0.4, -0.4, 0.8])).unwrap();
    let model = PopulationModel::new(sigma.clone()).unwrap();
    let mech = MaskMechanism::uniform_independent(2, 0.5).unwrap();
    let p = prob_matrix(&mech).unwrap();
    let (nn, trials) = (20, 50_000u64);
    let mut sq = [0.0f64; 3];
    let pairs = [(0, 0), (0, 1), (1, 1)];
    for r in 0..trials {
        let x = sample_gaussian(&model, nn, derive_seed(6, &[r, 0]));
        let b =
            ObservationBatch::observe(&x, sample_mask(&mech, nn, derive_seed(6, &[r, 1]))).unwrap();
        let s = estimate_unknown_p(&b).unwrap().sigma_hat;
        for (e, &(i, j)) in pairs.iter().enumerate() {
            sq[e] += (s.get(i, j) - sigma.get(i, j)).powi(2);
        }
    }
    for (e, &(i, j)) in pairs.iter().enumerate() {
        let oracle = entrywise_error_oracle(&sigma, &p, nn, (i, j), OracleMode::UnknownP).unwrap();
        let mse = sq[e] / trials as f64;
        assert!(
            (mse - oracle).abs() <= 0.05 * oracle,
            "({i},{j}): {mse} vs {oracle}"
        );
    }
}

#[test]
fn plugin_mean_is_biased_where_the_unknown_mean_estimator_is_not() {
    let (model, sigma, _) = shifted_model();
    let nn = 6;
    let mech = MaskMechanism::uniform_independent(3, 0.8).unwrap();
    let p = prob_matrix(&mech).unwrap();
    let mut plugin = Vec::new();
    let mut unbiased = Vec::new();
    for r in 0..20_000u64 {
        let x = sample_gaussian(&model, nn, derive_seed(7, &[r, 0]));
        let b =
            ObservationBatch::observe(&x, sample_mask(&mech, nn, derive_seed(7, &[r, 1]))).unwrap();
        plugin.push(plugin_mean_estimate(&b, &p).unwrap().into_matrix());
        unbiased.push(
            estimate_unknown_mean_known_p(&b, &p)
                .unwrap()
                .sigma_hat
                .into_matrix(),
        );
    }
    assert!(max_z(&unbiased, &sigma) <= 4.0);
    assert!(max_z(&plugin, &sigma) >= 8.0);
}
