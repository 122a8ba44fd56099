//! Built-in and custom missingness mechanisms with their probability matrices.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use misscov::masks::{
    empirical_prob_matrix, prob_matrix, sample_mask, CustomMechanism, MaskMechanism,
};
use misscov::matlin::SymmetricMatrix;

/// Sensors wired in pairs: both coordinates of a pair are observed together
/// with probability `q`, pairs independently.
#[derive(Debug)]
struct PairedSensors {
    pairs: usize,
    q: f64,
}

impl CustomMechanism for PairedSensors {
    fn dim(&self) -> usize {
        2 * self.pairs
    }

    fn sample_column(&self, rng: &mut ChaCha8Rng, out: &mut [u8]) {
        for k in 0..self.pairs {
            let on = rng.random_bool(self.q) as u8;
            out[2 * k] = on;
            out[2 * k + 1] = on;
        }
    }

    fn prob_matrix(&self) -> Option<SymmetricMatrix> {
        let q = self.q;
        SymmetricMatrix::from_fn(self.dim(), |i, j| if i / 2 == j / 2 { q } else { q * q }).ok()
    }

    fn name(&self) -> &str {
        "paired_sensors"
    }
}

fn show(name: &str, mech: &MaskMechanism) -> misscov::error::Result<()> {
    let p = prob_matrix(mech)?;
    let mask = sample_mask(mech, 20_000, 3);
    let p_hat = empirical_prob_matrix(&mask)?;
    println!(
        "{name}: P[0,0] = {:.3}, P[0,1] = {:.3}, max |P_hat - P| = {:.4}",
        p.get(0, 0),
        p.get(0, 1),
        p_hat.max_abs_diff(&p)
    );
    Ok(())
}

fn main() -> misscov::error::Result<()> {
    show(
        "uniform independent p=0.5",
        &MaskMechanism::uniform_independent(6, 0.5)?,
    )?;
    show(
        "independent p_i",
        &MaskMechanism::independent(vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.4])?,
    )?;
    show(
        "uniform 3-of-6 subset",
        &MaskMechanism::uniform_subset(6, 3)?,
    )?;
    for m in [1, 2] {
        let p = prob_matrix(&MaskMechanism::uniform_subset(4, m)?)?;
        println!("subset m={m}: off-diagonal probability {:.4}", p.get(0, 1));
    }
    show(
        "custom paired sensors",
        &MaskMechanism::Custom(Arc::new(PairedSensors { pairs: 3, q: 0.6 })),
    )?;
    Ok(())
}
