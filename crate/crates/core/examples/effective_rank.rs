//! Effective rank and its missingness-scaled variants for a few spectra.

use misscov::datagen::{build_covariance, build_skewed_covariance, SpectrumSpec};
use misscov::diagnostics::{srank_2, srank_min};
use misscov::masks::{prob_matrix, MaskMechanism};
use misscov::matlin::erank;

fn main() -> misscov::error::Result<()> {
    let n = 50;
    let models = [
        (
            "geometric erank 2",
            build_covariance(&SpectrumSpec::geometric(n, 2.0, 1))?,
        ),
        (
            "geometric erank 10",
            build_covariance(&SpectrumSpec::geometric(n, 10.0, 1))?,
        ),
        ("skewed", build_skewed_covariance(n, 1)?),
    ];
    println!(
        "{:<20} {:>8} {:>6} {:>10} {:>10}",
        "spectrum", "erank", "p", "srank_min", "srank_2"
    );
    for (name, model) in &models {
        let r = erank(model.sigma())?;
        for p in [1.0, 0.8, 0.5] {
            let pm = prob_matrix(&MaskMechanism::uniform_independent(n, p)?)?;
            println!(
                "{name:<20} {r:>8.3} {p:>6} {:>10.3} {:>10.3}",
                srank_min(model.sigma(), &pm)?,
                srank_2(model.sigma(), &pm)?
            );
        }
    }
    Ok(())
}
