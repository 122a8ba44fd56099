//! Earlier uniform-MCAR bounds side by side; the first-term ratio is n / p^{3/4}.

use misscov::datagen::{build_covariance, SpectrumSpec};
use misscov::diagnostics::{bound_lounici, bound_park, bound_thm1, BoundConstants};
use misscov::masks::{prob_matrix, MaskMechanism};

fn main() -> misscov::error::Result<()> {
    let (n, nn) = (40, 10_000);
    let model = build_covariance(&SpectrumSpec::geometric(n, 3.0, 4))?;
    let sigma = model.sigma();
    let c = BoundConstants::default();
    let nu = (2.0 * n as f64).ln();
    println!(
        "{:>5} {:>12} {:>12} {:>12} {:>10}",
        "p", "known-P", "lounici", "park", "ratio"
    );
    for p in [0.2, 0.5, 0.9] {
        let pm = prob_matrix(&MaskMechanism::uniform_independent(n, p)?)?;
        let ours = bound_thm1(sigma, &pm, nn, &c)?;
        let l = bound_lounici(sigma, p, nn, nu, &c)?;
        let q = bound_park(sigma, p, nn, nu, &c)?;
        println!(
            "{p:>5} {:>12.4} {:>12.4} {:>12.4} {:>10.2}",
            ours.value,
            l.value,
            q.value,
            q.first_term / l.first_term
        );
    }
    Ok(())
}
