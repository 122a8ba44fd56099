//! One-shot calibration of the bound constants against simulated errors.

use super::dataset::{Record, TrialLabel};
use crate::diagnostics::BoundConstants;
use crate::error::{Error, Result};

/// Result of [`calibrate_constants`].
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub constants: BoundConstants,
    /// Factor applied to `c` (at least 1).
    pub scale_c: f64,
    /// Factor applied to `c_tilde` (at least 1).
    pub scale_c_tilde: f64,
    /// Reference points used: `(rms error, bound)` pairs.
    pub points: usize,
}

/// The bound a row is compared against: the complete-data/known-P bound for
/// `sample` and `known_p`, the conditional bound for the unknown-P
/// estimators and the CMCAR bound for `cmcar`.
pub fn reference_bound(r: &Record) -> Option<(f64, bool)> {
    match r.estimator.as_str() {
        "sample" | "known_p" => r.bound_thm1.map(|b| (b, false)),
        "unknown_p" | "unknown_p_pooled" => r.bound_thm2.map(|b| (b, false)),
        "cmcar" => r.bound_thm3.map(|b| (b, true)),
        _ => None,
    }
}

/// Smallest uniform rescaling of the constants (never below the current
/// values) such that every `rms` row's bound is at least its error.
/// Bounds in `records` are taken to be evaluated with `base`.
pub fn calibrate_constants(records: &[Record], base: &BoundConstants) -> Result<Calibration> {
    let mut ratio_c: f64 = 0.0;
    let mut ratio_tilde: f64 = 0.0;
    let mut points = 0;
    for r in records.iter().filter(|r| r.trial == TrialLabel::Rms) {
        let Some((bound, tilde)) = reference_bound(r) else {
            continue;
        };
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::Calibration(format!(
                "non-positive bound at N={} {}",
                r.n_samples, r.estimator
            )));
        }
        let ratio = r.rel_op_error / bound;
        if tilde {
            ratio_tilde = ratio_tilde.max(ratio);
        } else {
            ratio_c = ratio_c.max(ratio);
        }
        points += 1;
    }
    if points == 0 {
        return Err(Error::Calibration(
            "no rms rows with bounds in dataset".into(),
        ));
    }
    let scale_c = ratio_c.max(1.0);
    let scale_c_tilde = ratio_tilde.max(1.0);
    Ok(Calibration {
        constants: BoundConstants {
            c: base.c * scale_c,
            c_tilde: base.c_tilde * scale_c_tilde,
            ..*base
        },
        scale_c,
        scale_c_tilde,
        points,
    })
}
