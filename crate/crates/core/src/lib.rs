//! Unbiased covariance estimation from incomplete observations.
//!
//! Data are Gaussian vectors observed through binary masks. The estimators
//! correct the zero-filled second moments by the inverse observation
//! probabilities, known (`estimate_known_p`) or estimated from the masks
//! (`estimate_unknown_p`), with variants for an unknown mean and a streaming
//! estimator for masks whose probabilities depend on earlier estimates
//! (`CmcarAccumulator`). `diagnostics` provides effective ranks and error
//! bounds, and `harness` the seeded Monte Carlo experiments behind the
//! `misscov` command.
//!
//! ```
//! use misscov::datagen::{build_covariance, sample_gaussian, SpectrumSpec};
//! use misscov::estimators::{estimate_known_p, ObservationBatch};
//! use misscov::masks::{prob_matrix, sample_mask, MaskMechanism};
//!
//! let model = build_covariance(&SpectrumSpec::geometric(10, 2.0, 1)).unwrap();
//! let mech = MaskMechanism::uniform_independent(10, 0.7).unwrap();
//! let x = sample_gaussian(&model, 500, 2);
//! let batch = ObservationBatch::observe(&x, sample_mask(&mech, 500, 3)).unwrap();
//! let est = estimate_known_p(&batch, &prob_matrix(&mech).unwrap()).unwrap();
//! assert_eq!(est.sigma_hat.dim(), 10);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod masks;
pub mod matlin;
pub mod rng;

pub use error::{Error, Result};
pub use estimators::{
    estimate_known_p, estimate_unknown_mean_known_p, estimate_unknown_mean_unknown_p,
    estimate_unknown_p, CmcarAccumulator, EstimateReport, ObservationBatch,
};
pub use matlin::SymmetricMatrix;
