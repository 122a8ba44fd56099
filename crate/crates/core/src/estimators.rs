//! Covariance estimators for incomplete observations.
//!
//! All estimators work on an [`ObservationBatch`]: an `n x N` value matrix
//! `Y` whose columns are `y = delta (.) x`, together with the mask `Delta`.
//! Masked entries of `Y` are zero by construction, so second moments need no
//! mask lookups.
//!
//! | estimator | mean | observation probabilities |
//! |---|---|---|
//! | [`estimate_known_p`] | known | known `P` |
//! | [`estimate_unknown_p`] | known | empirical `P_hat` |
//! | [`CmcarAccumulator`] | known | known, time varying `P^(t)` |
//! | [`estimate_unknown_mean_known_p`] | unknown | known `P` |
//! | [`estimate_unknown_mean_unknown_p`] | unknown | empirical `P_hat` |

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::masks::{empirical_prob_matrix, MaskBatch};
use crate::matlin::{hadamard_inverse, masked_hadamard_inverse, ObservedPairSet, SymmetricMatrix};

/// Observed values `Y` with their mask `Delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    values: DMatrix<f64>,
    mask: MaskBatch,
    known_mean: Option<Vec<f64>>,
}

impl ObservationBatch {
    /// Applies `mask` to complete data `x` (`Y = Delta (.) X`).
    pub fn observe(x: &DMatrix<f64>, mask: MaskBatch) -> Result<Self> {
        Self::new(x.clone(), mask)
    }

    /// Takes ownership of `values`; entries where the mask is 0 are zeroed.
    pub fn new(mut values: DMatrix<f64>, mask: MaskBatch) -> Result<Self> {
        if values.shape() != (mask.dim(), mask.n_samples()) {
            return Err(Error::dims(
                format!("{}x{}", mask.dim(), mask.n_samples()),
                format!("{}x{}", values.nrows(), values.ncols()),
            ));
        }
        for (k, mut col) in values.column_iter_mut().enumerate() {
            for (v, &d) in col.iter_mut().zip(mask.column(k)) {
                if d == 0 {
                    *v = 0.0;
                } else if !v.is_finite() {
                    return Err(Error::InvalidInput("observed value is not finite".into()));
                }
            }
        }
        Ok(Self {
            values,
            mask,
            known_mean: None,
        })
    }

    /// Batch with every entry observed.
    pub fn complete(x: &DMatrix<f64>) -> Result<Self> {
        Self::new(x.clone(), MaskBatch::all_ones(x.nrows(), x.ncols()))
    }

    /// Population mean to center with; the estimators use `y - delta (.) mu`.
    pub fn with_known_mean(mut self, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::dims(self.dim(), mean.len()));
        }
        self.known_mean = Some(mean);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &MaskBatch {
        &self.mask
    }

    pub fn known_mean(&self) -> Option<&[f64]> {
        self.known_mean.as_deref()
    }

    /// Columns of several batches side by side (known means must agree).
    pub fn concat(batches: &[&ObservationBatch]) -> Result<Self> {
        let first = batches
            .first()
            .ok_or_else(|| Error::InvalidInput("no batches to concatenate".into()))?;
        let n = first.dim();
        let total: usize = batches.iter().map(|b| b.n_samples()).sum();
        let mut values = DMatrix::zeros(n, total);
        let mut offset = 0;
        for b in batches {
            if b.dim() != n || b.known_mean != first.known_mean {
                return Err(Error::InvalidInput("incompatible batches".into()));
            }
            values
                .columns_mut(offset, b.n_samples())
                .copy_from(&b.values);
            offset += b.n_samples();
        }
        let masks: Vec<&MaskBatch> = batches.iter().map(|b| &b.mask).collect();
        Ok(Self {
            values,
            mask: MaskBatch::concat(&masks)?,
            known_mean: first.known_mean.clone(),
        })
    }

    /// `y - delta (.) mu` for a known mean, `y` otherwise.
    fn centered(&self) -> DMatrix<f64> {
        let mut y = self.values.clone();
        if let Some(mu) = &self.known_mean {
            for (k, mut col) in y.column_iter_mut().enumerate() {
                for ((v, &d), m) in col.iter_mut().zip(self.mask.column(k)).zip(mu) {
                    if d == 1 {
                        *v -= m;
                    }
                }
            }
        }
        y
    }
}

/// How the complete-data sample covariance is centered.
#[derive(Debug, Clone, PartialEq)]
pub enum MeanMode {
    Zero,
    Known(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorTag {
    SampleCovariance,
    KnownP,
    UnknownP,
    Cmcar,
    PooledUnknownP,
    UnknownMeanKnownP,
    UnknownMeanUnknownP,
}

impl EstimatorTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SampleCovariance => "sample",
            Self::KnownP => "known_p",
            Self::UnknownP => "unknown_p",
            Self::Cmcar => "cmcar",
            Self::PooledUnknownP => "unknown_p_pooled",
            Self::UnknownMeanKnownP => "unknown_mean_known_p",
            Self::UnknownMeanUnknownP => "unknown_mean_unknown_p",
        }
    }
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An estimate together with the pairs it is defined on.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub sigma_hat: SymmetricMatrix,
    /// Entries outside this set are exactly zero.
    pub observed_pairs: ObservedPairSet,
    pub estimator: EstimatorTag,
    /// FNV-1a digest of the inputs (values, mask and probability matrix).
    pub digest: u64,
}

/// `S = (1/N) sum_k (x_k - mu)(x_k - mu)^T` on complete data.
pub fn sample_covariance(x: &DMatrix<f64>, mean: &MeanMode) -> Result<SymmetricMatrix> {
    let n_samples = x.ncols();
    if n_samples == 0 {
        return Err(Error::InsufficientSamples {
            required: 1,
            found: 0,
        });
    }
    let centered = match mean {
        MeanMode::Zero => x.clone(),
        MeanMode::Known(mu) => {
            if mu.len() != x.nrows() {
                return Err(Error::dims(x.nrows(), mu.len()));
            }
            let mut c = x.clone();
            for mut col in c.column_iter_mut() {
                for (v, m) in col.iter_mut().zip(mu) {
                    *v -= m;
                }
            }
            c
        }
    };
    SymmetricMatrix::from_upper(mean_outer(&centered))
}

/// Known observation probabilities: `(1/N) sum_k c_k c_k^T (.) Gamma` with
/// `c_k = y_k - delta_k (.) mu` and `Gamma` the Hadamard inverse of `P`.
/// Unbiased for `Sigma`.
pub fn estimate_known_p(batch: &ObservationBatch, p: &SymmetricMatrix) -> Result<EstimateReport> {
    check_prob_dim(batch, p)?;
    let gamma = hadamard_inverse(p)?;
    let m = mean_outer(&batch.centered());
    let sigma_hat = SymmetricMatrix::from_upper(m.component_mul(gamma.as_matrix()))?;
    Ok(EstimateReport {
        sigma_hat,
        observed_pairs: ObservedPairSet::full(batch.dim()),
        estimator: EstimatorTag::KnownP,
        digest: digest(batch, Some(p)),
    })
}

/// Unknown observation probabilities: the known-P form with `Gamma` replaced
/// by the Hadamard inverse of the empirical `P_hat` on its support `E`.
/// Conditionally on the mask it is unbiased for `Sigma_E`.
pub fn estimate_unknown_p(batch: &ObservationBatch) -> Result<EstimateReport> {
    let p_hat = empirical_prob_matrix(batch.mask())?;
    let (gamma_hat, support) = masked_hadamard_inverse(&p_hat, batch.n_samples())?;
    let m = mean_outer(&batch.centered());
    let sigma_hat = SymmetricMatrix::from_upper(m.component_mul(gamma_hat.as_matrix()))?;
    Ok(EstimateReport {
        sigma_hat,
        observed_pairs: support,
        estimator: EstimatorTag::UnknownP,
        digest: digest(batch, None),
    })
}

/// Unknown mean, known `P`:
/// `Ry (.) Gamma - (N ybar ybar^T - Ry) (.) gamma gamma^T / (N - 1)`,
/// `Ry = (1/N) sum_k y_k y_k^T`, `gamma = 1 / diag(P)`.
pub fn estimate_unknown_mean_known_p(
    batch: &ObservationBatch,
    p: &SymmetricMatrix,
) -> Result<EstimateReport> {
    check_prob_dim(batch, p)?;
    let n_samples = batch.n_samples();
    if n_samples < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            found: n_samples,
        });
    }
    let gamma = hadamard_inverse(p)?;
    let nf = n_samples as f64;
    let ry = mean_outer(batch.values());
    let ybar = batch.values().column_mean();
    let n = batch.dim();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let cross = nf * ybar[i] * ybar[j] - ry[(i, j)];
            let gg = gamma.get(i, i) * gamma.get(j, j);
            out[(i, j)] = ry[(i, j)] * gamma.get(i, j) - cross * gg / (nf - 1.0);
        }
    }
    Ok(EstimateReport {
        sigma_hat: SymmetricMatrix::from_upper(out)?,
        observed_pairs: ObservedPairSet::full(n),
        estimator: EstimatorTag::UnknownMeanKnownP,
        digest: digest(batch, Some(p)),
    })
}

/// Unknown mean, unknown `P`: `Ry (.) Gamma_hat - (N ybar ybar^T - Ry) (.) Psi`
/// where `Psi` is the Hadamard inverse of `Theta = N p_hat p_hat^T - P_hat`.
/// Fails if `Theta` vanishes on an observed pair.
pub fn estimate_unknown_mean_unknown_p(batch: &ObservationBatch) -> Result<EstimateReport> {
    let n_samples = batch.n_samples();
    if n_samples == 0 {
        return Err(Error::InsufficientSamples {
            required: 1,
            found: 0,
        });
    }
    let n = batch.dim();
    let nf = n_samples as f64;
    let counts = batch.mask().counts();
    let co = batch.mask().co_counts();
    let p_hat = empirical_prob_matrix(batch.mask())?;
    let (gamma_hat, support) = masked_hadamard_inverse(&p_hat, n_samples)?;
    let ry = mean_outer(batch.values());
    let ybar = batch.values().column_mean();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            if !support.contains(i, j) {
                continue;
            }
            let n_theta = theta_count(counts[i], counts[j], co[i * n + j]);
            if n_theta <= 0 {
                return Err(Error::NotIdentifiable { row: i, col: j });
            }
            let psi = nf / n_theta as f64;
            let cross = nf * ybar[i] * ybar[j] - ry[(i, j)];
            out[(i, j)] = ry[(i, j)] * gamma_hat.get(i, j) - cross * psi;
        }
    }
    Ok(EstimateReport {
        sigma_hat: SymmetricMatrix::from_upper(out)?,
        observed_pairs: support,
        estimator: EstimatorTag::UnknownMeanUnknownP,
        digest: digest(batch, None),
    })
}

/// `N theta_ij = (sum_k delta_i)(sum_k delta_j) - sum_k delta_i delta_j`.
#[inline]
pub fn theta_count(count_i: u64, count_j: u64, co_count: u64) -> i128 {
    count_i as i128 * count_j as i128 - co_count as i128
}

/// Pairs `(i, j)`, `i <= j`, on which `Theta` is not Hadamard invertible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThetaCheck {
    pub violations: Vec<(usize, usize)>,
}

impl ThetaCheck {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Invertibility of `Theta = N p_hat p_hat^T - P_hat` from mask counts.
///
/// Diagonal: needs at least one observation of `i` and `N theta_ii > 0`,
/// which amounts to two observations. Off-diagonal pairs pass under any of
/// the sufficient conditions (single disjoint observations of both; one
/// observation of one and two of the other) or by direct positivity.
pub fn theta_invertible(mask: &MaskBatch) -> ThetaCheck {
    let n = mask.dim();
    let c = mask.counts();
    let co = mask.co_counts();
    let mut violations = Vec::new();
    for i in 0..n {
        for j in i..n {
            let ok = if i == j {
                c[i] >= 1 && theta_count(c[i], c[i], co[i * n + i]) > 0
            } else {
                let (ci, cj, cij) = (c[i], c[j], co[i * n + j]);
                let disjoint_singletons = ci == 1 && cj == 1 && cij == 0;
                let one_two = (ci >= 1 && cj >= 2) || (ci >= 2 && cj >= 1);
                disjoint_singletons || one_two || theta_count(ci, cj, cij) > 0
            };
            if !ok {
                violations.push((i, j));
            }
        }
    }
    ThetaCheck { violations }
}

/// Streaming estimator for time-varying (CMCAR) observations:
/// `Sigma_hat_T = sum_t Z_t / sum_t N_t`, `Z_t = Y_t Y_t^T (.) Gamma_t`.
#[derive(Debug, Clone)]
pub struct CmcarAccumulator {
    n: usize,
    sum_z: DMatrix<f64>,
    total_n: usize,
    blocks: Vec<BlockLog>,
}

/// Per-block diagnostics kept by [`CmcarAccumulator`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLog {
    pub n_samples: usize,
    pub min_prob: f64,
    pub max_prob: f64,
}

impl CmcarAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            sum_z: DMatrix::zeros(n, n),
            total_n: 0,
            blocks: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn total_n(&self) -> usize {
        self.total_n
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[BlockLog] {
        &self.blocks
    }

    /// Running `sum_t Z_t`.
    pub fn sum_z(&self) -> Result<SymmetricMatrix> {
        SymmetricMatrix::from_upper(self.sum_z.clone())
    }

    /// Adds block `(Y_t, Delta_t)` observed with probabilities `p_t`.
    pub fn ingest(&mut self, batch: &ObservationBatch, p_t: &SymmetricMatrix) -> Result<()> {
        if batch.dim() != self.n {
            return Err(Error::dims(self.n, batch.dim()));
        }
        if batch.n_samples() == 0 {
            return Err(Error::InsufficientSamples {
                required: 1,
                found: 0,
            });
        }
        let z = block_statistic(batch, p_t)?;
        self.sum_z += z.as_matrix();
        self.total_n += batch.n_samples();
        let (min_prob, max_prob) = p_t
            .as_matrix()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        self.blocks.push(BlockLog {
            n_samples: batch.n_samples(),
            min_prob,
            max_prob,
        });
        Ok(())
    }

    /// Combines two accumulators over disjoint blocks.
    pub fn merge(&mut self, other: &CmcarAccumulator) -> Result<()> {
        if other.n != self.n {
            return Err(Error::dims(self.n, other.n));
        }
        self.sum_z += &other.sum_z;
        self.total_n += other.total_n;
        self.blocks.extend(other.blocks.iter().cloned());
        Ok(())
    }

    /// `sum_z / total_n`.
    pub fn current_estimate(&self) -> Result<SymmetricMatrix> {
        if self.total_n == 0 {
            return Err(Error::EmptyAccumulator);
        }
        SymmetricMatrix::from_upper(&self.sum_z / self.total_n as f64)
    }

    pub fn finalize(&self) -> Result<EstimateReport> {
        let sigma_hat = self.current_estimate()?;
        let mut h = Fnv::new();
        h.write_f64s(self.sum_z.as_slice());
        h.write(&(self.total_n as u64).to_le_bytes());
        Ok(EstimateReport {
            sigma_hat,
            observed_pairs: ObservedPairSet::full(self.n),
            estimator: EstimatorTag::Cmcar,
            digest: h.finish(),
        })
    }

    /// `W_T = sum_t Z_t - (sum_t N_t) Sigma`, a zero-mean matrix martingale.
    pub fn martingale(&self, sigma: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        if sigma.dim() != self.n {
            return Err(Error::dims(self.n, sigma.dim()));
        }
        SymmetricMatrix::from_upper(&self.sum_z - sigma.as_matrix() * self.total_n as f64)
    }
}

/// `Z_t = Y_t Y_t^T (.) Gamma_t` for one block (centered if the batch carries
/// a known mean).
pub fn block_statistic(batch: &ObservationBatch, p_t: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    check_prob_dim(batch, p_t)?;
    let gamma = hadamard_inverse(p_t)?;
    let g = outer_sum(&batch.centered());
    SymmetricMatrix::from_upper(g.component_mul(gamma.as_matrix()))
}

/// Streaming form of [`estimate_unknown_p`] over a growing pool of blocks.
#[derive(Debug, Clone)]
pub struct UnknownPAccumulator {
    n: usize,
    sum_yy: DMatrix<f64>,
    co_counts: Vec<u64>,
    total_n: usize,
}

impl UnknownPAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            sum_yy: DMatrix::zeros(n, n),
            co_counts: vec![0; n * n],
            total_n: 0,
        }
    }

    pub fn total_n(&self) -> usize {
        self.total_n
    }

    pub fn ingest(&mut self, batch: &ObservationBatch) -> Result<()> {
        if batch.dim() != self.n {
            return Err(Error::dims(self.n, batch.dim()));
        }
        self.sum_yy += outer_sum(&batch.centered());
        for (acc, c) in self.co_counts.iter_mut().zip(batch.mask().co_counts()) {
            *acc += c;
        }
        self.total_n += batch.n_samples();
        Ok(())
    }

    /// Empirical co-observation frequencies of the pooled masks.
    pub fn empirical_prob_matrix(&self) -> Result<SymmetricMatrix> {
        if self.total_n == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let n = self.n;
        let nf = self.total_n as f64;
        SymmetricMatrix::from_fn(n, |i, j| self.co_counts[i * n + j] as f64 / nf)
    }

    pub fn estimate(&self) -> Result<EstimateReport> {
        if self.total_n == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let n = self.n;
        let nf = self.total_n as f64;
        let support = ObservedPairSet::from_fn(n, |i, j| self.co_counts[i * n + j] > 0);
        let sigma_hat = SymmetricMatrix::from_fn(n, |i, j| {
            let c = self.co_counts[i * n + j];
            if c == 0 {
                0.0
            } else {
                (self.sum_yy[(i, j)] / nf) * (1.0 / (c as f64 / nf))
            }
        })?;
        Ok(EstimateReport {
            sigma_hat,
            observed_pairs: support,
            estimator: EstimatorTag::PooledUnknownP,
            digest: 0,
        })
    }
}

fn check_prob_dim(batch: &ObservationBatch, p: &SymmetricMatrix) -> Result<()> {
    if p.dim() != batch.dim() {
        return Err(Error::dims(batch.dim(), p.dim()));
    }
    Ok(())
}

/// Upper triangle of `sum_k v_k v_k^T` over the columns of `data`.
/// Lower triangle is left zero; callers mirror it.
fn outer_sum(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows();
    // rows of `data` become contiguous columns
    let t = data.transpose();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let cj = t.column(j);
        for i in 0..=j {
            out[(i, j)] = t.column(i).dot(&cj);
        }
    }
    out
}

/// Upper triangle of `(1/N) sum_k v_k v_k^T`.
fn mean_outer(data: &DMatrix<f64>) -> DMatrix<f64> {
    let nf = data.ncols() as f64;
    let mut out = outer_sum(data);
    for j in 0..out.ncols() {
        for i in 0..=j {
            out[(i, j)] /= nf;
        }
    }
    out
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
    fn write_f64s(&mut self, v: &[f64]) {
        for x in v {
            self.write(&x.to_bits().to_le_bytes());
        }
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

fn digest(batch: &ObservationBatch, p: Option<&SymmetricMatrix>) -> u64 {
    let mut h = Fnv::new();
    h.write_f64s(batch.values.as_slice());
    for col in batch.mask.columns() {
        h.write(col);
    }
    if let Some(mu) = &batch.known_mean {
        h.write_f64s(mu);
    }
    if let Some(p) = p {
        h.write_f64s(p.as_matrix().as_slice());
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_covariance, sample_gaussian, PopulationModel, SpectrumSpec};
    use crate::masks::{prob_matrix, sample_mask, MaskMechanism};

    fn centered_sample_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
        let nf = x.ncols() as f64;
        let mean = x.column_mean();
        let mut s = DMatrix::zeros(x.nrows(), x.nrows());
        for col in x.column_iter() {
            let d = col - &mean;
            s += &d * d.transpose();
        }
        s / (nf - 1.0)
    }

    #[test]
    fn sample_covariance_examples() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 3.0]);
        let s = sample_covariance(&x, &MeanMode::Zero).unwrap();
        assert_eq!(s, SymmetricMatrix::outer(&[1.0, -2.0, 3.0]).unwrap());

        let x = DMatrix::from_column_slice(2, 2, &[1.0, 2.0, -1.0, -2.0]);
        let s = sample_covariance(&x, &MeanMode::Zero).unwrap();
        assert_eq!(s, SymmetricMatrix::outer(&[1.0, 2.0]).unwrap());

        let shifted = DMatrix::from_column_slice(2, 2, &[2.0, 2.0, 0.0, -2.0]);
        let s = sample_covariance(&shifted, &MeanMode::Known(vec![1.0, 0.0])).unwrap();
        assert_eq!(s, SymmetricMatrix::outer(&[1.0, 2.0]).unwrap());
    }

    #[test]
    fn sample_covariance_converges() {
        let sigma = SymmetricMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let model = PopulationModel::new(sigma.clone()).unwrap();
        let x = sample_gaussian(&model, 100_000, 3);
        let s = sample_covariance(&x, &MeanMode::Zero).unwrap();
        let err = crate::matlin::operator_norm(&s.sub(&sigma).unwrap()) / 2.0;
        assert!(err <= 0.05, "{err}");
    }

    #[test]
    fn known_p_scalar_example() {
        let x = DMatrix::from_element(1, 1, 2.0);
        let batch = ObservationBatch::observe(&x, MaskBatch::all_ones(1, 1)).unwrap();
        let p = SymmetricMatrix::from_diagonal(&[0.5]).unwrap();
        let r = estimate_known_p(&batch, &p).unwrap();
        assert_eq!(r.sigma_hat.get(0, 0), 8.0);
        assert!(estimate_known_p(&batch, &SymmetricMatrix::zeros(1).unwrap()).is_err());
    }

    #[test]
    fn complete_data_reductions_are_exact() {
        let model = build_covariance(&SpectrumSpec::geometric(5, 2.5, 4)).unwrap();
        let x = sample_gaussian(&model, 40, 8);
        let batch = ObservationBatch::complete(&x).unwrap();
        let s = sample_covariance(&x, &MeanMode::Zero).unwrap();
        let ones = SymmetricMatrix::ones(5).unwrap();
        assert_eq!(estimate_known_p(&batch, &ones).unwrap().sigma_hat, s);
        assert_eq!(estimate_unknown_p(&batch).unwrap().sigma_hat, s);

        let c = centered_sample_cov(&x);
        let a = estimate_unknown_mean_known_p(&batch, &ones)
            .unwrap()
            .sigma_hat;
        let b = estimate_unknown_mean_unknown_p(&batch).unwrap().sigma_hat;
        assert!((a.as_matrix() - &c).amax() <= 1e-12);
        assert!((b.as_matrix() - &c).amax() <= 1e-12);
    }

    #[test]
    fn unknown_p_zero_outside_support() {
        // variables 0 and 2 never observed together
        let mask = MaskBatch::from_columns(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 0]]).unwrap();
        let x = DMatrix::from_column_slice(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let r = estimate_unknown_p(&ObservationBatch::observe(&x, mask).unwrap()).unwrap();
        assert!(!r.observed_pairs.contains(0, 2));
        assert_eq!(r.sigma_hat.get(0, 2), 0.0);
        // (0,0): observed in columns 0 and 2 -> (1 + 49)/2
        assert_eq!(r.sigma_hat.get(0, 0), 25.0);
        // (0,1): only column 0 -> 1*2
        assert_eq!(r.sigma_hat.get(0, 1), 2.0);
    }

    #[test]
    fn masked_values_are_zeroed() {
        let mask = MaskBatch::from_columns(&[vec![1, 0]]).unwrap();
        let x = DMatrix::from_column_slice(2, 1, &[3.0, f64::NAN]);
        let b = ObservationBatch::observe(&x, mask).unwrap();
        assert_eq!(b.values()[(1, 0)], 0.0);
    }

    #[test]
    fn unknown_mean_known_p_needs_two_samples() {
        let x = DMatrix::from_element(2, 1, 1.0);
        let b = ObservationBatch::complete(&x).unwrap();
        assert!(matches!(
            estimate_unknown_mean_known_p(&b, &SymmetricMatrix::ones(2).unwrap()),
            Err(Error::InsufficientSamples {
                required: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn unknown_mean_unknown_p_flags_unidentifiable_pair() {
        // variable 1 observed once -> theta_11 = 0 on an observed pair
        let mask = MaskBatch::from_columns(&[vec![1, 1], vec![1, 0], vec![1, 0]]).unwrap();
        let x = DMatrix::from_element(2, 3, 1.0);
        let b = ObservationBatch::observe(&x, mask).unwrap();
        assert!(matches!(
            estimate_unknown_mean_unknown_p(&b),
            Err(Error::NotIdentifiable { .. })
        ));
    }

    #[test]
    fn theta_examples() {
        let m = MaskBatch::from_columns(&[vec![1], vec![1]]).unwrap();
        assert!(theta_invertible(&m).is_ok());
        let m = MaskBatch::from_columns(&[vec![1, 0], vec![0, 1]]).unwrap();
        let chk = theta_invertible(&m);
        // off-diagonal fine, but each variable seen once
        assert!(!chk.violations.contains(&(0, 1)));
        assert_eq!(chk.violations, vec![(0, 0), (1, 1)]);
        let m = MaskBatch::from_columns(&[vec![1, 0], vec![1, 0]]).unwrap();
        assert!(theta_invertible(&m).violations.contains(&(1, 1)));
    }

    #[test]
    fn cmcar_examples() {
        let model = build_covariance(&SpectrumSpec::geometric(4, 2.0, 1)).unwrap();
        let x1 = sample_gaussian(&model, 12, 1);
        let x2 = sample_gaussian(&model, 7, 2);
        let ones = SymmetricMatrix::ones(4).unwrap();

        let b1 = ObservationBatch::complete(&x1).unwrap();
        let mut acc = CmcarAccumulator::new(4);
        acc.ingest(&b1, &ones).unwrap();
        let expect = sample_covariance(&x1, &MeanMode::Zero)
            .unwrap()
            .scale(12.0)
            .unwrap();
        assert!(acc.sum_z().unwrap().max_abs_diff(&expect) <= 1e-12);

        let mech = MaskMechanism::uniform_independent(4, 0.6).unwrap();
        let p = prob_matrix(&mech).unwrap();
        let b2 = ObservationBatch::observe(&x2, sample_mask(&mech, 7, 3)).unwrap();
        let mut fwd = CmcarAccumulator::new(4);
        fwd.ingest(&b1, &ones).unwrap();
        fwd.ingest(&b2, &p).unwrap();
        let mut rev = CmcarAccumulator::new(4);
        rev.ingest(&b2, &p).unwrap();
        rev.ingest(&b1, &ones).unwrap();
        assert_eq!(fwd.sum_z().unwrap(), rev.sum_z().unwrap());
        assert_eq!(fwd.total_n(), 19);

        let mut single = CmcarAccumulator::new(4);
        single.ingest(&b2, &p).unwrap();
        let known = estimate_known_p(&b2, &p).unwrap().sigma_hat;
        let fin = single.finalize().unwrap().sigma_hat;
        assert!(fin.max_abs_diff(&known) <= 1e-12 * known.max_abs().max(1.0));

        let mut merged = CmcarAccumulator::new(4);
        merged.ingest(&b1, &ones).unwrap();
        merged.merge(&single).unwrap();
        assert_eq!(merged.sum_z().unwrap(), fwd.sum_z().unwrap());

        assert!(matches!(
            CmcarAccumulator::new(3).finalize(),
            Err(Error::EmptyAccumulator)
        ));
        let bad = SymmetricMatrix::zeros(4).unwrap();
        assert!(single.clone().ingest(&b2, &bad).is_err());
    }

    #[test]
    fn pooled_accumulator_matches_batch_estimator() {
        let model = build_covariance(&SpectrumSpec::geometric(5, 2.0, 6)).unwrap();
        let mech = MaskMechanism::uniform_independent(5, 0.4).unwrap();
        let mut acc = UnknownPAccumulator::new(5);
        let mut batches = Vec::new();
        for s in 0..4 {
            let x = sample_gaussian(&model, 6 + s as usize, 10 + s);
            let b = ObservationBatch::observe(&x, sample_mask(&mech, x.ncols(), 20 + s)).unwrap();
            acc.ingest(&b).unwrap();
            batches.push(b);
        }
        let refs: Vec<&ObservationBatch> = batches.iter().collect();
        let pooled = ObservationBatch::concat(&refs).unwrap();
        let direct = estimate_unknown_p(&pooled).unwrap();
        let streamed = acc.estimate().unwrap();
        assert_eq!(direct.observed_pairs, streamed.observed_pairs);
        assert!(direct.sigma_hat.max_abs_diff(&streamed.sigma_hat) <= 1e-12);
    }

    #[test]
    fn outputs_are_symmetric() {
        let model = build_covariance(&SpectrumSpec::geometric(6, 3.0, 2)).unwrap();
        let mech = MaskMechanism::uniform_independent(6, 0.7).unwrap();
        let p = prob_matrix(&mech).unwrap();
        let x = sample_gaussian(&model, 30, 5);
        let b = ObservationBatch::observe(&x, sample_mask(&mech, 30, 6)).unwrap();
        for s in [
            estimate_known_p(&b, &p).unwrap().sigma_hat,
            estimate_unknown_p(&b).unwrap().sigma_hat,
            estimate_unknown_mean_known_p(&b, &p).unwrap().sigma_hat,
            estimate_unknown_mean_unknown_p(&b).unwrap().sigma_hat,
        ] {
            let m = s.as_matrix();
            assert!((m - m.transpose()).amax() <= 1e-12);
        }
    }
}
