//! Scaled effective ranks, error-bound evaluators and entry-wise error oracles.
//!
//! `log` is the natural logarithm throughout. The universal constants of the
//! bounds have no known values; [`BoundConstants`] defaults them to 1 and the
//! harness can calibrate them against simulated errors.

use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};
use crate::matlin::{erank, operator_norm, ObservedPairSet, SymmetricMatrix};

const E: f64 = std::f64::consts::E;

/// Multiplicative constants of the bounds.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundConstants {
    /// Known- and unknown-P MCAR bounds (also the comparison bounds).
    pub c: f64,
    /// CMCAR bound.
    pub c_tilde: f64,
    /// `C_1` of the comparison bounds.
    pub c1: f64,
    /// `C_2` of the sample-complexity condition.
    pub c2: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c: 1.0,
            c_tilde: 1.0,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c", self.c),
            ("c_tilde", self.c_tilde),
            ("c1", self.c1),
            ("c2", self.c2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "constant {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn sigma_norm(sigma: &SymmetricMatrix) -> Result<f64> {
    let norm = operator_norm(sigma);
    if norm == 0.0 {
        return Err(Error::DegenerateInput("covariance is zero".into()));
    }
    Ok(norm)
}

fn check_probs(sigma: &SymmetricMatrix, p: &SymmetricMatrix) -> Result<()> {
    if p.dim() != sigma.dim() {
        return Err(Error::dims(sigma.dim(), p.dim()));
    }
    for j in 0..p.dim() {
        for i in 0..p.dim() {
            let v = p.get(i, j);
            if v <= 0.0 {
                return Err(Error::NotHadamardInvertible {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// `(1/||Sigma||) max_j sum_i Sigma_ii / p_ij`.
pub fn srank_min(sigma: &SymmetricMatrix, p: &SymmetricMatrix) -> Result<f64> {
    check_probs(sigma, p)?;
    srank_hat(sigma, p, &ObservedPairSet::full(sigma.dim())).map(|(m, _)| m)
}

/// `(1/||Sigma||) sqrt(sum_ij Sigma_ii Sigma_jj / p_ij^2)`.
pub fn srank_2(sigma: &SymmetricMatrix, p: &SymmetricMatrix) -> Result<f64> {
    check_probs(sigma, p)?;
    srank_hat(sigma, p, &ObservedPairSet::full(sigma.dim())).map(|(_, s)| s)
}

/// Both scaled effective ranks with sums restricted to the pairs in `support`.
/// Pairs outside the support are skipped, so `p_hat` may vanish there.
pub fn srank_hat(
    sigma: &SymmetricMatrix,
    p_hat: &SymmetricMatrix,
    support: &ObservedPairSet,
) -> Result<(f64, f64)> {
    let n = sigma.dim();
    if p_hat.dim() != n || support.dim() != n {
        return Err(Error::dims(n, p_hat.dim()));
    }
    let norm = sigma_norm(sigma)?;
    let d = sigma.diagonal();
    let mut col_max: f64 = 0.0;
    let mut frob = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            if !support.contains(i, j) {
                continue;
            }
            let p = p_hat.get(i, j);
            if p <= 0.0 {
                return Err(Error::NotHadamardInvertible {
                    row: i,
                    col: j,
                    value: p,
                });
            }
            col += d[i] / p;
            frob += d[i] * d[j] / (p * p);
        }
        col_max = col_max.max(col);
    }
    Ok((col_max / norm, frob.sqrt() / norm))
}

fn check_vector(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::dims(n, p.len()));
    }
    if let Some((i, &v)) = p.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NotHadamardInvertible {
            row: i,
            col: i,
            value: v,
        });
    }
    Ok(())
}

/// `(1/||Sigma||)(1/min_i p_i) sum_i Sigma_ii / p_i` for independent coordinates.
pub fn srank_min_tilde(sigma: &SymmetricMatrix, p: &[f64]) -> Result<f64> {
    check_vector(p, sigma.dim())?;
    let norm = sigma_norm(sigma)?;
    let p_min = p.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = sigma.diagonal().iter().zip(p).map(|(d, p)| d / p).sum();
    Ok(s / (p_min * norm))
}

/// `(1/||Sigma||) sum_i Sigma_ii / p_i^2` for independent coordinates.
pub fn srank_2_tilde(sigma: &SymmetricMatrix, p: &[f64]) -> Result<f64> {
    check_vector(p, sigma.dim())?;
    let norm = sigma_norm(sigma)?;
    let s: f64 = sigma
        .diagonal()
        .iter()
        .zip(p)
        .map(|(d, p)| d / (p * p))
        .sum();
    Ok(s / norm)
}

/// Precondition of a bound that did not hold at the evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundWarning {
    /// `N < e^2`.
    FewSamples,
    /// `n < 3`.
    SmallDimension,
    /// Some block has `N_t <= e`.
    SmallBlock,
}

/// A bound value split into its rate terms.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    /// `C ||Sigma|| sqrt(8e log(n) s_min / N)` (times the CMCAR prefactor).
    pub first_term: f64,
    pub second_term: f64,
    pub warnings: Vec<BoundWarning>,
}

fn mcar_bound(norm: f64, n: usize, n_samples: usize, s_min: f64, s_2: f64, c: f64) -> BoundValue {
    let nf = n_samples as f64;
    let log_n = (n as f64).ln();
    let first = c * norm * (8.0 * E * log_n * s_min / nf).sqrt();
    let second = c * norm * 4.0 * E * E * log_n * nf.ln() * s_2 / nf;
    let mut warnings = Vec::new();
    if nf < E * E {
        warnings.push(BoundWarning::FewSamples);
    }
    if n < 3 {
        warnings.push(BoundWarning::SmallDimension);
    }
    BoundValue {
        value: first + second,
        first_term: first,
        second_term: second,
        warnings,
    }
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples == 0 {
        return Err(Error::InsufficientSamples {
            required: 1,
            found: 0,
        });
    }
    Ok(())
}

/// Expected operator-norm error bound for the known-P estimator:
/// `C ||Sigma|| (sqrt(8e log(n) srank_min / N) + 4e^2 log(n) log(N) srank_2 / N)`.
pub fn bound_thm1(
    sigma: &SymmetricMatrix,
    p: &SymmetricMatrix,
    n_samples: usize,
    constants: &BoundConstants,
) -> Result<BoundValue> {
    check_samples(n_samples)?;
    let s_min = srank_min(sigma, p)?;
    let s_2 = srank_2(sigma, p)?;
    Ok(mcar_bound(
        operator_norm(sigma),
        sigma.dim(),
        n_samples,
        s_min,
        s_2,
        constants.c,
    ))
}

/// Conditional error bound for the unknown-P estimator; the ranks use the
/// empirical `P_hat` restricted to its support.
pub fn bound_thm2(
    sigma: &SymmetricMatrix,
    p_hat: &SymmetricMatrix,
    support: &ObservedPairSet,
    n_samples: usize,
    constants: &BoundConstants,
) -> Result<BoundValue> {
    check_samples(n_samples)?;
    let (s_min, s_2) = srank_hat(sigma, p_hat, support)?;
    Ok(mcar_bound(
        operator_norm(sigma),
        sigma.dim(),
        n_samples,
        s_min,
        s_2,
        constants.c,
    ))
}

/// Ranks of one CMCAR block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRanks {
    pub srank_min: f64,
    pub srank_2: f64,
    pub n_samples: usize,
}

/// Per-block inputs of the CMCAR bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CmcarBoundInputs {
    pub blocks: Vec<BlockRanks>,
}

impl CmcarBoundInputs {
    /// Ranks of `Sigma` under each block's probabilities.
    pub fn from_blocks<'a>(
        sigma: &SymmetricMatrix,
        blocks: impl IntoIterator<Item = (&'a SymmetricMatrix, usize)>,
    ) -> Result<Self> {
        let blocks = blocks
            .into_iter()
            .map(|(p, n_t)| {
                Ok(BlockRanks {
                    srank_min: srank_min(sigma, p)?,
                    srank_2: srank_2(sigma, p)?,
                    n_samples: n_t,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    /// Blockwise mean over replays of a random schedule. Replays must share
    /// block sizes.
    pub fn average(replays: &[CmcarBoundInputs]) -> Result<Self> {
        let first = replays
            .first()
            .ok_or_else(|| Error::InvalidInput("no schedule replays".into()))?;
        let mut blocks = first.blocks.clone();
        for r in &replays[1..] {
            if r.blocks.len() != blocks.len()
                || r.blocks
                    .iter()
                    .zip(&blocks)
                    .any(|(a, b)| a.n_samples != b.n_samples)
            {
                return Err(Error::InvalidInput(
                    "replays have different block layouts".into(),
                ));
            }
            for (acc, b) in blocks.iter_mut().zip(&r.blocks) {
                acc.srank_min += b.srank_min;
                acc.srank_2 += b.srank_2;
            }
        }
        let k = replays.len() as f64;
        for b in &mut blocks {
            b.srank_min /= k;
            b.srank_2 /= k;
        }
        Ok(Self { blocks })
    }

    pub fn total_n(&self) -> usize {
        self.blocks.iter().map(|b| b.n_samples).sum()
    }

    /// `L^2 = sum_t log^2(N_t)`.
    pub fn l_squared(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b.n_samples as f64).ln().powi(2))
            .sum()
    }

    /// `eps_1 = (1/N) sum_t srank_min^(t) N_t`.
    pub fn epsilon1(&self) -> f64 {
        let total = self.total_n() as f64;
        self.blocks
            .iter()
            .map(|b| b.srank_min * b.n_samples as f64)
            .sum::<f64>()
            / total
    }

    /// `L eps_2 = sqrt(sum_t srank_2^(t)^2 log^2(N_t))`, defined even when `L = 0`.
    pub fn l_epsilon2(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b.srank_2 * (b.n_samples as f64).ln()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `eps_2`, or `None` when every block has a single sample.
    pub fn epsilon2(&self) -> Option<f64> {
        let l = self.l_squared().sqrt();
        (l > 0.0).then(|| self.l_epsilon2() / l)
    }
}

/// Expected error bound for the CMCAR estimator:
/// `C~ ||Sigma|| sqrt(log(n+1)) (sqrt(8e log(n) eps_1 / N) + 4e^2 log(n) L eps_2 / N)`.
pub fn bound_thm3(
    inputs: &CmcarBoundInputs,
    sigma: &SymmetricMatrix,
    constants: &BoundConstants,
) -> Result<BoundValue> {
    if inputs.blocks.is_empty() {
        return Err(Error::InvalidInput("no blocks".into()));
    }
    if inputs.blocks.iter().any(|b| b.n_samples == 0) {
        return Err(Error::InsufficientSamples {
            required: 1,
            found: 0,
        });
    }
    let n = sigma.dim();
    let norm = sigma_norm(sigma)?;
    let nf = inputs.total_n() as f64;
    let log_n = (n as f64).ln();
    let pre = constants.c_tilde * norm * ((n + 1) as f64).ln().sqrt();
    let first = pre * (8.0 * E * log_n * inputs.epsilon1() / nf).sqrt();
    let second = pre * 4.0 * E * E * log_n * inputs.l_epsilon2() / nf;
    let mut warnings = Vec::new();
    if inputs.blocks.iter().any(|b| (b.n_samples as f64) <= E) {
        warnings.push(BoundWarning::SmallBlock);
    }
    if n < 3 {
        warnings.push(BoundWarning::SmallDimension);
    }
    Ok(BoundValue {
        value: first + second,
        first_term: first,
        second_term: second,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleComplexity {
    pub n_samples: u64,
    pub iterations: usize,
}

/// Smallest `N` with `N >= 8e log(n) srank_min (e rho log(N) v 2 C_2/eps)^2`,
/// `rho = srank_2 / srank_min`, by fixed-point iteration from `N = 1`.
pub fn sample_complexity_mcar(
    sigma: &SymmetricMatrix,
    p: &SymmetricMatrix,
    eps: f64,
    constants: &BoundConstants,
) -> Result<SampleComplexity> {
    sample_complexity_from(sigma, p, eps, constants, 1)
}

/// [`sample_complexity_mcar`] started from `n0`. The iteration is monotone,
/// so any start below the answer returns the same `N`.
pub fn sample_complexity_from(
    sigma: &SymmetricMatrix,
    p: &SymmetricMatrix,
    eps: f64,
    constants: &BoundConstants,
    n0: u64,
) -> Result<SampleComplexity> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "accuracy must be positive, got {eps}"
        )));
    }
    let s_min = srank_min(sigma, p)?;
    let rho = srank_2(sigma, p)? / s_min;
    let a = 8.0 * E * (sigma.dim() as f64).ln() * s_min;
    let rhs = |nn: f64| {
        let inner = (E * rho * nn.ln()).max(2.0 * constants.c2 / eps);
        a * inner * inner
    };
    let limit = 2f64.powi(63);
    let mut nn = n0.max(1) as f64;
    for iterations in 1..=10_000 {
        let next = rhs(nn).ceil();
        if !(next < limit) {
            return Err(Error::Overflow("sample complexity exceeds 2^63".into()));
        }
        if next <= nn {
            return Ok(SampleComplexity {
                n_samples: nn as u64,
                iterations,
            });
        }
        nn = next;
    }
    Err(Error::Overflow(
        "sample complexity iteration did not settle".into(),
    ))
}

fn comparison_inputs(
    sigma: &SymmetricMatrix,
    p: f64,
    n_samples: usize,
    nu: f64,
) -> Result<(f64, f64)> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "p must lie in (0, 1], got {p}"
        )));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!(
            "nu must be positive, got {nu}"
        )));
    }
    check_samples(n_samples)?;
    let r = erank(sigma)?;
    Ok((
        r * (nu + (2.0 * sigma.dim() as f64).ln()),
        operator_norm(sigma),
    ))
}

/// Uniform-MCAR high-probability bound of Lounici (2014):
/// `C ||Sigma|| max{ sqrt(r L / (p^2 N)), r L (C_1 p + nu + log N) / (p^2 N) }`
/// with `r = erank(Sigma)` and `L = nu + log(2n)`.
pub fn bound_lounici(
    sigma: &SymmetricMatrix,
    p: f64,
    n_samples: usize,
    nu: f64,
    constants: &BoundConstants,
) -> Result<BoundValue> {
    let (rl, norm) = comparison_inputs(sigma, p, n_samples, nu)?;
    let nf = n_samples as f64;
    let first = constants.c * norm * (rl / (p * p * nf)).sqrt();
    let second = constants.c * norm * rl * (constants.c1 * p + nu + nf.ln()) / (p * p * nf);
    Ok(BoundValue {
        value: first.max(second),
        first_term: first,
        second_term: second,
        warnings: Vec::new(),
    })
}

/// Park & Lim (2019) bound simplified to uniform independent masks: as
/// [`bound_lounici`] with an extra factor `n` and `p^{7/2}` in the first term.
pub fn bound_park(
    sigma: &SymmetricMatrix,
    p: f64,
    n_samples: usize,
    nu: f64,
    constants: &BoundConstants,
) -> Result<BoundValue> {
    let (rl, norm) = comparison_inputs(sigma, p, n_samples, nu)?;
    let nf = n_samples as f64;
    let lead = constants.c * norm * sigma.dim() as f64;
    let first = lead * (rl / (p.powf(3.5) * nf)).sqrt();
    let second = lead * rl * (constants.c1 * p + nu + nf.ln()) / (p * p * nf);
    Ok(BoundValue {
        value: first.max(second),
        first_term: first,
        second_term: second,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    KnownP,
    /// Co-observation count `K ~ Binomial(N, p_ij)`, conditioned on `K >= 1`.
    UnknownP,
}

/// Mean squared error of entry `(i, j)` for Gaussian data with independent
/// masks.
///
/// Known P: `(var(x_i x_j) + (1 - p_ij) Sigma_ij^2) / (p_ij N)`.
/// Unknown P: `E[N/K | K >= 1] var(x_i x_j) / N`.
/// `var(x_i x_j) = Sigma_ii Sigma_jj + Sigma_ij^2` (Isserlis).
pub fn entrywise_error_oracle(
    sigma: &SymmetricMatrix,
    p: &SymmetricMatrix,
    n_samples: usize,
    (i, j): (usize, usize),
    mode: OracleMode,
) -> Result<f64> {
    check_samples(n_samples)?;
    let n = sigma.dim();
    if p.dim() != n || i >= n || j >= n {
        return Err(Error::InvalidInput(format!("pair ({i}, {j}) out of range")));
    }
    let p_ij = p.get(i, j);
    if !(p_ij > 0.0 && p_ij <= 1.0) {
        return Err(Error::NotHadamardInvertible {
            row: i,
            col: j,
            value: p_ij,
        });
    }
    let s_ij = sigma.get(i, j);
    let var = sigma.get(i, i) * sigma.get(j, j) + s_ij * s_ij;
    let nf = n_samples as f64;
    match mode {
        OracleMode::KnownP => Ok((var + (1.0 - p_ij) * s_ij * s_ij) / (p_ij * nf)),
        OracleMode::UnknownP => {
            if p_ij == 1.0 {
                return Ok(var / nf);
            }
            let binom = Binomial::new(p_ij, n_samples as u64)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            let mut num = 0.0;
            for k in 1..=n_samples as u64 {
                num += binom.pmf(k) * nf / k as f64;
            }
            let observable = 1.0 - binom.pmf(0);
            Ok(num / observable * var / nf)
        }
    }
}
