//! Missing-data mechanisms.
//!
//! A mechanism samples binary mask columns `delta` (1 = observed) and knows
//! the exact pairwise observation probabilities `P_ij = E[delta_i delta_j]`
//! it induces. The conditionally-MCAR family lets the per-block probabilities
//! depend on the estimate built from earlier blocks.

use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{sample_gaussian, PopulationModel};
use crate::error::{Error, Result};
use crate::estimators::{CmcarAccumulator, ObservationBatch};
use crate::matlin::SymmetricMatrix;
use crate::rng::{column_rng, derive_seed};

const TAG_DATA: u64 = 0x6461_7461;
const TAG_MASK: u64 = 0x6d61_736b;

/// User-supplied mask sampler. It must declare its exact `P` for the
/// known-probability estimators to be usable with it.
pub trait CustomMechanism: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    /// Fills `out` (length `dim()`) with one mask column.
    fn sample_column(&self, rng: &mut ChaCha8Rng, out: &mut [u8]);
    fn prob_matrix(&self) -> Option<SymmetricMatrix>;
    fn name(&self) -> &str {
        "custom"
    }
}

#[derive(Debug, Clone)]
pub enum MaskMechanism {
    /// Coordinate `i` observed independently with probability `p[i]`.
    IndependentBernoulli {
        p: Vec<f64>,
    },
    /// A uniformly random subset of exactly `m` of the `n` coordinates.
    UniformSubset {
        n: usize,
        m: usize,
    },
    Custom(Arc<dyn CustomMechanism>),
}

impl MaskMechanism {
    pub fn independent(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::InvalidInput(format!(
                "observation probability p[{i}] = {v} outside (0, 1]"
            )));
        }
        Ok(Self::IndependentBernoulli { p })
    }

    pub fn uniform_independent(n: usize, p: f64) -> Result<Self> {
        Self::independent(vec![p; n])
    }

    pub fn uniform_subset(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidInput(format!(
                "subset size {m} outside 1..={n}"
            )));
        }
        Ok(Self::UniformSubset { n, m })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::IndependentBernoulli { p } => p.len(),
            Self::UniformSubset { n, .. } => *n,
            Self::Custom(c) => c.dim(),
        }
    }

    pub fn tag(&self) -> &str {
        match self {
            Self::IndependentBernoulli { .. } => "independent_bernoulli",
            Self::UniformSubset { .. } => "uniform_subset",
            Self::Custom(c) => c.name(),
        }
    }

    fn fill_column(&self, rng: &mut ChaCha8Rng, out: &mut [u8]) {
        match self {
            Self::IndependentBernoulli { p } => {
                for (o, &pi) in out.iter_mut().zip(p) {
                    *o = rng.random_bool(pi) as u8;
                }
            }
            Self::UniformSubset { n, m } => {
                out.fill(0);
                for i in index::sample(rng, *n, *m) {
                    out[i] = 1;
                }
            }
            Self::Custom(c) => c.sample_column(rng, out),
        }
    }
}

/// Binary `n x N` mask, stored column-major one byte per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskBatch {
    n: usize,
    n_samples: usize,
    data: Vec<u8>,
    tag: String,
}

impl MaskBatch {
    /// Builds a mask from column-major `data`; entries must be 0 or 1.
    pub fn new(n: usize, n_samples: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != n * n_samples {
            return Err(Error::dims(n * n_samples, data.len()));
        }
        if data.iter().any(|&d| d > 1) {
            return Err(Error::InvalidInput("mask entries must be 0 or 1".into()));
        }
        Ok(Self {
            n,
            n_samples,
            data,
            tag: "explicit".into(),
        })
    }

    pub fn from_columns(columns: &[Vec<u8>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("ragged mask columns".into()));
        }
        Self::new(n, columns.len(), columns.concat())
    }

    pub fn all_ones(n: usize, n_samples: usize) -> Self {
        Self {
            n,
            n_samples,
            data: vec![1; n * n_samples],
            tag: "complete".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> u8 {
        self.data[k * self.n + i]
    }

    pub fn column(&self, k: usize) -> &[u8] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.n.max(1)).take(self.n_samples)
    }

    pub fn is_complete(&self) -> bool {
        self.data.iter().all(|&d| d == 1)
    }

    /// Number of columns observing each coordinate.
    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.n];
        for col in self.columns() {
            for (ci, &d) in c.iter_mut().zip(col) {
                *ci += d as u64;
            }
        }
        c
    }

    /// Co-observation counts `sum_k delta_i delta_j`, row-major `n x n`.
    pub fn co_counts(&self) -> Vec<u64> {
        let n = self.n;
        let mut c = vec![0u64; n * n];
        let mut idx = Vec::with_capacity(n);
        for col in self.columns() {
            idx.clear();
            idx.extend(
                col.iter()
                    .enumerate()
                    .filter(|(_, &d)| d == 1)
                    .map(|(i, _)| i),
            );
            for &i in &idx {
                for &j in &idx {
                    c[i * n + j] += 1;
                }
            }
        }
        c
    }

    /// Concatenates the columns of several batches of equal dimension.
    pub fn concat(batches: &[&MaskBatch]) -> Result<Self> {
        let n = batches.first().map_or(0, |b| b.n);
        if batches.iter().any(|b| b.n != n) {
            return Err(Error::InvalidInput(
                "mask batches differ in dimension".into(),
            ));
        }
        let data: Vec<u8> = batches
            .iter()
            .flat_map(|b| b.data.iter().copied())
            .collect();
        let n_samples = batches.iter().map(|b| b.n_samples).sum();
        Ok(Self {
            n,
            n_samples,
            data,
            tag: "concat".into(),
        })
    }
}

/// Draws `n_samples` i.i.d. mask columns; column `k` uses stream `(seed, k)`.
pub fn sample_mask(mech: &MaskMechanism, n_samples: usize, seed: u64) -> MaskBatch {
    let n = mech.dim();
    let mut data = vec![0u8; n * n_samples];
    if n > 0 {
        for (k, col) in data.chunks_exact_mut(n).enumerate() {
            let mut rng = column_rng(seed, k);
            mech.fill_column(&mut rng, col);
        }
    }
    MaskBatch {
        n,
        n_samples,
        data,
        tag: mech.tag().to_string(),
    }
}

/// Exact pairwise observation probabilities of `mech`.
pub fn prob_matrix(mech: &MaskMechanism) -> Result<SymmetricMatrix> {
    match mech {
        MaskMechanism::IndependentBernoulli { p } => {
            SymmetricMatrix::from_fn(p.len(), |i, j| if i == j { p[i] } else { p[i] * p[j] })
        }
        MaskMechanism::UniformSubset { n, m } => {
            let (nf, mf) = (*n as f64, *m as f64);
            let diag = mf / nf;
            let off = if *n > 1 {
                mf * (mf - 1.0) / (nf * (nf - 1.0))
            } else {
                diag
            };
            SymmetricMatrix::from_fn(*n, |i, j| if i == j { diag } else { off })
        }
        MaskMechanism::Custom(c) => c.prob_matrix().ok_or_else(|| {
            Error::Unsupported(format!(
                "mechanism '{}' declares no probability matrix",
                c.name()
            ))
        }),
    }
}

/// `P_hat = (1/N) sum_k delta^(k) delta^(k)^T`.
pub fn empirical_prob_matrix(batch: &MaskBatch) -> Result<SymmetricMatrix> {
    if batch.n_samples == 0 {
        return Err(Error::InsufficientSamples {
            required: 1,
            found: 0,
        });
    }
    let n = batch.n;
    let counts = batch.co_counts();
    let inv = batch.n_samples as f64;
    SymmetricMatrix::from_fn(n, |i, j| counts[i * n + j] as f64 / inv)
}

/// Observation-probability rule of a CMCAR schedule: block index `t`
/// (1-based) and the running estimate from blocks `< t` (absent for `t = 1`)
/// to per-coordinate probabilities.
pub type CmcarRule = Arc<dyn Fn(usize, Option<&SymmetricMatrix>) -> Vec<f64> + Send + Sync>;

/// Time-varying, history-dependent independent-Bernoulli mechanism.
#[derive(Clone)]
pub struct CmcarSchedule {
    n: usize,
    floor: f64,
    block_sizes: Vec<usize>,
    rule: CmcarRule,
}

impl fmt::Debug for CmcarSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CmcarSchedule")
            .field("n", &self.n)
            .field("floor", &self.floor)
            .field("block_sizes", &self.block_sizes)
            .finish_non_exhaustive()
    }
}

impl CmcarSchedule {
    /// `block_sizes[t - 1]` is `N_t`; the last entry repeats for later blocks.
    pub fn new(n: usize, floor: f64, block_sizes: Vec<usize>, rule: CmcarRule) -> Result<Self> {
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(Error::InvalidInput(format!("floor {floor} outside (0, 1]")));
        }
        check_block_sizes(&block_sizes)?;
        Ok(Self {
            n,
            floor,
            block_sizes,
            rule,
        })
    }

    /// Schedule that ignores history and emits `p` for every block.
    pub fn constant(p: Vec<f64>, block_sizes: Vec<usize>) -> Result<Self> {
        let floor = p.iter().copied().fold(1.0, f64::min);
        let n = p.len();
        Self::new(n, floor, block_sizes, Arc::new(move |_, _| p.clone()))
    }

    pub fn with_block_sizes(mut self, block_sizes: Vec<usize>) -> Result<Self> {
        check_block_sizes(&block_sizes)?;
        self.block_sizes = block_sizes;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// `N_t` for 1-based block index `t`.
    pub fn block_size(&self, t: usize) -> usize {
        let idx = t.saturating_sub(1).min(self.block_sizes.len() - 1);
        self.block_sizes[idx]
    }

    /// Evaluates the rule and checks every probability against `[floor, 1]`.
    pub fn probabilities(&self, t: usize, history: Option<&SymmetricMatrix>) -> Result<Vec<f64>> {
        let p = (self.rule)(t, history);
        if p.len() != self.n {
            return Err(Error::dims(self.n, p.len()));
        }
        for (i, &v) in p.iter().enumerate() {
            if !(v >= self.floor && v <= 1.0) {
                return Err(Error::ScheduleViolation {
                    block: t,
                    coordinate: i,
                    value: v,
                    floor: self.floor,
                });
            }
        }
        Ok(p)
    }
}

fn check_block_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidInput(
            "block sizes must be non-empty and >= 1".into(),
        ));
    }
    Ok(())
}

/// Observation probability of the uniform time-varying schedule at block `t`:
/// `(1 - a_t) + a_t m / n` with `a_t = 0.9 (1 - 1/sqrt(t))`.
pub fn uniform_schedule_probability(t: usize, m: usize, n: usize) -> f64 {
    let alpha = 0.9 * (1.0 - 1.0 / (t as f64).sqrt());
    (1.0 - alpha) + alpha * m as f64 / n as f64
}

/// Complete observations at `t = 1`, increasingly missing afterwards,
/// approaching `0.9 m/n + 0.1`. Block sizes default to 10; set them with
/// [`CmcarSchedule::with_block_sizes`].
pub fn cmcar_uniform_schedule(m: usize, n: usize) -> Result<CmcarSchedule> {
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("m = {m} outside 1..={n}")));
    }
    let floor = 0.1 * m as f64 / n as f64;
    CmcarSchedule::new(
        n,
        floor,
        vec![10],
        Arc::new(move |t, _| vec![uniform_schedule_probability(t, m, n); n]),
    )
}

/// One CMCAR block: observations, the per-coordinate probabilities used to
/// draw its masks and the induced `P^(t)`.
#[derive(Debug, Clone)]
pub struct CmcarBlock {
    pub t: usize,
    pub batch: ObservationBatch,
    pub probabilities: Vec<f64>,
    pub prob_matrix: SymmetricMatrix,
}

/// Draws block `t` given the running estimate from earlier blocks: fresh
/// i.i.d. data, probabilities from the rule, masks i.i.d. within the block
/// and independent of the block's data.
pub fn draw_cmcar_block(
    schedule: &CmcarSchedule,
    model: &PopulationModel,
    t: usize,
    history: Option<&SymmetricMatrix>,
    seed: u64,
) -> Result<CmcarBlock> {
    if model.dim() != schedule.dim() {
        return Err(Error::dims(schedule.dim(), model.dim()));
    }
    let probabilities = schedule.probabilities(t, history)?;
    let mech = MaskMechanism::independent(probabilities.clone())?;
    let n_t = schedule.block_size(t);
    let x = sample_gaussian(model, n_t, derive_seed(seed, &[TAG_DATA]));
    let mask = sample_mask(&mech, n_t, derive_seed(seed, &[TAG_MASK]));
    Ok(CmcarBlock {
        t,
        batch: ObservationBatch::observe(&x, mask)?,
        prob_matrix: prob_matrix(&mech)?,
        probabilities,
    })
}

/// Runs the schedule for `n_blocks` blocks. Block `t` is drawn with seed
/// `derive_seed(seed, [t])` after the running estimate of blocks `< t`.
pub fn sample_cmcar_blocks(
    schedule: &CmcarSchedule,
    model: &PopulationModel,
    n_blocks: usize,
    seed: u64,
) -> Result<Vec<CmcarBlock>> {
    if n_blocks == 0 {
        return Err(Error::InvalidInput("need at least one block".into()));
    }
    let mut acc = CmcarAccumulator::new(schedule.dim());
    let mut out = Vec::with_capacity(n_blocks);
    for t in 1..=n_blocks {
        let history = if t == 1 {
            None
        } else {
            Some(acc.current_estimate()?)
        };
        let block = draw_cmcar_block(
            schedule,
            model,
            t,
            history.as_ref(),
            derive_seed(seed, &[t as u64]),
        )?;
        acc.ingest(&block.batch, &block.prob_matrix)?;
        out.push(block);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_covariance, SpectrumSpec};

    #[test]
    fn full_probability_gives_full_masks() {
        let m = sample_mask(&MaskMechanism::uniform_independent(4, 1.0).unwrap(), 30, 1);
        assert!(m.is_complete());
        let s = sample_mask(&MaskMechanism::uniform_subset(5, 5).unwrap(), 30, 1);
        assert!(s.is_complete());
    }

    #[test]
    fn bernoulli_marginals() {
        let n_samples = 100_000;
        let m = sample_mask(
            &MaskMechanism::uniform_independent(3, 0.5).unwrap(),
            n_samples,
            3,
        );
        for c in m.counts() {
            let freq = c as f64 / n_samples as f64;
            assert!((freq - 0.5).abs() <= 0.006, "{freq}");
        }
    }

    #[test]
    fn bernoulli_co_observation_matches_product() {
        let p = vec![0.3, 0.6, 0.9];
        let n_samples = 100_000;
        let m = sample_mask(
            &MaskMechanism::independent(p.clone()).unwrap(),
            n_samples,
            4,
        );
        let c = m.co_counts();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let pij = p[i] * p[j];
                let sd = (pij * (1.0 - pij) / n_samples as f64).sqrt();
                let freq = c[i * 3 + j] as f64 / n_samples as f64;
                assert!((freq - pij).abs() <= 3.0 * sd, "({i},{j}) {freq} vs {pij}");
            }
        }
    }

    #[test]
    fn subset_columns_have_exactly_m_ones() {
        let m = sample_mask(&MaskMechanism::uniform_subset(7, 3).unwrap(), 500, 5);
        assert!(m
            .columns()
            .all(|c| c.iter().map(|&d| d as usize).sum::<usize>() == 3));
    }

    #[test]
    fn prob_matrix_examples() {
        let p = prob_matrix(&MaskMechanism::independent(vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(p.as_matrix().as_slice(), &[0.5, 0.25, 0.25, 0.5]);
        let s = prob_matrix(&MaskMechanism::uniform_subset(3, 2).unwrap()).unwrap();
        assert!((s.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        let ones = prob_matrix(&MaskMechanism::uniform_independent(3, 1.0).unwrap()).unwrap();
        assert_eq!(ones, SymmetricMatrix::ones(3).unwrap());
    }

    #[derive(Debug)]
    struct Pairs;
    impl CustomMechanism for Pairs {
        fn dim(&self) -> usize {
            2
        }
        fn sample_column(&self, rng: &mut ChaCha8Rng, out: &mut [u8]) {
            let v = rng.random_bool(0.5) as u8;
            out[0] = v;
            out[1] = v;
        }
        fn prob_matrix(&self) -> Option<SymmetricMatrix> {
            None
        }
    }

    #[test]
    fn custom_without_p_is_unsupported() {
        let mech = MaskMechanism::Custom(Arc::new(Pairs));
        assert!(matches!(prob_matrix(&mech), Err(Error::Unsupported(_))));
        let m = sample_mask(&mech, 10, 1);
        assert!(m.columns().all(|c| c[0] == c[1]));
    }

    #[test]
    fn empirical_prob_examples() {
        let m = MaskBatch::from_columns(&[vec![1, 0], vec![1, 1]]).unwrap();
        let p = empirical_prob_matrix(&m).unwrap();
        assert_eq!(p.as_matrix().as_slice(), &[1.0, 0.5, 0.5, 0.5]);
        let ones = empirical_prob_matrix(&MaskBatch::all_ones(3, 4)).unwrap();
        assert_eq!(ones, SymmetricMatrix::ones(3).unwrap());
        let zeros = MaskBatch::new(2, 3, vec![0; 6]).unwrap();
        assert_eq!(
            empirical_prob_matrix(&zeros).unwrap(),
            SymmetricMatrix::zeros(2).unwrap()
        );
    }

    #[test]
    fn empirical_prob_is_unbiased() {
        for mech in [
            MaskMechanism::independent(vec![0.2, 0.5, 0.9, 0.7]).unwrap(),
            MaskMechanism::uniform_subset(4, 2).unwrap(),
        ] {
            let exact = prob_matrix(&mech).unwrap();
            let mut avg = nalgebra::DMatrix::zeros(4, 4);
            for b in 0..200 {
                avg += empirical_prob_matrix(&sample_mask(&mech, 500, 1000 + b))
                    .unwrap()
                    .into_matrix();
            }
            avg /= 200.0;
            assert!((avg - exact.as_matrix()).amax() <= 0.01);
        }
    }

    #[test]
    fn uniform_schedule_values() {
        assert_eq!(uniform_schedule_probability(1, 5, 50), 1.0);
        assert!((uniform_schedule_probability(4, 5, 50) - 0.595).abs() < 1e-12);
        let far = uniform_schedule_probability(100_000_000, 5, 50);
        assert!((far - (0.9 * 0.1 + 0.1)).abs() < 1e-4);
        let s = cmcar_uniform_schedule(5, 50).unwrap();
        assert!((s.floor() - 0.01).abs() < 1e-15);
        for t in 1..1000 {
            s.probabilities(t, None).unwrap();
        }
    }

    #[test]
    fn schedule_violation_reported() {
        let s =
            CmcarSchedule::new(2, 0.2, vec![5], Arc::new(|t, _| vec![1.0 / t as f64; 2])).unwrap();
        assert!(s.probabilities(4, None).is_ok());
        assert!(matches!(
            s.probabilities(6, None),
            Err(Error::ScheduleViolation { block: 6, .. })
        ));
    }

    #[test]
    fn cmcar_blocks_respect_schedule() {
        let model = build_covariance(&SpectrumSpec::geometric(6, 2.0, 1)).unwrap();
        let sched = cmcar_uniform_schedule(2, 6)
            .unwrap()
            .with_block_sizes(vec![10, 25])
            .unwrap();
        let blocks = sample_cmcar_blocks(&sched, &model, 5, 9).unwrap();
        assert_eq!(blocks.len(), 5);
        assert!(blocks[0].batch.mask().is_complete());
        assert_eq!(blocks[0].batch.n_samples(), 10);
        assert_eq!(blocks[3].batch.n_samples(), 25);
        for b in &blocks {
            assert_eq!(
                b.probabilities,
                vec![uniform_schedule_probability(b.t, 2, 6); 6]
            );
            for (i, &p) in b.probabilities.iter().enumerate() {
                if p == 1.0 {
                    assert!((0..b.batch.n_samples()).all(|k| b.batch.mask().get(i, k) == 1));
                }
            }
        }
        let again = sample_cmcar_blocks(&sched, &model, 5, 9).unwrap();
        assert_eq!(again[4].batch.values(), blocks[4].batch.values());
    }

    #[test]
    fn constant_cmcar_matches_mcar_marginals() {
        let model = build_covariance(&SpectrumSpec::geometric(4, 2.0, 2)).unwrap();
        let p = vec![0.3, 0.5, 0.7, 0.9];
        let sched = CmcarSchedule::constant(p.clone(), vec![20_000]).unwrap();
        let blocks = sample_cmcar_blocks(&sched, &model, 3, 4).unwrap();
        let mcar = sample_mask(&MaskMechanism::independent(p.clone()).unwrap(), 20_000, 4);
        for b in &blocks {
            let cb = b.batch.mask().counts();
            let cm = mcar.counts();
            for i in 0..4 {
                let sd = (p[i] * (1.0 - p[i]) / 20_000.0).sqrt();
                let fb = cb[i] as f64 / 20_000.0;
                let fm = cm[i] as f64 / 20_000.0;
                assert!((fb - fm).abs() <= 4.0 * std::f64::consts::SQRT_2 * sd);
            }
        }
    }
}
