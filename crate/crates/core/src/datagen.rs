//! Synthetic population covariances and Gaussian samples.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matlin::{gram_schmidt, SymmetricMatrix};
use crate::rng::{column_rng, derive_seed};

const RHO_MAX_ITER: usize = 200;
const GRAM_SCHMIDT_RETRIES: u64 = 3;
const TAG_EIGENVECTORS: u64 = 0x6569_6776;

/// Recipe for an approximately sparse covariance with a strongly decaying
/// variance profile: `Sigma = D^{1/2} R D^{1/2}` with
/// `D_ii = exp(-decay * i / (n - 1))` and `R_ij = correlation^|i - j|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewedRecipe {
    pub decay: f64,
    pub correlation: f64,
}

impl Default for SkewedRecipe {
    /// erank = 2.7348 at n = 50.
    fn default() -> Self {
        Self {
            decay: 6.0,
            correlation: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumKind {
    /// Eigenvalues `rho^1, ..., rho^n` with `rho` chosen for the target erank;
    /// eigenvectors from Gram-Schmidt on a Gaussian matrix.
    Geometric {
        target_erank: f64,
    },
    Skewed(SkewedRecipe),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSpec {
    pub n: usize,
    pub kind: SpectrumKind,
    pub seed: u64,
}

impl SpectrumSpec {
    pub fn geometric(n: usize, target_erank: f64, seed: u64) -> Self {
        Self {
            n,
            kind: SpectrumKind::Geometric { target_erank },
            seed,
        }
    }

    pub fn skewed(n: usize, seed: u64) -> Self {
        Self {
            n,
            kind: SpectrumKind::Skewed(SkewedRecipe::default()),
            seed,
        }
    }
}

/// Gaussian population `N(mean, sigma)` with a cached spectral square root.
#[derive(Debug, Clone)]
pub struct PopulationModel {
    sigma: SymmetricMatrix,
    mean: Vec<f64>,
    /// `Q diag(sqrt(max(lambda, 0)))`
    factor: DMatrix<f64>,
    op_norm: f64,
}

impl PopulationModel {
    /// Zero-mean model. `sigma` must be PSD up to `-1e-10 ||sigma||`.
    pub fn new(sigma: SymmetricMatrix) -> Result<Self> {
        let spec = sigma.spectrum();
        let op_norm = spec.operator_norm();
        if let Some(min) = spec.eigenvalues.iter().copied().reduce(f64::min) {
            if min < -1e-10 * op_norm {
                return Err(Error::InvalidInput(format!(
                    "covariance is not PSD (min eigenvalue {min:e})"
                )));
            }
        }
        let roots = spec.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = spec.eigenvectors * DMatrix::from_diagonal(&roots);
        let n = sigma.dim();
        Ok(Self {
            sigma,
            mean: vec![0.0; n],
            factor,
            op_norm,
        })
    }

    pub fn with_mean(mut self, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::dims(self.dim(), mean.len()));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("mean has non-finite entries".into()));
        }
        self.mean = mean;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub fn sigma(&self) -> &SymmetricMatrix {
        &self.sigma
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `||sigma||`, cached.
    pub fn operator_norm(&self) -> f64 {
        self.op_norm
    }
}

/// Geometric ratio `rho` in (0, 1) with `1 + rho + ... + rho^(n-1) = target`,
/// the effective rank of `diag(rho^1, ..., rho^n)`.
pub fn solve_rho_for_erank(n: usize, target: f64) -> Result<f64> {
    if n < 2 || !(target > 1.0 && target < n as f64) {
        return Err(Error::InfeasibleTarget(format!(
            "erank target {target} must lie in (1, {n}) for a geometric spectrum of dimension {n}"
        )));
    }
    let erank_of = |rho: f64| -> f64 {
        // Horner; exact enough and monotone in rho
        (0..n).fold(0.0, |acc, _| acc * rho + 1.0)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..RHO_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if erank_of(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    Ok(rho)
}

/// Population covariance for `spec`.
pub fn build_covariance(spec: &SpectrumSpec) -> Result<PopulationModel> {
    match spec.kind {
        SpectrumKind::Geometric { target_erank } => {
            build_geometric(spec.n, target_erank, spec.seed)
        }
        SpectrumKind::Skewed(recipe) => build_skewed_with(spec.n, recipe),
    }
}

fn build_geometric(n: usize, target: f64, seed: u64) -> Result<PopulationModel> {
    let rho = solve_rho_for_erank(n, target)?;
    let eigenvalues: Vec<f64> = (1..=n).map(|i| rho.powi(i as i32)).collect();
    let mut last_err = None;
    for attempt in 0..=GRAM_SCHMIDT_RETRIES {
        let g = gaussian_matrix(n, n, derive_seed(seed, &[TAG_EIGENVECTORS, attempt]));
        match gram_schmidt(&g) {
            Ok(q) => {
                let scaled = &q * DMatrix::from_diagonal(&DVector::from_column_slice(&eigenvalues));
                let sigma = SymmetricMatrix::from_upper(scaled * q.transpose())?;
                return PopulationModel::new(sigma);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::DegenerateInput("eigenvector draw failed".into())))
}

/// Skewed covariance with the default recipe. The recipe is deterministic;
/// `seed` is accepted for interface symmetry with [`build_covariance`].
pub fn build_skewed_covariance(n: usize, _seed: u64) -> Result<PopulationModel> {
    build_skewed_with(n, SkewedRecipe::default())
}

pub fn build_skewed_with(n: usize, recipe: SkewedRecipe) -> Result<PopulationModel> {
    if n < 2 {
        return Err(Error::InvalidInput("skewed covariance needs n >= 2".into()));
    }
    if !(recipe.correlation.abs() < 1.0) || !(recipe.decay >= 0.0) {
        return Err(Error::InvalidInput(format!("bad skewed recipe {recipe:?}")));
    }
    let var = |i: usize| (-recipe.decay * i as f64 / (n - 1) as f64).exp();
    let sigma = SymmetricMatrix::from_fn(n, |i, j| {
        (var(i) * var(j)).sqrt()
            * recipe
                .correlation
                .powi((j as i64 - i as i64).unsigned_abs() as i32)
    })?;
    PopulationModel::new(sigma)
}

/// `n_samples` i.i.d. draws `mean + Q diag(sqrt(lambda)) z` stored as columns.
pub fn sample_gaussian(model: &PopulationModel, n_samples: usize, seed: u64) -> DMatrix<f64> {
    let z = gaussian_matrix(model.dim(), n_samples, seed);
    let mut x = &model.factor * z;
    for mut col in x.column_iter_mut() {
        for (v, m) in col.iter_mut().zip(&model.mean) {
            *v += m;
        }
    }
    x
}

/// `rows x cols` matrix of standard normals, column `k` from stream `(seed, k)`.
pub(crate) fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(rows, cols);
    for (k, mut col) in g.column_iter_mut().enumerate() {
        let mut rng = column_rng(seed, k);
        for v in col.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{sample_covariance, MeanMode};
    use crate::matlin::erank;

    /// Independent root finder: Newton on (1 - rho^n) / (1 - rho) - target.
    fn newton_rho(n: usize, target: f64) -> f64 {
        let f = |r: f64| (1.0 - r.powi(n as i32)) / (1.0 - r) - target;
        let mut r = 0.5;
        for _ in 0..100 {
            let h = 1e-7;
            let d = (f(r + h) - f(r - h)) / (2.0 * h);
            r -= f(r) / d;
        }
        r
    }

    #[test]
    fn rho_examples() {
        let rho = solve_rho_for_erank(50, 4.0).unwrap();
        // (1 - rho^50)/(1 - rho) = 4 with rho^50 ~ 5.7e-7
        assert!((rho - 0.75).abs() < 2e-7, "{rho}");
        assert!((rho - newton_rho(50, 4.0)).abs() < 1e-10);
        let sum: f64 = (0..50).map(|i| rho.powi(i)).sum();
        assert!((sum - 4.0).abs() <= 1e-9);

        assert!((solve_rho_for_erank(2, 1.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(solve_rho_for_erank(2, 2.0).is_err());
        assert!(solve_rho_for_erank(50, 50.5).is_err());
        assert!(solve_rho_for_erank(50, 1.0).is_err());
    }

    #[test]
    fn geometric_covariance_hits_target() {
        let model = build_covariance(&SpectrumSpec::geometric(50, 4.0, 1)).unwrap();
        assert!((erank(model.sigma()).unwrap() - 4.0).abs() <= 1e-6);

        let small = build_covariance(&SpectrumSpec::geometric(2, 1.5, 7)).unwrap();
        let ev = small.sigma().spectrum().eigenvalues;
        assert!((ev[0] - 0.5).abs() < 1e-12 && (ev[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn geometric_eigenvalues_match_powers() {
        let n = 20;
        let model = build_covariance(&SpectrumSpec::geometric(n, 3.0, 11)).unwrap();
        let rho = solve_rho_for_erank(n, 3.0).unwrap();
        let ev = model.sigma().spectrum().eigenvalues;
        for i in 0..n {
            let expect = rho.powi(i as i32 + 1);
            assert!(
                (ev[i] - expect).abs() <= 1e-8 * expect.max(1e-6),
                "{i}: {} vs {expect}",
                ev[i]
            );
        }
    }

    #[test]
    fn covariance_is_deterministic() {
        let spec = SpectrumSpec::geometric(30, 4.0, 99);
        let a = build_covariance(&spec).unwrap();
        let b = build_covariance(&spec).unwrap();
        assert_eq!(a.sigma(), b.sigma());
        let c = build_covariance(&SpectrumSpec::geometric(30, 4.0, 100)).unwrap();
        assert_ne!(a.sigma(), c.sigma());
    }

    #[test]
    fn skewed_covariance_contract() {
        let model = build_skewed_covariance(50, 0).unwrap();
        let e = erank(model.sigma()).unwrap();
        assert!((2.0..=3.5).contains(&e), "erank {e}");
        let diag = model.sigma().diagonal();
        let max = diag.iter().copied().fold(f64::MIN, f64::max);
        let min = diag.iter().copied().fold(f64::MAX, f64::min);
        assert!(max / min >= 10.0);
        assert!(diag.windows(2).all(|w| w[0] >= w[1]));
        assert!(model.sigma().is_psd(1e-10));
    }

    #[test]
    fn zero_covariance_samples_are_zero() {
        let model = PopulationModel::new(SymmetricMatrix::zeros(3).unwrap()).unwrap();
        let x = sample_gaussian(&model, 5, 1);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_stable() {
        let model = build_covariance(&SpectrumSpec::geometric(4, 2.0, 3)).unwrap();
        let a = sample_gaussian(&model, 10, 5);
        let b = sample_gaussian(&model, 10, 5);
        assert_eq!(a, b);
        let longer = sample_gaussian(&model, 15, 5);
        assert_eq!(a, longer.columns(0, 10).into_owned());
    }

    #[test]
    fn identity_sample_covariance_converges() {
        let model = PopulationModel::new(SymmetricMatrix::identity(2).unwrap()).unwrap();
        let n = 1_000_000;
        let x = sample_gaussian(&model, n, 42);
        let s = sample_covariance(&x, &MeanMode::Zero).unwrap();
        // 3 sqrt(2/N) ~ 0.0042
        assert!(s.max_abs_diff(&SymmetricMatrix::identity(2).unwrap()) <= 0.01);
    }

    #[test]
    fn sample_mean_within_tolerance() {
        let sigma = SymmetricMatrix::from_diagonal(&[1.0, 4.0, 0.25]).unwrap();
        let mu = vec![1.0, -2.0, 0.5];
        let model = PopulationModel::new(sigma)
            .unwrap()
            .with_mean(mu.clone())
            .unwrap();
        let n = 100_000;
        let x = sample_gaussian(&model, n, 9);
        let tol = 4.0 * (4.0_f64 / n as f64).sqrt();
        for (i, &target) in mu.iter().enumerate() {
            let m = x.row(i).mean();
            assert!((m - target).abs() <= tol, "coord {i}: {m}");
        }
    }

    #[test]
    fn rejects_indefinite_sigma() {
        let s = SymmetricMatrix::from_diagonal(&[1.0, -1.0]).unwrap();
        assert!(PopulationModel::new(s).is_err());
    }
}
