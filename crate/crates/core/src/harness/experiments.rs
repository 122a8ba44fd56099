//! Seeded Monte Carlo experiments.
//!
//! Trial `r` at grid point `g` draws everything from
//! `derive_seed(seed, [experiment id, g, r])`, so results do not depend on
//! the number of trials, the thread count or the evaluation order. Trials
//! of a grid point run in parallel and are aggregated with pairwise sums in
//! trial order.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind, Mechanism};
use super::dataset::{Record, TrialLabel};
use crate::datagen::SpectrumKind;
use crate::datagen::{build_covariance, build_skewed_with, sample_gaussian, PopulationModel};
use crate::diagnostics::{
    bound_thm1, bound_thm2, bound_thm3, BlockRanks, BoundConstants, CmcarBoundInputs,
};
use crate::diagnostics::{srank_2, srank_min};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_known_p, estimate_unknown_p, sample_covariance, CmcarAccumulator, MeanMode,
    ObservationBatch, UnknownPAccumulator,
};
use crate::masks::{
    cmcar_uniform_schedule, draw_cmcar_block, prob_matrix, sample_mask, MaskMechanism,
};
use crate::matlin::{operator_norm, SymmetricMatrix};
use crate::rng::derive_seed;

const TAG_DATA: u64 = 0x78;
const TAG_MASK: u64 = 0x6d;
const TAG_AUDIT: u64 = 0x61;
/// One row in `AUDIT_RATE` is snapshotted in audit mode.
const AUDIT_RATE: u64 = 100;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; the rayon default when `None`.
    pub threads: Option<usize>,
    /// Keep estimate snapshots for about 1% of the per-trial rows.
    pub audit: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<Record>,
    pub audit: Option<AuditLog>,
    /// `||Sigma||` of the population model.
    pub sigma_norm: f64,
}

/// Estimates kept for spot checks of the error column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    pub experiment: String,
    pub n: usize,
    /// Population covariance, column-major.
    pub sigma: Vec<f64>,
    pub snapshots: Vec<AuditSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSnapshot {
    pub n_samples: usize,
    pub mech_param: Option<f64>,
    pub trial: usize,
    pub estimator: String,
    pub rel_op_error: f64,
    /// Estimate, column-major.
    pub sigma_hat: Vec<f64>,
}

/// Recomputes every snapshot's error and checks it against the snapshot
/// and the matching CSV row. Returns the number of rows checked.
pub fn verify_audit(log: &AuditLog, records: &[Record]) -> Result<usize> {
    let to_matrix =
        |v: &[f64]| SymmetricMatrix::new(nalgebra::DMatrix::from_column_slice(log.n, log.n, v));
    let sigma = to_matrix(&log.sigma)?;
    let norm = operator_norm(&sigma);
    for s in &log.snapshots {
        let err = operator_norm(&to_matrix(&s.sigma_hat)?.sub(&sigma)?) / norm;
        let row = records
            .iter()
            .find(|r| {
                r.experiment == log.experiment
                    && r.n_samples == s.n_samples
                    && r.mech_param == s.mech_param
                    && r.trial == TrialLabel::Index(s.trial)
                    && r.estimator == s.estimator
            })
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "audit row N={} trial={} {} has no CSV row",
                    s.n_samples, s.trial, s.estimator
                ))
            })?;
        let tol = 1e-12 * err.abs().max(1e-300);
        if (err - s.rel_op_error).abs() > tol || (err - row.rel_op_error).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "audit mismatch at N={} trial={} {}: recomputed {err}, stored {}",
                s.n_samples, s.trial, s.estimator, row.rel_op_error
            )));
        }
    }
    Ok(log.snapshots.len())
}

/// Population model of an experiment.
pub fn build_model(config: &ExperimentConfig) -> Result<PopulationModel> {
    match config.spectrum.kind {
        SpectrumKind::Geometric { .. } => build_covariance(&config.spectrum),
        SpectrumKind::Skewed(recipe) => build_skewed_with(config.n, recipe),
    }
}

/// Runs the experiment described by `config`.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunResult> {
    let body = || match config.kind {
        ExperimentKind::McarUniform => run_mcar_uniform(config, opts),
        ExperimentKind::McarNonuniform => run_mcar_nonuniform(config, opts),
        ExperimentKind::Cmcar => run_cmcar(config, opts),
    };
    match opts.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(body),
        None => body(),
    }
}

/// Per-coordinate probabilities `p_i = min(rho sqrt(Sigma_ii), 1)` with `rho`
/// set by bisection so that the mean of `p` equals `fraction`.
pub fn proportional_probabilities(variances: &[f64], fraction: f64) -> Result<(f64, Vec<f64>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InfeasibleTarget(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    let sd: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let sd_min = sd.iter().copied().fold(f64::INFINITY, f64::min);
    if sd.is_empty() || !(sd_min > 0.0 && sd_min.is_finite()) {
        return Err(Error::InfeasibleTarget(
            "every variance must be positive".into(),
        ));
    }
    let probs = |rho: f64| -> Vec<f64> { sd.iter().map(|s| (rho * s).min(1.0)).collect() };
    let mean = |rho: f64| probs(rho).iter().sum::<f64>() / sd.len() as f64;
    let (mut lo, mut hi) = (0.0, 1.0 / sd_min);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean(mid) < fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((hi, probs(hi)))
}

/// Recursive halving sum; fixed tree shape for a given length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// `(mean, rms, standard error of the mean)`.
pub fn summarize(v: &[f64]) -> (f64, f64, f64) {
    let k = v.len() as f64;
    let mean = pairwise_sum(v) / k;
    let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
    let rms = (pairwise_sum(&sq) / k).sqrt();
    let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let stderr = if v.len() > 1 {
        (pairwise_sum(&dev) / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };
    (mean, rms, stderr)
}

/// One estimator evaluation inside a trial.
#[derive(Debug, Clone)]
struct Obs {
    mech: Option<f64>,
    estimator: &'static str,
    error: f64,
    thm1: Option<f64>,
    thm2: Option<f64>,
    thm3: Option<f64>,
    wall_ms: Option<f64>,
    snapshot: Option<SymmetricMatrix>,
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    sigma: &'a SymmetricMatrix,
    norm: f64,
    audit: bool,
}

impl Ctx<'_> {
    fn error(&self, est: &SymmetricMatrix) -> Result<f64> {
        Ok(operator_norm(&est.sub(self.sigma)?) / self.norm)
    }

    /// Times `f`, computes the error and keeps a snapshot if picked for audit.
    fn observe(
        &self,
        audit_key: &[u64],
        mech: Option<f64>,
        estimator: &'static str,
        f: impl FnOnce() -> Result<SymmetricMatrix>,
    ) -> Result<Obs> {
        let start = Instant::now();
        let est = f()?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        let error = self.error(&est)?;
        let mut key = vec![TAG_AUDIT, self.config.kind.id()];
        key.extend_from_slice(audit_key);
        key.push(
            estimator
                .bytes()
                .fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64)),
        );
        let picked = self.audit && derive_seed(self.config.seed, &key).is_multiple_of(AUDIT_RATE);
        Ok(Obs {
            mech,
            estimator,
            error,
            thm1: None,
            thm2: None,
            thm3: None,
            wall_ms: self.config.record_timing.then_some(elapsed),
            snapshot: picked.then_some(est),
        })
    }

    fn rel_bound(&self, v: Result<crate::diagnostics::BoundValue>) -> Result<Option<f64>> {
        Ok(Some(v?.value / self.norm))
    }
}

fn grid_point_error(kind: ExperimentKind, what: String, e: Error) -> Error {
    Error::GridPoint {
        point: format!("{kind} {what}"),
        source: Box::new(e),
    }
}

/// Per-trial rows followed by mean/rms/stderr rows for each
/// (mechanism, estimator) in order of first appearance.
fn emit_point(
    config: &ExperimentConfig,
    n_samples: usize,
    trials: Vec<Vec<Obs>>,
    records: &mut Vec<Record>,
    audit: &mut Vec<AuditSnapshot>,
) {
    let base = |mech, trial, estimator: &str, error| Record {
        experiment: config.name.clone(),
        n: config.n,
        n_samples,
        mech_param: mech,
        trial,
        estimator: estimator.to_string(),
        rel_op_error: error,
        bound_thm1: None,
        bound_thm2: None,
        bound_thm3: None,
        wall_ms: None,
    };
    for (r, obs) in trials.iter().enumerate() {
        for o in obs {
            records.push(Record {
                bound_thm1: o.thm1,
                bound_thm2: o.thm2,
                bound_thm3: o.thm3,
                wall_ms: o.wall_ms,
                ..base(o.mech, TrialLabel::Index(r), o.estimator, o.error)
            });
            if let Some(s) = &o.snapshot {
                audit.push(AuditSnapshot {
                    n_samples,
                    mech_param: o.mech,
                    trial: r,
                    estimator: o.estimator.to_string(),
                    rel_op_error: o.error,
                    sigma_hat: s.as_matrix().as_slice().to_vec(),
                });
            }
        }
    }
    let Some(first) = trials.first() else { return };
    for (k, o) in first.iter().enumerate() {
        let errors: Vec<f64> = trials.iter().map(|t| t[k].error).collect();
        let (mean, rms, stderr) = summarize(&errors);
        let thm2: Option<Vec<f64>> = trials.iter().map(|t| t[k].thm2).collect();
        let (thm2_mean, thm2_rms) = match thm2 {
            Some(v) => {
                let (m, r, _) = summarize(&v);
                (Some(m), Some(r))
            }
            None => (None, None),
        };
        records.push(Record {
            bound_thm1: o.thm1,
            bound_thm2: thm2_mean,
            bound_thm3: o.thm3,
            ..base(o.mech, TrialLabel::Mean, o.estimator, mean)
        });
        records.push(Record {
            bound_thm1: o.thm1,
            bound_thm2: thm2_rms,
            bound_thm3: o.thm3,
            ..base(o.mech, TrialLabel::Rms, o.estimator, rms)
        });
        records.push(base(o.mech, TrialLabel::Stderr, o.estimator, stderr));
    }
}

/// Rows of `sample` scaled by `1/p`, one curve per `p`.
fn scaled_baseline(
    config: &ExperimentConfig,
    n_samples: usize,
    ps: &[f64],
    records: &mut Vec<Record>,
) {
    let sample: Vec<Record> = records
        .iter()
        .filter(|r| {
            r.n_samples == n_samples
                && r.estimator == "sample"
                && !matches!(r.trial, TrialLabel::Index(_))
        })
        .cloned()
        .collect();
    for &p in ps {
        for r in &sample {
            records.push(Record {
                experiment: config.name.clone(),
                mech_param: Some(p),
                estimator: "sample_scaled".into(),
                rel_op_error: r.rel_op_error / p,
                bound_thm1: None,
                bound_thm2: None,
                bound_thm3: None,
                wall_ms: None,
                ..r.clone()
            });
        }
    }
}

/// Known-P estimator with the mean replaced by the per-coordinate mean of
/// the observed entries. Biased; kept as a labeled baseline.
pub fn plugin_mean_estimate(
    batch: &ObservationBatch,
    p: &SymmetricMatrix,
) -> Result<SymmetricMatrix> {
    let counts = batch.mask().counts();
    let mean: Vec<f64> = batch
        .values()
        .row_iter()
        .zip(&counts)
        .map(|(row, &c)| if c == 0 { 0.0 } else { row.sum() / c as f64 })
        .collect();
    let centered = batch.clone().with_known_mean(mean)?;
    Ok(estimate_known_p(&centered, p)?.sigma_hat)
}

/// One mechanism of an MCAR experiment.
struct McarArm {
    param: f64,
    mech: MaskMechanism,
    p: SymmetricMatrix,
}

fn run_mcar(
    config: &ExperimentConfig,
    opts: &RunOptions,
    model: &PopulationModel,
    arms: &[McarArm],
) -> Result<RunResult> {
    let sigma = model.sigma();
    let ctx = Ctx {
        config,
        sigma,
        norm: operator_norm(sigma),
        audit: opts.audit,
    };
    let c: &BoundConstants = &config.constants;
    let ones = SymmetricMatrix::ones(config.n)?;
    let has = |e: &str| config.has_estimator(e);
    let mut records = Vec::new();
    let mut audit = Vec::new();
    for (g, &nn) in config.grid_values().iter().enumerate() {
        let at_n = |e| grid_point_error(config.kind, format!("N={nn}"), e);
        let sample_bound = ctx
            .rel_bound(bound_thm1(sigma, &ones, nn, c))
            .map_err(at_n)?;
        let arm_bounds = arms
            .iter()
            .map(|a| ctx.rel_bound(bound_thm1(sigma, &a.p, nn, c)))
            .collect::<Result<Vec<_>>>()
            .map_err(at_n)?;
        let trials = (0..config.trials)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(config.seed, &[config.kind.id(), g as u64, r as u64]);
                let key = |a: u64| [g as u64, r as u64, a];
                let x = sample_gaussian(model, nn, derive_seed(seed, &[TAG_DATA]));
                let mut obs = Vec::new();
                if has("sample") {
                    let mut o = ctx.observe(&key(0), None, "sample", || {
                        sample_covariance(&x, &MeanMode::Zero)
                    })?;
                    o.thm1 = sample_bound;
                    obs.push(o);
                }
                for (a, arm) in arms.iter().enumerate() {
                    let mask = sample_mask(&arm.mech, nn, derive_seed(seed, &[TAG_MASK, a as u64]));
                    let batch = ObservationBatch::observe(&x, mask)?;
                    let k = key(a as u64 + 1);
                    if has("known_p") {
                        let mut o = ctx.observe(&k, Some(arm.param), "known_p", || {
                            Ok(estimate_known_p(&batch, &arm.p)?.sigma_hat)
                        })?;
                        o.thm1 = arm_bounds[a];
                        obs.push(o);
                    }
                    if has("unknown_p") {
                        let mut report = None;
                        let mut o = ctx.observe(&k, Some(arm.param), "unknown_p", || {
                            let r = estimate_unknown_p(&batch)?;
                            let s = r.sigma_hat.clone();
                            report = Some(r);
                            Ok(s)
                        })?;
                        let r = report.expect("estimate ran");
                        let p_hat = crate::masks::empirical_prob_matrix(batch.mask())?;
                        o.thm2 =
                            ctx.rel_bound(bound_thm2(sigma, &p_hat, &r.observed_pairs, nn, c))?;
                        obs.push(o);
                    }
                    if has("plugin_mean") {
                        obs.push(ctx.observe(&k, Some(arm.param), "plugin_mean", || {
                            plugin_mean_estimate(&batch, &arm.p)
                        })?);
                    }
                }
                Ok(obs)
            })
            .collect::<Vec<Result<Vec<Obs>>>>();
        let trials = trials
            .into_iter()
            .enumerate()
            .map(|(r, t)| {
                t.map_err(|e| grid_point_error(config.kind, format!("N={nn} trial={r}"), e))
            })
            .collect::<Result<Vec<_>>>()?;
        emit_point(config, nn, trials, &mut records, &mut audit);
        if has("sample") && config.kind == ExperimentKind::McarUniform {
            let ps: Vec<f64> = arms.iter().map(|a| a.param).collect();
            scaled_baseline(config, nn, &ps, &mut records);
        }
    }
    Ok(RunResult {
        records,
        audit: opts.audit.then(|| audit_log(config, sigma, audit)),
        sigma_norm: ctx.norm,
    })
}

fn audit_log(
    config: &ExperimentConfig,
    sigma: &SymmetricMatrix,
    snapshots: Vec<AuditSnapshot>,
) -> AuditLog {
    AuditLog {
        experiment: config.name.clone(),
        n: config.n,
        sigma: sigma.as_matrix().as_slice().to_vec(),
        snapshots,
    }
}

/// Uniform independent masks at each `p`: sample covariance, known-P and
/// unknown-P estimators, plus the `1/p`-scaled sample-covariance curve.
pub fn run_mcar_uniform(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunResult> {
    let Mechanism::Uniform { p } = &config.mechanism else {
        return Err(Error::Config(
            "mcar_uniform needs uniform probabilities".into(),
        ));
    };
    let model = build_model(config)?;
    let arms = p
        .iter()
        .map(|&p| {
            let arm = || -> Result<McarArm> {
                let mech = MaskMechanism::uniform_independent(config.n, p)?;
                Ok(McarArm {
                    param: p,
                    p: prob_matrix(&mech)?,
                    mech,
                })
            };
            arm().map_err(|e| grid_point_error(config.kind, format!("p={p}"), e))
        })
        .collect::<Result<Vec<_>>>()?;
    run_mcar(config, opts, &model, &arms)
}

/// Independent masks with probabilities proportional to the standard
/// deviations, calibrated to each target observation fraction.
pub fn run_mcar_nonuniform(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunResult> {
    let Mechanism::Nonuniform { fractions } = &config.mechanism else {
        return Err(Error::Config(
            "mcar_nonuniform needs observation fractions".into(),
        ));
    };
    let model = build_model(config)?;
    let variances = model.sigma().diagonal();
    let arms = fractions
        .iter()
        .map(|&f| {
            let arm = || -> Result<McarArm> {
                let (_, probs) = proportional_probabilities(&variances, f)?;
                let mech = MaskMechanism::independent(probs)?;
                Ok(McarArm {
                    param: f,
                    p: prob_matrix(&mech)?,
                    mech,
                })
            };
            arm().map_err(|e| grid_point_error(config.kind, format!("fraction={f}"), e))
        })
        .collect::<Result<Vec<_>>>()?;
    run_mcar(config, opts, &model, &arms)
}

/// Time-varying schedule with complete observations in the first block:
/// the CMCAR estimator (knows each `P^(t)`) against the unknown-P estimator
/// pooled over all blocks so far. Rows are written at every block boundary
/// until the cumulative sample count reaches the grid maximum.
pub fn run_cmcar(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunResult> {
    let Mechanism::Cmcar {
        m,
        first_block,
        block_sizes,
    } = &config.mechanism
    else {
        return Err(Error::Config("cmcar needs a block schedule".into()));
    };
    let model = build_model(config)?;
    let sigma = model.sigma();
    let ctx = Ctx {
        config,
        sigma,
        norm: operator_norm(sigma),
        audit: opts.audit,
    };
    let c = &config.constants;
    let horizon = config.grid_max();
    let has = |e: &str| config.has_estimator(e);
    let mut records = Vec::new();
    let mut audit = Vec::new();
    for (b, &nt) in block_sizes.iter().enumerate() {
        let schedule = cmcar_uniform_schedule(*m, config.n)
            .and_then(|s| s.with_block_sizes(vec![*first_block, nt]))
            .map_err(|e| grid_point_error(config.kind, format!("N_t={nt}"), e))?;
        let n_blocks = 1 + horizon.saturating_sub(*first_block).div_ceil(nt);
        let param = Some(nt as f64);
        let trials = (0..config.trials)
            .into_par_iter()
            .map(|r| -> Result<Vec<(usize, Vec<Obs>)>> {
                let seed = derive_seed(config.seed, &[config.kind.id(), b as u64, r as u64]);
                let mut acc = CmcarAccumulator::new(config.n);
                let mut pooled = UnknownPAccumulator::new(config.n);
                let mut ranks = Vec::with_capacity(n_blocks);
                let mut out = Vec::with_capacity(n_blocks);
                for t in 1..=n_blocks {
                    let history = if t == 1 {
                        None
                    } else {
                        Some(acc.current_estimate()?)
                    };
                    let block = draw_cmcar_block(
                        &schedule,
                        &model,
                        t,
                        history.as_ref(),
                        derive_seed(seed, &[t as u64]),
                    )?;
                    acc.ingest(&block.batch, &block.prob_matrix)?;
                    pooled.ingest(&block.batch)?;
                    ranks.push(BlockRanks {
                        srank_min: srank_min(sigma, &block.prob_matrix)?,
                        srank_2: srank_2(sigma, &block.prob_matrix)?,
                        n_samples: block.batch.n_samples(),
                    });
                    let key = [b as u64, r as u64, t as u64];
                    let mut obs = Vec::new();
                    if has("cmcar") {
                        let mut o = ctx.observe(&key, param, "cmcar", || acc.current_estimate())?;
                        let inputs = CmcarBoundInputs {
                            blocks: ranks.clone(),
                        };
                        o.thm3 = ctx.rel_bound(bound_thm3(&inputs, sigma, c))?;
                        obs.push(o);
                    }
                    if has("unknown_p_pooled") {
                        let mut support = None;
                        let mut o = ctx.observe(&key, param, "unknown_p_pooled", || {
                            let rep = pooled.estimate()?;
                            support = Some(rep.observed_pairs.clone());
                            Ok(rep.sigma_hat)
                        })?;
                        let p_hat = pooled.empirical_prob_matrix()?;
                        let support = support.expect("estimate ran");
                        o.thm2 = ctx.rel_bound(bound_thm2(
                            sigma,
                            &p_hat,
                            &support,
                            pooled.total_n(),
                            c,
                        ))?;
                        obs.push(o);
                    }
                    out.push((acc.total_n(), obs));
                }
                Ok(out)
            })
            .collect::<Vec<_>>();
        let trials = trials
            .into_iter()
            .enumerate()
            .map(|(r, t)| {
                t.map_err(|e| grid_point_error(config.kind, format!("N_t={nt} trial={r}"), e))
            })
            .collect::<Result<Vec<_>>>()?;
        for t in 0..n_blocks {
            let nn = trials[0][t].0;
            let per_trial: Vec<Vec<Obs>> = trials.iter().map(|tr| tr[t].1.clone()).collect();
            emit_point(config, nn, per_trial, &mut records, &mut audit);
        }
    }
    Ok(RunResult {
        records,
        audit: opts.audit.then(|| audit_log(config, sigma, audit)),
        sigma_norm: ctx.norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn summary_statistics() {
        let (m, r, s) = summarize(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(r, 5f64.sqrt());
        assert_eq!(s, 1.0);
        assert_eq!(summarize(&[4.0]).2, 0.0);
    }

    #[test]
    fn proportional_probabilities_hit_target() {
        let variances: Vec<f64> = (0..50).map(|i| (-6.0 * i as f64 / 49.0).exp()).collect();
        let mut last_rho = 0.0;
        for f in [0.28, 0.40, 0.50, 1.0] {
            let (rho, p) = proportional_probabilities(&variances, f).unwrap();
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            assert!((mean - f).abs() <= 1e-12, "{mean} vs {f}");
            assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
            assert!(rho > last_rho);
            last_rho = rho;
        }
        assert!(proportional_probabilities(&variances, 0.0).is_err());
        assert!(proportional_probabilities(&[1.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn plugin_mean_baseline_centers_observed_entries() {
        let x = nalgebra::DMatrix::from_column_slice(1, 2, &[1.0, 3.0]);
        let b = ObservationBatch::complete(&x).unwrap();
        let s = plugin_mean_estimate(&b, &SymmetricMatrix::ones(1).unwrap()).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
    }
}
