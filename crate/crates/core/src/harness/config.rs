//! Experiment configuration files.
//!
//! Configs are TOML with one `[experiment]` section, optional `[spectrum]`,
//! `[grid]` and `[bounds]` sections, and at most one mechanism section whose
//! name matches `experiment.kind`. Unknown keys and sections are errors.
//!
//! ```toml
//! [experiment]
//! kind = "mcar_uniform"
//! n = 50
//! trials = 20
//! seed = 1
//!
//! [grid]
//! count = 20
//! min = 15
//! max = 2500
//!
//! [mcar_uniform]
//! p = [0.4, 0.6, 0.8]
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::datagen::{SkewedRecipe, SpectrumKind, SpectrumSpec};
use crate::diagnostics::BoundConstants;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    McarUniform,
    McarNonuniform,
    Cmcar,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::McarUniform => "mcar_uniform",
            Self::McarNonuniform => "mcar_nonuniform",
            Self::Cmcar => "cmcar",
        }
    }

    /// Seed tag of the experiment.
    pub fn id(self) -> u64 {
        match self {
            Self::McarUniform => 1,
            Self::McarNonuniform => 2,
            Self::Cmcar => 3,
        }
    }

    fn default_estimators(self) -> &'static [&'static str] {
        match self {
            Self::McarUniform => &["sample", "known_p", "unknown_p"],
            Self::McarNonuniform => &["sample", "unknown_p"],
            Self::Cmcar => &["cmcar", "unknown_p_pooled"],
        }
    }

    fn allowed_estimators(self) -> &'static [&'static str] {
        match self {
            Self::McarUniform | Self::McarNonuniform => {
                &["sample", "known_p", "unknown_p", "plugin_mean"]
            }
            Self::Cmcar => &["cmcar", "unknown_p_pooled"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grid/trial overrides applied on top of a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 100 sample sizes, 100 trials.
    Paper,
    /// 20 sample sizes, 20 trials.
    Desk,
}

impl Preset {
    pub fn grid_count(self) -> usize {
        match self {
            Self::Paper => 100,
            Self::Desk => 20,
        }
    }

    pub fn trials(self) -> usize {
        match self {
            Self::Paper => 100,
            Self::Desk => 20,
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "desk" => Ok(Self::Desk),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected paper or desk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    spectrum: Option<SpectrumSection>,
    grid: Option<GridSection>,
    bounds: Option<RawBounds>,
    mcar_uniform: Option<McarUniformSection>,
    mcar_nonuniform: Option<McarNonuniformSection>,
    cmcar: Option<CmcarSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: ExperimentKind,
    name: Option<String>,
    n: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    estimators: Option<Vec<String>>,
    #[serde(default)]
    record_timing: bool,
    output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    c: Option<f64>,
    c_tilde: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
}

/// Population covariance of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumSection {
    Geometric {
        erank: f64,
        /// Eigenvector seed; defaults to the experiment seed.
        seed: Option<u64>,
    },
    Skewed {
        decay: Option<f64>,
        correlation: Option<f64>,
    },
}

/// Sample sizes `N`; endpoints are included.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub count: usize,
    pub min: usize,
    /// Defaults to `50 n`.
    pub max: Option<usize>,
    #[serde(default = "yes")]
    pub log_spaced: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McarUniformSection {
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McarNonuniformSection {
    /// Target mean observation fractions.
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmcarSection {
    /// Subset size of the schedule; defaults to `round(0.1 n)`.
    pub m: Option<usize>,
    #[serde(default = "first_block")]
    pub first_block: usize,
    /// Constant `N_t` for `t >= 2`; one curve per value.
    pub block_sizes: Vec<usize>,
}

fn first_block() -> usize {
    10
}

/// Mechanism parameters of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    Uniform {
        p: Vec<f64>,
    },
    Nonuniform {
        fractions: Vec<f64>,
    },
    Cmcar {
        m: usize,
        first_block: usize,
        block_sizes: Vec<usize>,
    },
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub name: String,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<String>,
    pub record_timing: bool,
    /// Output file name (relative to the output directory).
    pub output: String,
    pub spectrum: SpectrumSpec,
    pub grid: GridSection,
    pub mechanism: Mechanism,
    pub constants: BoundConstants,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    /// Sample sizes of the grid, ascending and without duplicates.
    pub fn grid_values(&self) -> Vec<usize> {
        let g = &self.grid;
        let max = g.max.unwrap_or(50 * self.n);
        if g.count == 1 {
            return vec![max];
        }
        let mut out: Vec<usize> = (0..g.count)
            .map(|k| {
                let frac = k as f64 / (g.count - 1) as f64;
                let v = if g.log_spaced {
                    ((g.min as f64).ln() + frac * ((max as f64).ln() - (g.min as f64).ln())).exp()
                } else {
                    g.min as f64 + frac * (max - g.min) as f64
                };
                v.round() as usize
            })
            .collect();
        // endpoints exactly
        out[0] = g.min;
        *out.last_mut().unwrap() = max;
        out.dedup();
        out
    }

    pub fn grid_max(&self) -> usize {
        self.grid.max.unwrap_or(50 * self.n)
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        self.grid.count = preset.grid_count();
        self.trials = preset.trials();
    }

    pub fn has_estimator(&self, tag: &str) -> bool {
        self.estimators.iter().any(|e| e == tag)
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        build(raw)
    }
}

fn build(raw: RawConfig) -> Result<ExperimentConfig> {
    let kind = raw.experiment.kind;
    let present = [
        (ExperimentKind::McarUniform, raw.mcar_uniform.is_some()),
        (
            ExperimentKind::McarNonuniform,
            raw.mcar_nonuniform.is_some(),
        ),
        (ExperimentKind::Cmcar, raw.cmcar.is_some()),
    ];
    for (k, is_present) in present {
        if is_present && k != kind {
            return Err(config_err(format!(
                "section [{k}] does not apply to kind {kind}"
            )));
        }
    }

    let n = raw.experiment.n.unwrap_or(50);
    if n < 2 {
        return Err(config_err(format!("n must be at least 2, got {n}")));
    }
    let trials = raw.experiment.trials.unwrap_or(100);
    if trials == 0 {
        return Err(config_err("trials must be at least 1"));
    }
    let seed = raw.experiment.seed.unwrap_or(1);

    let estimators = match raw.experiment.estimators {
        Some(list) => {
            if list.is_empty() {
                return Err(config_err("estimators must not be empty"));
            }
            for e in &list {
                if !kind.allowed_estimators().contains(&e.as_str()) {
                    return Err(config_err(format!(
                        "estimator {e:?} not available for {kind} (allowed: {})",
                        kind.allowed_estimators().join(", ")
                    )));
                }
            }
            list
        }
        None => kind
            .default_estimators()
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };

    let spectrum = match raw.spectrum {
        Some(SpectrumSection::Geometric { erank, seed: s }) => {
            if !(erank > 1.0 && erank < n as f64) {
                return Err(config_err(format!(
                    "spectrum erank must lie in (1, {n}), got {erank}"
                )));
            }
            SpectrumSpec::geometric(n, erank, s.unwrap_or(seed))
        }
        Some(SpectrumSection::Skewed { decay, correlation }) => {
            let d = SkewedRecipe::default();
            let recipe = SkewedRecipe {
                decay: decay.unwrap_or(d.decay),
                correlation: correlation.unwrap_or(d.correlation),
            };
            if !(recipe.decay >= 0.0 && recipe.correlation.abs() < 1.0) {
                return Err(config_err(
                    "skewed spectrum needs decay >= 0 and |correlation| < 1",
                ));
            }
            SpectrumSpec {
                n,
                kind: SpectrumKind::Skewed(recipe),
                seed,
            }
        }
        None => match kind {
            ExperimentKind::McarNonuniform => SpectrumSpec::skewed(n, seed),
            _ => SpectrumSpec::geometric(n, 4.0_f64.min(n as f64 - 0.5), seed),
        },
    };

    let grid = raw.grid.unwrap_or(GridSection {
        count: 100,
        min: 15,
        max: None,
        log_spaced: true,
    });
    let max = grid.max.unwrap_or(50 * n);
    if grid.count == 0 {
        return Err(config_err("grid count must be at least 1"));
    }
    if grid.min < 2 || max < grid.min {
        return Err(config_err(format!(
            "grid needs 2 <= min <= max, got min {} max {max}",
            grid.min
        )));
    }

    let check_prob = |what: &str, v: f64| {
        if v > 0.0 && v <= 1.0 {
            Ok(())
        } else {
            Err(config_err(format!("{what} must lie in (0, 1], got {v}")))
        }
    };
    let mechanism = match kind {
        ExperimentKind::McarUniform => {
            let p = raw
                .mcar_uniform
                .map(|s| s.p)
                .unwrap_or_else(|| vec![0.4, 0.6, 0.8]);
            if p.is_empty() {
                return Err(config_err("mcar_uniform.p must not be empty"));
            }
            for &v in &p {
                check_prob("observation probability", v)?;
            }
            Mechanism::Uniform { p }
        }
        ExperimentKind::McarNonuniform => {
            let fractions = raw
                .mcar_nonuniform
                .map(|s| s.fractions)
                .unwrap_or_else(|| vec![0.28, 0.40, 0.50]);
            if fractions.is_empty() {
                return Err(config_err("mcar_nonuniform.fractions must not be empty"));
            }
            for &v in &fractions {
                check_prob("observation fraction", v)?;
            }
            Mechanism::Nonuniform { fractions }
        }
        ExperimentKind::Cmcar => {
            let sec = raw.cmcar.unwrap_or(CmcarSection {
                m: None,
                first_block: 10,
                block_sizes: vec![10, 50, 100],
            });
            let m = sec.m.unwrap_or(((0.1 * n as f64).round() as usize).max(1));
            if m == 0 || m > n {
                return Err(config_err(format!("cmcar.m must lie in 1..={n}, got {m}")));
            }
            if sec.first_block == 0 || sec.block_sizes.is_empty() || sec.block_sizes.contains(&0) {
                return Err(config_err(
                    "cmcar block sizes must be non-empty and at least 1",
                ));
            }
            Mechanism::Cmcar {
                m,
                first_block: sec.first_block,
                block_sizes: sec.block_sizes,
            }
        }
    };

    let constants = match raw.bounds {
        Some(b) => {
            let d = BoundConstants::default();
            BoundConstants {
                c: b.c.unwrap_or(d.c),
                c_tilde: b.c_tilde.unwrap_or(d.c_tilde),
                c1: b.c1.unwrap_or(d.c1),
                c2: b.c2.unwrap_or(d.c2),
            }
        }
        None => BoundConstants::default(),
    };
    constants
        .validate()
        .map_err(|e| config_err(e.to_string()))?;

    let name = raw
        .experiment
        .name
        .unwrap_or_else(|| kind.as_str().to_string());
    if name.is_empty() || name.contains([',', '"', '\n', '/']) {
        return Err(config_err(format!(
            "experiment name {name:?} is not a plain identifier"
        )));
    }
    let output = raw
        .experiment
        .output
        .unwrap_or_else(|| format!("{name}.csv"));

    Ok(ExperimentConfig {
        kind,
        name,
        n,
        trials,
        seed,
        estimators,
        record_timing: raw.experiment.record_timing,
        output,
        spectrum,
        grid,
        mechanism,
        constants,
    })
}
