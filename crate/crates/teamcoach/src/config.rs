//! Experiment configuration, read from TOML.
//!
//! Every field has a default, so an empty file (or no file) describes the
//! standard protocol: 500 training and 100 evaluation demonstrations,
//! supervision settings 150@100%, 500@30% and 500@100%, and the full
//! strategy sweep with `c = 1`, `p_a = 1`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use teamcoach_core::compat::ValueConfig;
use teamcoach_core::domains::{Domain, DomainKind};
use teamcoach_core::learner::LearnerConfig;

use crate::error::{Error, Result};

/// Offset of the evaluation episodes' seeds from the base seed.
pub const EVAL_SEED_OFFSET: u64 = 1_000_000;
/// Offset of the benchmark episodes' seeds from the base seed.
pub const BENCHMARK_SEED_OFFSET: u64 = 2_000_000;
/// Seed distance between training repetitions.
pub const TRAINING_SEED_STRIDE: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainKind,
    /// Base seed; every other seed is derived from it.
    pub seed: u64,
    /// Output directory; the command line may override it.
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    pub learner: LearnerConfig,
    pub value: ValueSettings,
    pub benchmark: BenchmarkConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainKind::Tiny,
            seed: 0,
            out: None,
            data: DataConfig::default(),
            learner: LearnerConfig::default(),
            value: ValueSettings::default(),
            benchmark: BenchmarkConfig::default(),
        }
    }
}

/// Size and supervision ratio of one training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSet {
    pub count: usize,
    pub ratio: f64,
}

impl TrainingSet {
    /// File-name friendly label, e.g. `500at30`.
    pub fn label(&self) -> String {
        format!("{}at{}", self.count, (self.ratio * 100.0).round() as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Vec<TrainingSet>,
    pub eval: usize,
    /// Number of independent training repetitions per setting.
    pub training_seeds: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: vec![
                TrainingSet { count: 150, ratio: 1.0 },
                TrainingSet { count: 500, ratio: 0.3 },
                TrainingSet { count: 500, ratio: 1.0 },
            ],
            eval: 100,
            training_seeds: 1,
        }
    }
}

/// Policy evaluation settings; `gamma` defaults to the domain's discount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValueSettings {
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ValueSettings {
    fn default() -> Self {
        let v = ValueConfig::default();
        ValueSettings {
            gamma: None,
            tol: v.tol,
            max_sweeps: v.max_sweeps,
        }
    }
}

impl ValueSettings {
    pub fn resolve(&self, domain: &Domain) -> ValueConfig {
        ValueConfig {
            gamma: self.gamma.unwrap_or(domain.config().gamma),
            tol: self.tol,
            max_sweeps: self.max_sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub episodes: usize,
    pub cost: f64,
    pub acceptance: f64,
    pub deltas: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Run the rule-based strategy; only domains with a compatible set
    /// support it, and those run it by default.
    pub rule: Option<bool>,
    /// Training setting whose first repetition drives the benchmark.
    pub model: TrainingSet,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            episodes: 100,
            cost: 1.0,
            acceptance: 1.0,
            deltas: vec![0.0, 1.0, 2.0, 5.0, 10.0, 20.0],
            thetas: vec![0.0, 0.3, 0.5, 0.8],
            rule: None,
            model: TrainingSet { count: 500, ratio: 1.0 },
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file; a missing path yields the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ExperimentConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| Error::ConfigSyntax {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let d = &self.data;
        if d.train.is_empty() {
            return bad("data.train lists no training set".into());
        }
        for (i, t) in d.train.iter().enumerate() {
            if t.count == 0 {
                return bad(format!("data.train[{i}].count must be positive"));
            }
            if !(0.0..=1.0).contains(&t.ratio) {
                return bad(format!("data.train[{i}].ratio {} not in [0, 1]", t.ratio));
            }
            if d.train[..i].iter().any(|u| u.label() == t.label()) {
                return bad(format!("data.train[{i}] duplicates setting {}", t.label()));
            }
        }
        if d.eval == 0 || d.training_seeds == 0 {
            return bad("data.eval and data.training_seeds must be positive".into());
        }
        if d.training_seeds as u64 * TRAINING_SEED_STRIDE > EVAL_SEED_OFFSET {
            return bad(format!(
                "at most {} training seeds",
                EVAL_SEED_OFFSET / TRAINING_SEED_STRIDE
            ));
        }
        let b = &self.benchmark;
        if b.episodes == 0 {
            return bad("benchmark.episodes must be positive".into());
        }
        if !(b.cost >= 0.0) || !b.cost.is_finite() {
            return bad(format!("benchmark.cost {} must be finite and nonnegative", b.cost));
        }
        if !(0.0..=1.0).contains(&b.acceptance) {
            return bad(format!("benchmark.acceptance {} not in [0, 1]", b.acceptance));
        }
        if b.deltas.iter().any(|v| !v.is_finite()) {
            return bad("benchmark.deltas must be finite".into());
        }
        if b.thetas.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("benchmark.thetas must lie in [0, 1]".into());
        }
        if !d.train.iter().any(|t| t.label() == b.model.label()) {
            return bad(format!("benchmark.model {} is not among data.train", b.model.label()));
        }
        if let Some(g) = self.value.gamma {
            if !(g > 0.0 && g < 1.0) {
                return bad(format!("value.gamma {g} not in (0, 1)"));
            }
        }
        if !(self.value.tol > 0.0) {
            return bad("value.tol must be positive".into());
        }
        Ok(())
    }

    pub fn eval_seed(&self) -> u64 {
        self.seed.wrapping_add(EVAL_SEED_OFFSET)
    }

    pub fn benchmark_seed(&self) -> u64 {
        self.seed.wrapping_add(BENCHMARK_SEED_OFFSET)
    }

    /// First episode seed of training repetition `rep`; all settings of a
    /// repetition share the seeds, so smaller sets are prefixes of larger ones.
    pub fn training_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(rep as u64 * TRAINING_SEED_STRIDE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: ExperimentConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.domain = DomainKind::Rescue2;
        cfg.value.gamma = Some(0.9);
        cfg.benchmark.deltas = vec![0.5];
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_overrides_fields() {
        let cfg: ExperimentConfig =
            toml::from_str("domain = \"movers\"\n[benchmark]\ncost = 0.0\n[[data.train]]\ncount = 20\nratio = 0.5\n")
                .unwrap();
        assert_eq!(cfg.domain, DomainKind::Movers);
        assert_eq!(cfg.benchmark.cost, 0.0);
        assert_eq!(cfg.data.train, vec![TrainingSet { count: 20, ratio: 0.5 }]);
        assert!(cfg.validate().is_err(), "benchmark model 500at100 is not trained");
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(toml::from_str::<ExperimentConfig>("sead = 3").is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.benchmark.acceptance = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.data.train.push(TrainingSet { count: 500, ratio: 0.3 });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(TrainingSet { count: 500, ratio: 0.3 }.label(), "500at30");
        assert_eq!(TrainingSet { count: 150, ratio: 1.0 }.label(), "150at100");
    }
}
