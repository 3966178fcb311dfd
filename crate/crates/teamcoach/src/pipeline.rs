//! The staged experiment: generate → train → infer → value → benchmark →
//! report. Every stage writes its artifacts under the run directory and
//! records their hashes in the manifest; a stage whose inputs and outputs
//! are unchanged is skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde_json::json;
use teamcoach_core::compat::{evaluate_team_value, CompatibilityTable};
use teamcoach_core::domains::Domain;
use teamcoach_core::filter::inference_accuracy;
use teamcoach_core::intervention::{
    run_benchmark, value_grid, DomainCompatibility, StrategyConfig, StrategyContext, StrategyKind,
};
use teamcoach_core::learner::{fit, LearnerConfig};
use teamcoach_core::model::{validate_behavior, AgentBehaviorModel, LabeledDataset};
use teamcoach_core::synthetic::{assemble_dataset, generate_dataset, GroundTruthTeam};

use crate::config::{ExperimentConfig, TrainingSet};
use crate::error::{Error, Result};
use crate::files::{read_csv, read_json, sha256_bytes, sha256_file, write_csv, write_json};
use crate::manifest::{RunManifest, StageRecord, TOOL_VERSION};
use crate::report;
use crate::rows::{AccuracyRow, AccuracySummaryRow, ElboRow, EpisodeRow, FitRow, StrategyRow, ValueRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Generate,
    Train,
    Infer,
    Value,
    Benchmark,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Generate,
        Stage::Train,
        Stage::Infer,
        Stage::Value,
        Stage::Benchmark,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Train => "train",
            Stage::Infer => "infer",
            Stage::Value => "value",
            Stage::Benchmark => "benchmark",
            Stage::Report => "report",
        }
    }

    /// Stages whose artifacts this stage reads.
    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Generate => &[],
            Stage::Train => &[Stage::Generate],
            Stage::Infer => &[Stage::Generate, Stage::Train],
            Stage::Value => &[Stage::Train],
            Stage::Benchmark => &[Stage::Train, Stage::Value],
            Stage::Report => &[Stage::Infer, Stage::Benchmark],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Ran { seconds: f64 },
    Skipped,
}

/// Artifact locations, relative to the run directory.
pub mod paths {
    use crate::config::TrainingSet;

    pub const EVAL_DATA: &str = "data/eval.json";
    pub const FITS: &str = "models/fits.csv";
    pub const ACCURACY: &str = "infer/accuracy.csv";
    pub const ACCURACY_SUMMARY: &str = "infer/accuracy_summary.csv";
    pub const VALUE_TABLE: &str = "value/table.json";
    pub const VALUE_SUMMARY: &str = "value/summary.csv";
    pub const EPISODES: &str = "benchmark/episodes.csv";
    pub const STRATEGIES: &str = "benchmark/strategies.csv";
    pub const REPORT_STRATEGIES: &str = "report/strategies.csv";
    pub const REPORT_ACCURACY: &str = "report/accuracy.csv";
    pub const REPORT_TEXT: &str = "report/report.txt";

    pub fn train_data(set: &TrainingSet, rep: usize) -> String {
        format!("data/train_{}_rep{rep}.json", set.label())
    }

    pub fn model(set: &TrainingSet, rep: usize) -> String {
        format!("models/{}_rep{rep}.json", set.label())
    }

    pub fn elbo(set: &TrainingSet, rep: usize) -> String {
        format!("models/{}_rep{rep}_elbo.csv", set.label())
    }
}

/// One experiment run rooted at a directory.
#[derive(Debug)]
pub struct Pipeline {
    cfg: ExperimentConfig,
    dir: PathBuf,
    jobs: usize,
    domain: Domain,
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig, dir: impl Into<PathBuf>, jobs: usize) -> Result<Self> {
        cfg.validate()?;
        let domain = Domain::by_kind(cfg.domain)?;
        Ok(Pipeline {
            cfg,
            dir: dir.into(),
            jobs: jobs.max(1),
            domain,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Runs every stage in order.
    pub fn run_all(&self) -> Result<Vec<(Stage, Outcome)>> {
        Stage::ALL.into_iter().map(|s| Ok((s, self.run(s)?))).collect()
    }

    /// Runs one stage unless its recorded inputs and artifacts are current.
    pub fn run(&self, stage: Stage) -> Result<Outcome> {
        let mut manifest = RunManifest::load(&self.dir)?;
        let mut upstream = BTreeMap::new();
        for &up in stage.upstream() {
            let record = manifest.verify(&self.dir, up.name())?;
            upstream.insert(up.name(), record.artifacts.clone());
        }
        let input = json!({
            "stage": stage.name(),
            "tool_version": TOOL_VERSION,
            "config": self.stage_key(stage),
            "upstream": upstream,
        });
        let input_hash = sha256_bytes(input.to_string().as_bytes());
        if manifest.is_current(&self.dir, stage.name(), &input_hash)? {
            return Ok(Outcome::Skipped);
        }
        let start = Instant::now();
        let written = self.execute(stage)?;
        let seconds = start.elapsed().as_secs_f64();
        let mut artifacts = BTreeMap::new();
        for rel in written {
            let hash = sha256_file(&self.dir.join(&rel))?.ok_or_else(|| Error::MissingArtifact {
                stage: stage.name(),
                path: rel.clone(),
                expected: "a freshly written file".into(),
            })?;
            artifacts.insert(rel, hash);
        }
        manifest.tool_version = TOOL_VERSION.into();
        manifest.config_hash = sha256_bytes(self.cfg.to_toml().as_bytes());
        manifest.stages.insert(
            stage.name().into(),
            StageRecord {
                input_hash,
                artifacts,
                seconds,
            },
        );
        manifest.save(&self.dir)?;
        std::fs::write(self.dir.join("config.toml"), self.cfg.to_toml()).map_err(|source| Error::Io {
            path: self.dir.join("config.toml"),
            source,
        })?;
        Ok(Outcome::Ran { seconds })
    }

    /// The part of the configuration a stage depends on directly.
    fn stage_key(&self, stage: Stage) -> serde_json::Value {
        let c = &self.cfg;
        match stage {
            Stage::Generate => json!({ "domain": c.domain, "seed": c.seed, "data": c.data }),
            Stage::Train => json!({ "learner": c.learner }),
            Stage::Infer | Stage::Report => json!({}),
            Stage::Value => json!({
                "value": self.cfg.value.resolve(&self.domain),
                "model": c.benchmark.model,
            }),
            Stage::Benchmark => json!({ "benchmark": c.benchmark, "seed": c.seed }),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn execute(&self, stage: Stage) -> Result<Vec<String>> {
        match stage {
            Stage::Generate => self.generate(),
            Stage::Train => self.train(),
            Stage::Infer => self.infer(),
            Stage::Value => self.value(),
            Stage::Benchmark => self.benchmark(),
            Stage::Report => report::write_report(&self.dir, &self.domain),
        }
    }

    fn training_runs(&self) -> Vec<(TrainingSet, usize)> {
        (0..self.cfg.data.training_seeds)
            .flat_map(|rep| self.cfg.data.train.iter().map(move |&set| (set, rep)))
            .collect()
    }

    fn generate(&self) -> Result<Vec<String>> {
        let team = GroundTruthTeam::new(&self.domain)?;
        let data = &self.cfg.data;
        let longest = data.train.iter().map(|t| t.count).max().unwrap_or(0);
        let mut written = Vec::new();
        for rep in 0..data.training_seeds {
            let full = generate_dataset(&team, longest, 1.0, self.cfg.training_seed(rep))?;
            for set in &data.train {
                let prefix = full.trajectories[..set.count].to_vec();
                let rel = paths::train_data(set, rep);
                write_json(&self.path(&rel), &assemble_dataset(prefix, set.ratio))?;
                written.push(rel);
            }
        }
        let eval = generate_dataset(&team, data.eval, 1.0, self.cfg.eval_seed())?;
        write_json(&self.path(paths::EVAL_DATA), &eval)?;
        written.push(paths::EVAL_DATA.into());
        Ok(written)
    }

    fn load_dataset(&self, rel: &str) -> Result<LabeledDataset> {
        let data: LabeledDataset = read_json(&self.path(rel))?;
        data.check(self.domain.task(), &self.domain.config().latent_sizes())?;
        Ok(data)
    }

    fn load_models(&self, rel: &str) -> Result<Vec<AgentBehaviorModel>> {
        let path = self.path(rel);
        let models: Vec<AgentBehaviorModel> = read_json(&path)?;
        let task = self.domain.task();
        if models.len() != task.n_agents() {
            return Err(Error::InvalidArtifact {
                path,
                details: format!("{} models for {} agents", models.len(), task.n_agents()),
            });
        }
        for (i, m) in models.iter().enumerate() {
            let violations = validate_behavior(m, Some((task, i)));
            if !violations.is_empty() {
                return Err(Error::InvalidArtifact {
                    path,
                    details: format!("model of agent {i}: {violations:?}"),
                });
            }
        }
        Ok(models)
    }

    fn train(&self) -> Result<Vec<String>> {
        let runs = self.training_runs();
        let sizes = self.domain.config().latent_sizes();
        let fits = par_map(self.jobs, &runs, |&(set, rep)| {
            let data = self.load_dataset(&paths::train_data(&set, rep))?;
            let cfg = LearnerConfig {
                seed: self.cfg.learner.seed.wrapping_add(rep as u64),
                ..self.cfg.learner
            };
            let result = fit(&data, self.domain.task(), &sizes, &cfg)?;
            let model = paths::model(&set, rep);
            write_json(&self.path(&model), &result.models)?;
            let elbo = paths::elbo(&set, rep);
            let rows: Vec<ElboRow> = result
                .elbo
                .iter()
                .enumerate()
                .map(|(iteration, &elbo)| ElboRow { iteration, elbo })
                .collect();
            write_csv(&self.path(&elbo), &rows)?;
            let summary = FitRow {
                setting: set.label(),
                count: set.count,
                ratio: set.ratio,
                rep,
                iterations: result.elbo.len(),
                converged: result.converged,
                final_elbo: result.elbo.last().copied().unwrap_or(f64::NAN),
            };
            Ok((vec![model, elbo], summary))
        })?;
        let mut written = Vec::new();
        let mut rows = Vec::new();
        for (files, row) in fits {
            written.extend(files);
            rows.push(row);
        }
        write_csv(&self.path(paths::FITS), &rows)?;
        written.push(paths::FITS.into());
        Ok(written)
    }

    fn infer(&self) -> Result<Vec<String>> {
        let eval = self.load_dataset(paths::EVAL_DATA)?;
        let runs = self.training_runs();
        let per_run = par_map(self.jobs, &runs, |&(set, rep)| {
            let models = self.load_models(&paths::model(&set, rep))?;
            Ok(inference_accuracy(self.domain.task(), &models, &eval)?)
        })?;
        let domain = self.domain.kind().to_string();
        let mut rows = Vec::new();
        for (&(set, rep), acc) in runs.iter().zip(&per_run) {
            for (tr, &accuracy) in eval.trajectories.iter().zip(acc) {
                rows.push(AccuracyRow {
                    domain: domain.clone(),
                    setting: set.label(),
                    count: set.count,
                    ratio: set.ratio,
                    rep,
                    episode_seed: tr.seed,
                    accuracy,
                });
            }
        }
        let summary = AccuracySummaryRow::aggregate(&rows, &self.domain);
        write_csv(&self.path(paths::ACCURACY), &rows)?;
        write_csv(&self.path(paths::ACCURACY_SUMMARY), &summary)?;
        Ok(vec![paths::ACCURACY.into(), paths::ACCURACY_SUMMARY.into()])
    }

    fn benchmark_models(&self) -> Result<Vec<AgentBehaviorModel>> {
        self.load_models(&paths::model(&self.cfg.benchmark.model, 0))
    }

    fn value(&self) -> Result<Vec<String>> {
        let models = self.benchmark_models()?;
        let vcfg = self.cfg.value.resolve(&self.domain);
        let table = evaluate_team_value(self.domain.task(), &models, &vcfg)?;
        write_json(&self.path(paths::VALUE_TABLE), &table)?;
        let s0 = self.domain.task().initial_state;
        let row = ValueRow {
            domain: self.domain.kind().to_string(),
            model: self.cfg.benchmark.model.label(),
            gamma: table.gamma,
            states: table.num_states,
            profiles: table.num_profiles(),
            sweeps: table.sweeps,
            residual: table.residual,
            initial_best_profile: table.best_profile(s0),
            initial_best_value: table.best_value(s0),
        };
        write_csv(&self.path(paths::VALUE_SUMMARY), &[row])?;
        Ok(vec![paths::VALUE_TABLE.into(), paths::VALUE_SUMMARY.into()])
    }

    /// Strategies of the sweep: the baselines, the rule-based strategy where
    /// available, and the value-based grid.
    pub fn strategies(&self) -> Vec<StrategyConfig> {
        let b = &self.cfg.benchmark;
        let base = |kind| StrategyConfig {
            cost: b.cost,
            acceptance: b.acceptance,
            ..StrategyConfig::new(kind)
        };
        let mut out = vec![base(StrategyKind::None), base(StrategyKind::Centralized)];
        if b.rule.unwrap_or_else(|| self.domain.has_compatible_set()) {
            out.push(base(StrategyKind::Rule));
        }
        out.extend(value_grid(&b.deltas, &b.thetas, b.cost, b.acceptance));
        out
    }

    fn benchmark(&self) -> Result<Vec<String>> {
        let models = self.benchmark_models()?;
        let table: CompatibilityTable = read_json(&self.path(paths::VALUE_TABLE))?;
        if table.num_states != self.domain.num_states() {
            return Err(Error::InvalidArtifact {
                path: self.path(paths::VALUE_TABLE),
                details: format!("{} states, domain has {}", table.num_states, self.domain.num_states()),
            });
        }
        let team = GroundTruthTeam::new(&self.domain)?;
        let compat = DomainCompatibility(&self.domain);
        let has_set = self.domain.has_compatible_set();
        let strategies = self.strategies();
        let b = &self.cfg.benchmark;
        let runs = par_map(self.jobs, &strategies, |cfg| {
            let context = StrategyContext {
                profiles: &table.profiles,
                table: Some(&table),
                compatible: has_set.then_some(&compat as _),
            };
            let mut run = run_benchmark(&team, &models, context, &[*cfg], b.episodes, self.cfg.benchmark_seed())?;
            Ok(run.pop().expect("one strategy"))
        })?;
        let domain = self.domain.kind().to_string();
        let episodes: Vec<EpisodeRow> = runs
            .iter()
            .flat_map(|run| run.episodes.iter().map(|e| EpisodeRow::new(&domain, &run.config, e)))
            .collect();
        let summaries: Vec<StrategyRow> = runs.iter().map(|r| StrategyRow::new(&domain, &r.summary())).collect();
        write_csv(&self.path(paths::EPISODES), &episodes)?;
        write_csv(&self.path(paths::STRATEGIES), &summaries)?;
        Ok(vec![paths::EPISODES.into(), paths::STRATEGIES.into()])
    }

    /// Per-episode benchmark rows of a finished run.
    pub fn episodes(&self) -> Result<Vec<EpisodeRow>> {
        RunManifest::load(&self.dir)?.verify(&self.dir, Stage::Benchmark.name())?;
        read_csv(&self.path(paths::EPISODES))
    }
}

/// Maps `f` over `items` on up to `jobs` threads, keeping the input order.
pub fn par_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("no poisoned slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("no poisoned slot").expect("every item mapped"))
        .collect()
}
