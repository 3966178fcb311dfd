//! Column schemas of the CSV outputs.

use serde::{Deserialize, Serialize};
use teamcoach_core::domains::Domain;
use teamcoach_core::intervention::{EpisodeMetrics, StrategyConfig, StrategyKind, StrategySummary, Wrapper};
use teamcoach_core::stats::Summary;

/// `benchmark/episodes.csv`: one row per benchmark episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub domain: String,
    pub strategy: StrategyKind,
    pub wrapper: Wrapper,
    pub delta: f64,
    pub theta: f64,
    pub cost: f64,
    pub acceptance: f64,
    pub seed: u64,
    pub reward: f64,
    pub interventions: usize,
    pub objective: f64,
    pub length: usize,
}

impl EpisodeRow {
    pub fn new(domain: &str, cfg: &StrategyConfig, e: &EpisodeMetrics) -> Self {
        EpisodeRow {
            domain: domain.into(),
            strategy: cfg.kind,
            wrapper: cfg.wrapper,
            delta: cfg.delta,
            theta: cfg.theta,
            cost: cfg.cost,
            acceptance: cfg.acceptance,
            seed: e.seed,
            reward: e.reward,
            interventions: e.interventions,
            objective: e.objective,
            length: e.length,
        }
    }

    pub fn config(&self) -> StrategyConfig {
        StrategyConfig {
            kind: self.strategy,
            wrapper: self.wrapper,
            delta: self.delta,
            theta: self.theta,
            cost: self.cost,
            acceptance: self.acceptance,
        }
    }
}

/// `benchmark/strategies.csv` and `report/strategies.csv`: aggregates of the
/// three metrics per strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub domain: String,
    pub strategy: StrategyKind,
    pub wrapper: Wrapper,
    pub delta: f64,
    pub theta: f64,
    pub cost: f64,
    pub acceptance: f64,
    pub episodes: usize,
    pub reward_mean: f64,
    pub reward_se: f64,
    pub reward_q1: f64,
    pub reward_median: f64,
    pub reward_q3: f64,
    pub interventions_mean: f64,
    pub interventions_se: f64,
    pub interventions_q1: f64,
    pub interventions_median: f64,
    pub interventions_q3: f64,
    pub objective_mean: f64,
    pub objective_se: f64,
    pub objective_q1: f64,
    pub objective_median: f64,
    pub objective_q3: f64,
}

impl StrategyRow {
    pub fn new(domain: &str, s: &StrategySummary) -> Self {
        let c = &s.config;
        StrategyRow {
            domain: domain.into(),
            strategy: c.kind,
            wrapper: c.wrapper,
            delta: c.delta,
            theta: c.theta,
            cost: c.cost,
            acceptance: c.acceptance,
            episodes: s.reward.count,
            reward_mean: s.reward.mean,
            reward_se: s.reward.std_err,
            reward_q1: s.reward.q1,
            reward_median: s.reward.median,
            reward_q3: s.reward.q3,
            interventions_mean: s.interventions.mean,
            interventions_se: s.interventions.std_err,
            interventions_q1: s.interventions.q1,
            interventions_median: s.interventions.median,
            interventions_q3: s.interventions.q3,
            objective_mean: s.objective.mean,
            objective_se: s.objective.std_err,
            objective_q1: s.objective.q1,
            objective_median: s.objective.median,
            objective_q3: s.objective.q3,
        }
    }

    pub fn config(&self) -> StrategyConfig {
        StrategyConfig {
            kind: self.strategy,
            wrapper: self.wrapper,
            delta: self.delta,
            theta: self.theta,
            cost: self.cost,
            acceptance: self.acceptance,
        }
    }
}

/// `infer/accuracy.csv`: filter accuracy on one evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub domain: String,
    pub setting: String,
    pub count: usize,
    pub ratio: f64,
    pub rep: usize,
    pub episode_seed: u64,
    pub accuracy: f64,
}

/// `infer/accuracy_summary.csv`: accuracy per training setting, pooled over
/// repetitions and evaluation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummaryRow {
    pub domain: String,
    pub setting: String,
    pub count: usize,
    pub ratio: f64,
    pub training_seeds: usize,
    pub episodes: usize,
    pub mean: f64,
    pub std_err: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Accuracy of guessing uniformly, `1/|X_i|` averaged over agents.
    pub random_guess: f64,
}

impl AccuracySummaryRow {
    /// Groups by setting, in order of first appearance.
    pub fn aggregate(rows: &[AccuracyRow], domain: &Domain) -> Vec<AccuracySummaryRow> {
        let sizes = domain.config().latent_sizes();
        let random_guess = sizes.iter().map(|&n| 1.0 / n as f64).sum::<f64>() / sizes.len() as f64;
        let mut settings: Vec<&AccuracyRow> = Vec::new();
        for r in rows {
            if !settings.iter().any(|s| s.setting == r.setting) {
                settings.push(r);
            }
        }
        settings
            .into_iter()
            .map(|first| {
                let group: Vec<&AccuracyRow> = rows.iter().filter(|r| r.setting == first.setting).collect();
                let values: Vec<f64> = group.iter().map(|r| r.accuracy).collect();
                let mut reps: Vec<usize> = group.iter().map(|r| r.rep).collect();
                reps.sort_unstable();
                reps.dedup();
                let s = Summary::of(&values);
                AccuracySummaryRow {
                    domain: first.domain.clone(),
                    setting: first.setting.clone(),
                    count: first.count,
                    ratio: first.ratio,
                    training_seeds: reps.len(),
                    episodes: values.len() / reps.len().max(1),
                    mean: s.mean,
                    std_err: s.std_err,
                    q1: s.q1,
                    median: s.median,
                    q3: s.q3,
                    random_guess,
                }
            })
            .collect()
    }
}

/// `models/<setting>_rep<k>_elbo.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElboRow {
    pub iteration: usize,
    pub elbo: f64,
}

/// `models/fits.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub setting: String,
    pub count: usize,
    pub ratio: f64,
    pub rep: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_elbo: f64,
}

/// `value/summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRow {
    pub domain: String,
    pub model: String,
    pub gamma: f64,
    pub states: usize,
    pub profiles: usize,
    pub sweeps: usize,
    pub residual: f64,
    pub initial_best_profile: usize,
    pub initial_best_value: f64,
}
