//! Intervention strategies and episode execution.
//!
//! At every step the engine advances the mental-state filter with the latest
//! joint action and state, decides whether to intervene, and if so recommends
//! a joint profile. Each agent adopts it with probability `p_a`, and the
//! filter is mixed accordingly. Episodes are scored by
//! `J = Σ r_t − c · Σ z_t`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compat::CompatibilityTable;
use crate::domains::Domain;
use crate::filter::{apply_intervention, FilterState, MentalStateFilter};
use crate::model::{AgentBehaviorModel, JointIndex};
use crate::stats::Summary;
use crate::synthetic::{rollout, GroundTruthTeam, InterventionHook, Recommendation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// Never intervenes.
    None,
    /// Recommends the best profile at every step.
    Centralized,
    /// Intervenes when the estimated profile is outside a hand-specified
    /// compatible set.
    Rule,
    /// Intervenes when the value gained by switching to the best profile,
    /// minus the cost, exceeds `δ`.
    Value,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::None,
        StrategyKind::Centralized,
        StrategyKind::Rule,
        StrategyKind::Value,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::Centralized => "centralized",
            StrategyKind::Rule => "rule",
            StrategyKind::Value => "value",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wrapper {
    /// Decides on the MAP profile.
    Deterministic,
    /// Decides on the MAP profile, but only when its posterior mass exceeds
    /// `θ`.
    Confidence,
    /// Intervenes when the posterior expectation of the deterministic
    /// decision exceeds 1/2.
    Expectation,
}

impl Wrapper {
    pub fn name(self) -> &'static str {
        match self {
            Wrapper::Deterministic => "deterministic",
            Wrapper::Confidence => "confidence",
            Wrapper::Expectation => "expectation",
        }
    }
}

macro_rules! parse_by_name {
    ($ty:ty, $what:literal, [$($v:expr),*]) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                [$($v),*]
                    .into_iter()
                    .find(|v| v.name().eq_ignore_ascii_case(s))
                    .ok_or_else(|| Error::InvalidParameter {
                        name: $what,
                        reason: alloc::format!("unknown value {s:?}"),
                    })
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

parse_by_name!(
    StrategyKind,
    "strategy",
    [
        StrategyKind::None,
        StrategyKind::Centralized,
        StrategyKind::Rule,
        StrategyKind::Value
    ]
);
parse_by_name!(
    Wrapper,
    "wrapper",
    [Wrapper::Deterministic, Wrapper::Confidence, Wrapper::Expectation]
);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub wrapper: Wrapper,
    /// Benefit threshold `δ` of the value-based strategy.
    pub delta: f64,
    /// Confidence threshold `θ`.
    pub theta: f64,
    /// Cost `c` of one intervention.
    pub cost: f64,
    /// Probability `p_a` that an agent adopts a recommendation.
    pub acceptance: f64,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        StrategyConfig {
            kind,
            wrapper: Wrapper::Deterministic,
            delta: 0.0,
            theta: 0.0,
            cost: 0.0,
            acceptance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.acceptance) {
            return bad("acceptance", "must lie in [0, 1]");
        }
        if !(self.cost >= 0.0) || !self.cost.is_finite() {
            return bad("cost", "must be finite and nonnegative");
        }
        if !self.delta.is_finite() {
            return bad("delta", "must be finite");
        }
        Ok(())
    }
}

/// A hand-specified compatible set `C_s` of joint profiles.
pub trait CompatibleSet {
    fn contains(&self, state: usize, profile: &[usize]) -> Result<bool>;
}

/// Compatible sets defined by a domain's rules.
#[derive(Debug, Clone, Copy)]
pub struct DomainCompatibility<'a>(pub &'a Domain);

impl CompatibleSet for DomainCompatibility<'_> {
    fn contains(&self, state: usize, profile: &[usize]) -> Result<bool> {
        self.0
            .rules()
            .compatible(self.0.state(state), profile)
            .ok_or_else(|| Error::InvalidParameter {
                name: "strategy",
                reason: alloc::format!("domain {} defines no compatible set", self.0.kind()),
            })
    }
}

/// Rule-based decision `1(x̂ ∉ C_s)`.
pub fn rule_decision(set: &dyn CompatibleSet, state: usize, profile: &[usize]) -> Result<bool> {
    Ok(!set.contains(state, profile)?)
}

/// The compatible profile with the highest value, or the lowest compatible
/// id without a value table.
pub fn rule_recommendation(
    set: &dyn CompatibleSet,
    profiles: &JointIndex,
    table: Option<&CompatibilityTable>,
    state: usize,
) -> Result<usize> {
    let mut parts = vec![0; profiles.arity()];
    let mut best: Option<(usize, f64)> = None;
    for x in 0..profiles.len() {
        profiles.decode_into(x, &mut parts)?;
        if !set.contains(state, &parts)? {
            continue;
        }
        let v = table.map_or(0.0, |t| t.value(state, x));
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((x, v));
        }
    }
    best.map(|(x, _)| x).ok_or_else(|| Error::InvalidParameter {
        name: "compatible set",
        reason: alloc::format!("empty at state {state}"),
    })
}

/// Value-based decision `1(benefit(x̂ | s) > δ)`.
pub fn value_decision(table: &CompatibilityTable, state: usize, profile: usize, delta: f64, cost: f64) -> bool {
    table.benefit(state, profile, cost) > delta
}

/// `f(x̂) · 1(p(x̂) > θ)`.
pub fn confidence_wrap(decision: bool, confidence: f64, theta: f64) -> bool {
    decision && confidence > theta
}

/// `1(E_p[f(x)] > 1/2)` with `p` the product of the per-agent beliefs.
pub fn expectation_wrap(
    beliefs: &[Vec<f64>],
    profiles: &JointIndex,
    mut decision: impl FnMut(usize, &[usize]) -> Result<bool>,
) -> Result<bool> {
    let mut parts = vec![0; profiles.arity()];
    let mut expected = 0.0;
    for x in 0..profiles.len() {
        profiles.decode_into(x, &mut parts)?;
        let p: f64 = beliefs.iter().zip(&parts).map(|(b, &k)| b[k]).product();
        if p > 0.0 && decision(x, &parts)? {
            expected += p;
        }
    }
    Ok(expected > 0.5)
}

/// Everything a strategy may consult besides the filter.
#[derive(Clone, Copy)]
pub struct StrategyContext<'a> {
    pub profiles: &'a JointIndex,
    pub table: Option<&'a CompatibilityTable>,
    pub compatible: Option<&'a dyn CompatibleSet>,
}

impl fmt::Debug for StrategyContext<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrategyContext")
            .field("profiles", &self.profiles.len())
            .field("table", &self.table.is_some())
            .field("compatible", &self.compatible.is_some())
            .finish()
    }
}

impl<'a> StrategyContext<'a> {
    fn table(&self, kind: StrategyKind) -> Result<&'a CompatibilityTable> {
        self.table.ok_or_else(|| Error::InvalidParameter {
            name: "strategy",
            reason: alloc::format!("{kind} needs a compatibility table"),
        })
    }

    fn compatible(&self) -> Result<&'a dyn CompatibleSet> {
        self.compatible.ok_or_else(|| Error::InvalidParameter {
            name: "strategy",
            reason: "rule needs a compatible set".into(),
        })
    }

    /// The intervention decision at one step and, if positive, the
    /// recommended profile id.
    pub fn decide(&self, cfg: &StrategyConfig, filter: &FilterState) -> Result<Option<usize>> {
        let s = filter.state;
        let estimate = filter.map_estimate();
        let confidence: f64 = filter.map_confidence().iter().product();
        let x_hat = self.profiles.encode(&estimate)?;
        match cfg.kind {
            StrategyKind::None => Ok(None),
            StrategyKind::Centralized => Ok(Some(self.table(cfg.kind)?.best_profile(s))),
            StrategyKind::Value => {
                let table = self.table(cfg.kind)?;
                let f = |x: usize| value_decision(table, s, x, cfg.delta, cfg.cost);
                let z = match cfg.wrapper {
                    Wrapper::Deterministic => f(x_hat),
                    Wrapper::Confidence => confidence_wrap(f(x_hat), confidence, cfg.theta),
                    Wrapper::Expectation => expectation_wrap(&filter.beliefs, self.profiles, |x, _| Ok(f(x)))?,
                };
                Ok(z.then(|| table.best_profile(s)))
            }
            StrategyKind::Rule => {
                let set = self.compatible()?;
                let z = match cfg.wrapper {
                    Wrapper::Deterministic => rule_decision(set, s, &estimate)?,
                    Wrapper::Confidence => confidence_wrap(rule_decision(set, s, &estimate)?, confidence, cfg.theta),
                    Wrapper::Expectation => {
                        expectation_wrap(&filter.beliefs, self.profiles, |_, parts| rule_decision(set, s, parts))?
                    }
                };
                if z {
                    Ok(Some(rule_recommendation(set, self.profiles, self.table, s)?))
                } else {
                    Ok(None)
                }
            }
        }
    }
}

/// Rollout hook that runs the filter and a strategy.
struct StrategyHook<'a> {
    filter: MentalStateFilter<'a>,
    context: StrategyContext<'a>,
    config: StrategyConfig,
    belief: Option<FilterState>,
}

impl InterventionHook for StrategyHook<'_> {
    fn before_step(&mut self, t: usize, states: &[u32], actions: &[u32]) -> Result<Option<Recommendation>> {
        let belief = match self.belief.take() {
            Some(prev) if t > 0 => self.filter.step(&prev, actions[t - 1] as usize, states[t] as usize)?,
            _ => self.filter.init(states[0] as usize)?,
        };
        let choice = self.context.decide(&self.config, &belief)?;
        let (belief, rec) = match choice {
            Some(x) => {
                let profile = self.context.profiles.decode(x)?;
                let mixed = apply_intervention(&belief, &profile, self.config.acceptance)?;
                let rec = Recommendation {
                    profile,
                    acceptance: self.config.acceptance,
                };
                (mixed, Some(rec))
            }
            None => (belief, None),
        };
        self.belief = Some(belief);
        Ok(rec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub reward: f64,
    pub interventions: usize,
    /// `reward − cost · interventions`.
    pub objective: f64,
    pub length: usize,
}

impl EpisodeMetrics {
    pub fn new(seed: u64, reward: f64, interventions: usize, cost: f64, length: usize) -> Self {
        EpisodeMetrics {
            seed,
            reward,
            interventions,
            objective: objective(reward, interventions, cost),
            length,
        }
    }
}

/// `J = reward − cost · count`.
pub fn objective(reward: f64, interventions: usize, cost: f64) -> f64 {
    reward - cost * interventions as f64
}

/// Runs one episode of the team under a strategy.
pub fn run_episode(
    team: &GroundTruthTeam<'_>,
    models: &[AgentBehaviorModel],
    context: StrategyContext<'_>,
    config: &StrategyConfig,
    seed: u64,
) -> Result<EpisodeMetrics> {
    config.validate()?;
    let filter = MentalStateFilter::new(team.domain().task(), models)?;
    let mut hook = StrategyHook {
        filter,
        context,
        config: *config,
        belief: None,
    };
    let record = rollout(team, seed, &mut hook).map_err(|e| Error::Episode {
        seed,
        source: Box::new(e),
    })?;
    Ok(EpisodeMetrics::new(
        seed,
        record.total_reward(),
        record.intervention_count(),
        config.cost,
        record.trajectory.len(),
    ))
}

/// Episodes of one strategy over seeds `base_seed, base_seed + 1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub config: StrategyConfig,
    pub episodes: Vec<EpisodeMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub config: StrategyConfig,
    pub reward: Summary,
    pub interventions: Summary,
    pub objective: Summary,
}

impl StrategyRun {
    pub fn summary(&self) -> StrategySummary {
        let pick = |f: fn(&EpisodeMetrics) -> f64| Summary::of(&self.episodes.iter().map(f).collect::<Vec<_>>());
        StrategySummary {
            config: self.config,
            reward: pick(|e| e.reward),
            interventions: pick(|e| e.interventions as f64),
            objective: pick(|e| e.objective),
        }
    }
}

/// Runs every strategy on the same episode seeds.
pub fn run_benchmark(
    team: &GroundTruthTeam<'_>,
    models: &[AgentBehaviorModel],
    context: StrategyContext<'_>,
    strategies: &[StrategyConfig],
    episodes: usize,
    base_seed: u64,
) -> Result<Vec<StrategyRun>> {
    strategies
        .iter()
        .map(|cfg| {
            let episodes = (0..episodes as u64)
                .map(|k| run_episode(team, models, context, cfg, base_seed.wrapping_add(k)))
                .collect::<Result<Vec<_>>>()?;
            Ok(StrategyRun { config: *cfg, episodes })
        })
        .collect()
}

/// Value-based configurations for every `δ` and `θ` (the latter with the
/// confidence wrapper), plus the expectation wrapper for every `δ`.
pub fn value_grid(deltas: &[f64], thetas: &[f64], cost: f64, acceptance: f64) -> Vec<StrategyConfig> {
    let base = StrategyConfig {
        cost,
        acceptance,
        ..StrategyConfig::new(StrategyKind::Value)
    };
    let mut out = Vec::new();
    for &delta in deltas {
        out.push(StrategyConfig { delta, ..base });
        for &theta in thetas {
            out.push(StrategyConfig {
                delta,
                theta,
                wrapper: Wrapper::Confidence,
                ..base
            });
        }
        out.push(StrategyConfig {
            delta,
            wrapper: Wrapper::Expectation,
            ..base
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(values: Vec<f64>, sizes: Vec<usize>) -> CompatibilityTable {
        let profiles = JointIndex::new(sizes);
        let np = profiles.len();
        let best = values
            .chunks_exact(np)
            .map(|r| crate::filter::argmax(r) as u32)
            .collect();
        CompatibilityTable {
            num_states: values.len() / np,
            profiles,
            values,
            best,
            gamma: 0.9,
            residual: 0.0,
            sweeps: 1,
        }
    }

    #[test]
    fn value_decision_arithmetic() {
        let t = table(vec![10.0, 5.0], vec![2]);
        assert!(!value_decision(&t, 0, 0, 0.0, 0.0));
        assert!(value_decision(&t, 0, 1, 3.0, 1.0));
        assert!(!value_decision(&t, 0, 1, 4.0, 1.0));
    }

    #[test]
    fn confidence_thresholds() {
        assert!(!confidence_wrap(true, 0.4, 0.5));
        assert!(confidence_wrap(true, 0.4, 0.0));
        assert!(!confidence_wrap(true, 1.0, 1.0));
        assert!(!confidence_wrap(false, 1.0, 0.0));
    }

    #[test]
    fn expectation_arithmetic() {
        let idx = JointIndex::new(vec![2]);
        let b = vec![vec![0.6, 0.4]];
        assert!(expectation_wrap(&b, &idx, |x, _| Ok(x == 0)).unwrap());
        assert!(!expectation_wrap(&b, &idx, |x, _| Ok(x == 1)).unwrap());
        assert!(expectation_wrap(&b, &idx, |_, _| Ok(true)).unwrap());
        assert!(!expectation_wrap(&b, &idx, |_, _| Ok(false)).unwrap());
        // Product of two agents: P(x = (0, 0)) = 0.42.
        let idx2 = JointIndex::new(vec![2, 2]);
        let b2 = vec![vec![0.6, 0.4], vec![0.7, 0.3]];
        assert!(!expectation_wrap(&b2, &idx2, |x, _| Ok(x == 0)).unwrap());
        assert!(expectation_wrap(&b2, &idx2, |x, _| Ok(x != 3)).unwrap());
    }

    struct SameTarget;
    impl CompatibleSet for SameTarget {
        fn contains(&self, _s: usize, p: &[usize]) -> Result<bool> {
            Ok(p[0] == p[1])
        }
    }

    #[test]
    fn rule_decision_and_recommendation() {
        let idx = JointIndex::new(vec![2, 2]);
        assert!(!rule_decision(&SameTarget, 0, &[1, 1]).unwrap());
        assert!(rule_decision(&SameTarget, 0, &[0, 1]).unwrap());
        assert_eq!(rule_recommendation(&SameTarget, &idx, None, 0).unwrap(), 0);
        let t = table(vec![1.0, 9.0, 9.0, 2.0], vec![2, 2]);
        assert_eq!(rule_recommendation(&SameTarget, &idx, Some(&t), 0).unwrap(), 3);
    }

    #[test]
    fn decide_uses_map_profile() {
        let idx = JointIndex::new(vec![2, 2]);
        let t = table(vec![10.0, 0.0, 0.0, 4.0], vec![2, 2]);
        let ctx = StrategyContext {
            profiles: &idx,
            table: Some(&t),
            compatible: Some(&SameTarget),
        };
        let f = FilterState {
            t: 0,
            state: 0,
            beliefs: vec![vec![0.2, 0.8], vec![0.1, 0.9]],
        };
        let mut cfg = StrategyConfig::new(StrategyKind::Value);
        cfg.cost = 1.0;
        cfg.delta = 4.0;
        assert_eq!(ctx.decide(&cfg, &f).unwrap(), Some(0));
        cfg.delta = 5.0;
        assert_eq!(ctx.decide(&cfg, &f).unwrap(), None);
        cfg.delta = 0.0;
        cfg.wrapper = Wrapper::Confidence;
        cfg.theta = 0.75;
        assert_eq!(ctx.decide(&cfg, &f).unwrap(), None);
        assert_eq!(ctx.decide(&StrategyConfig::new(StrategyKind::Rule), &f).unwrap(), None);
        assert_eq!(
            ctx.decide(&StrategyConfig::new(StrategyKind::Centralized), &f).unwrap(),
            Some(0)
        );
        assert_eq!(ctx.decide(&StrategyConfig::new(StrategyKind::None), &f).unwrap(), None);
    }

    #[test]
    fn objective_identity_and_validation() {
        let m = EpisodeMetrics::new(3, -40.0, 7, 1.5, 40);
        assert_eq!(m.objective, -40.0 - 1.5 * 7.0);
        let mut cfg = StrategyConfig::new(StrategyKind::Value);
        cfg.theta = 1.5;
        assert!(cfg.validate().is_err());
        cfg.theta = 0.5;
        cfg.cost = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grid_shape_and_names() {
        assert_eq!(value_grid(&[0.0, 1.0, 2.0], &[0.3, 0.5], 1.0, 1.0).len(), 12);
        assert_eq!("Value".parse::<StrategyKind>().unwrap(), StrategyKind::Value);
        assert_eq!("expectation".parse::<Wrapper>().unwrap(), Wrapper::Expectation);
        assert!("maybe".parse::<Wrapper>().is_err());
    }
}
