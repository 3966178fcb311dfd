//! Ground-truth agents and simulated team episodes.
//!
//! Each agent keeps a point estimate `ŝ` of the task state (last-seen memory
//! of every component it cannot currently observe) and a mental state `x`.
//! It acts by a softened single-agent plan towards the landmark `x` names,
//! and updates `x` with the domain's hand-written rules, reacting only to
//! teammates it can see.

use alloc::vec;
use alloc::vec::Vec;

use libm::ceil;

use crate::domains::{ActionKind, Domain, DomainRules, FactoredState};
use crate::mdp::{softmax, TabularMdp};
use crate::model::{
    rng_from_seed, sample_categorical, uniform01, AgentBehaviorModel, LabeledDataset, SimRng, TableBuilder, Trajectory,
};
use crate::{Error, Result};

/// Boltzmann temperature used to soften the planned action values.
pub const SOFTMAX_TEMPERATURE: f64 = 0.15;
/// One-off reward for interacting at the goal cell.
pub const GOAL_BONUS: f64 = 10.0;
pub const PLAN_GAMMA: f64 = 0.95;
const PLAN_TOL: f64 = 1e-10;
const PLAN_MAX_SWEEPS: usize = 10_000;

/// Softened navigation policies for every goal cell and movement mode, over
/// the agent's own cell.
#[derive(Debug, Clone)]
pub struct NavigationPolicies {
    num_cells: usize,
    num_actions: usize,
    num_modes: usize,
    probs: Vec<f64>,
}

impl NavigationPolicies {
    pub fn solve(rules: &dyn DomainRules, temperature: f64) -> Result<Self> {
        let cells = rules.grid().num_cells();
        let na = rules.config().num_actions();
        let modes = rules.num_plan_modes() as usize;
        let mut probs = Vec::with_capacity(cells * modes * cells * na);
        for goal in 0..cells {
            for mode in 0..modes {
                let mdp = navigation_mdp(rules, goal as u8, mode as u8);
                let sol = mdp.value_iteration(PLAN_GAMMA, PLAN_TOL, PLAN_MAX_SWEEPS)?;
                for cell in 0..cells {
                    probs.extend(softmax(sol.q_row(cell, na), temperature));
                }
            }
        }
        Ok(NavigationPolicies {
            num_cells: cells,
            num_actions: na,
            num_modes: modes,
            probs,
        })
    }

    #[inline]
    pub fn row(&self, goal: u8, mode: u8, cell: u8) -> &[f64] {
        let idx =
            ((goal as usize * self.num_modes + mode as usize) * self.num_cells + cell as usize) * self.num_actions;
        &self.probs[idx..idx + self.num_actions]
    }
}

/// Single-agent MDP over own cells plus an absorbing "goal reached" state.
///
/// Every step costs 1; interacting at `goal` pays [`GOAL_BONUS`] and ends.
/// Cells that are impassable in `mode` block movement.
pub fn navigation_mdp(rules: &dyn DomainRules, goal: u8, mode: u8) -> TabularMdp {
    let grid = rules.grid();
    let cells = grid.num_cells();
    let na = rules.config().num_actions();
    let done = cells;
    let mut next = vec![0u32; (cells + 1) * na];
    let mut reward = vec![-1.0; (cells + 1) * na];
    for cell in 0..cells {
        for a in 0..na {
            let row = cell * na + a;
            let c = cell as u8;
            next[row] = match rules.action_kind(a) {
                ActionKind::Move(d) => {
                    let n = grid.neighbor(c, d);
                    if rules.passable(n, mode) {
                        n
                    } else {
                        c
                    }
                }
                ActionKind::Interact if c == goal => {
                    reward[row] = GOAL_BONUS;
                    done as u8
                }
                _ => c,
            } as u32;
        }
    }
    for a in 0..na {
        next[done * na + a] = done as u32;
        reward[done * na + a] = 0.0;
    }
    let mut terminal = vec![false; cells + 1];
    terminal[done] = true;
    TabularMdp {
        num_states: cells + 1,
        num_actions: na,
        next,
        reward,
        terminal,
    }
}

/// Per-agent simulation state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentState {
    pub latent: usize,
    pub estimate: FactoredState,
}

/// The domain's ground-truth team: navigation policies plus latent rules.
#[derive(Debug)]
pub struct GroundTruthTeam<'a> {
    domain: &'a Domain,
    nav: NavigationPolicies,
}

impl<'a> GroundTruthTeam<'a> {
    pub fn new(domain: &'a Domain) -> Result<Self> {
        Self::with_temperature(domain, SOFTMAX_TEMPERATURE)
    }

    pub fn with_temperature(domain: &'a Domain, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::InvalidParameter {
                name: "temperature",
                reason: alloc::format!("{temperature} must be positive"),
            });
        }
        let nav = NavigationPolicies::solve(domain.rules(), temperature)?;
        Ok(GroundTruthTeam { domain, nav })
    }

    pub fn domain(&self) -> &'a Domain {
        self.domain
    }

    pub fn n_agents(&self) -> usize {
        self.domain.config().n_agents()
    }

    /// `π_i(· | ŝ, x)`.
    pub fn policy(&self, agent: usize, x: usize, estimate: &FactoredState) -> &[f64] {
        let goal = self.domain.rules().plan(agent, x, estimate);
        let cell = estimate.get(agent);
        match goal.cell {
            Some(g) => self.nav.row(g, goal.mode, cell),
            None => self.nav.row(cell, goal.mode, cell),
        }
    }

    /// `T_x(· | x, â, ŝ')` written into `out`.
    pub fn latent_transition(
        &self,
        agent: usize,
        x: usize,
        estimate: &FactoredState,
        next_state: usize,
        joint: &[usize],
        out: &mut [f64],
    ) {
        let view = self.domain.observe(agent, next_state);
        let seen: Vec<Option<usize>> = joint
            .iter()
            .enumerate()
            .map(|(j, &a)| view.is_visible(j).then_some(a))
            .collect();
        self.domain
            .rules()
            .latent_transition(agent, x, estimate, &view, &seen, out);
    }

    /// Tabulates the team's behavior as if every agent saw the true state.
    ///
    /// Exact for fully observable domains; otherwise an approximation useful
    /// as a reference model. Tables are dense over `S x X`, so keep this to
    /// small domains.
    pub fn tabulate(&self, agent: usize) -> AgentBehaviorModel {
        let task = self.domain.task();
        let nx = self.domain.config().num_latents();
        let na = self.domain.config().num_actions();
        let ns = task.num_states;
        let nja = task.num_joint_actions();
        let mut model = AgentBehaviorModel::uniform(nx, na, ns, nja);

        let support = self.domain.rules().initial_latents(agent);
        let mut b0 = vec![0.0; nx];
        for &x in &support {
            b0[x] = 1.0 / support.len() as f64;
        }
        let mut initial = TableBuilder::new(nx, ns as u64, vec![1.0 / nx as f64; nx]);
        initial.set(task.initial_state as u64, b0);
        model.initial = initial.build();

        let mut policy = TableBuilder::new(na, (ns * nx) as u64, vec![1.0 / na as f64; na]);
        let mut transition = TableBuilder::new(nx, (nx * nja * ns) as u64, vec![1.0 / nx as f64; nx]);
        let mut parts = vec![0; task.n_agents()];
        let mut out = vec![0.0; nx];
        for s in 0..ns {
            let state = *self.domain.state(s);
            for x in 0..nx {
                policy.set(model.policy_key(s, x), self.policy(agent, x, &state).to_vec());
            }
            for a in 0..nja {
                task.actions.decode_into(a, &mut parts).expect("joint id in range");
                for next in task.successors(s, a).map(|(n, _)| n) {
                    let est = *self.domain.state(next);
                    for x in 0..nx {
                        self.latent_transition(agent, x, &est, next, &parts, &mut out);
                        transition.set(model.transition_key(x, a, next), out.clone());
                    }
                }
            }
        }
        model.policy = policy.build();
        model.latent_transition = transition.build();
        model
    }
}

/// A recommended joint mental-state profile and the chance each agent adopts it.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub profile: Vec<usize>,
    pub acceptance: f64,
}

/// Called before the agents act at every step.
pub trait InterventionHook {
    /// `states` holds `s^{0..=t}` and `actions` holds `a^{0..t}`.
    fn before_step(&mut self, t: usize, states: &[u32], actions: &[u32]) -> Result<Option<Recommendation>>;
}

/// Hook that never intervenes.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoHook;

impl InterventionHook for NoHook {
    fn before_step(&mut self, _t: usize, _states: &[u32], _actions: &[u32]) -> Result<Option<Recommendation>> {
        Ok(None)
    }
}

/// A simulated episode with the agents' internal states.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRecord {
    /// Labeled trajectory; latents are those the agents acted on.
    pub trajectory: Trajectory,
    /// `estimates[t][i]`: agent `i`'s `ŝ` when acting at step `t` (one extra
    /// entry for the final state).
    pub estimates: Vec<Vec<FactoredState>>,
    pub rewards: Vec<f64>,
    /// Whether a recommendation was delivered before step `t`.
    pub interventions: Vec<bool>,
}

impl RolloutRecord {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn intervention_count(&self) -> usize {
        self.interventions.iter().filter(|&&z| z).count()
    }
}

/// Stream of the per-episode generator reserved for acceptance draws, so that
/// interventions do not shift the team's own random choices.
const ACCEPTANCE_STREAM: u64 = 1;

/// Runs one episode from the initial state until completion or the horizon.
pub fn rollout(team: &GroundTruthTeam<'_>, seed: u64, hook: &mut dyn InterventionHook) -> Result<RolloutRecord> {
    let domain = team.domain;
    let task = domain.task();
    let n = task.n_agents();
    let nx = domain.config().num_latents();
    let horizon = domain.config().horizon;
    let mut rng = rng_from_seed(seed);
    let mut accept_rng: SimRng = rng_from_seed(seed);
    accept_rng.set_stream(ACCEPTANCE_STREAM);

    let mut s = task.initial_state;
    let s0 = *domain.state(s);
    let mut agents: Vec<AgentState> = Vec::with_capacity(n);
    for i in 0..n {
        let support = domain.rules().initial_latents(i);
        let w = vec![1.0; support.len()];
        let latent = support[sample_categorical(&w, &mut rng)?];
        agents.push(AgentState { latent, estimate: s0 });
    }

    let mut states = vec![s as u32];
    let mut actions: Vec<u32> = Vec::new();
    let mut latents: Vec<Vec<u16>> = vec![Vec::new(); n];
    let mut estimates = Vec::new();
    let mut rewards = Vec::new();
    let mut interventions = Vec::new();
    let mut parts = vec![0usize; n];
    let mut buf = vec![0.0; nx];

    for t in 0..horizon {
        if task.is_terminal(s) {
            break;
        }
        let rec = hook.before_step(t, &states, &actions)?;
        interventions.push(rec.is_some());
        if let Some(rec) = rec {
            for (agent, &x) in agents.iter_mut().zip(&rec.profile) {
                if uniform01(&mut accept_rng) < rec.acceptance {
                    agent.latent = x;
                }
            }
        }
        for (i, agent) in agents.iter().enumerate() {
            latents[i].push(agent.latent as u16);
            parts[i] = sample_categorical(team.policy(i, agent.latent, &agent.estimate), &mut rng)?;
        }
        estimates.push(agents.iter().map(|a| a.estimate).collect());
        let joint = task.actions.encode(&parts)?;
        let next = task.sample_next(s, joint, &mut rng);
        rewards.push(task.reward(s, joint));
        for (i, agent) in agents.iter_mut().enumerate() {
            domain.observe(i, next).merge_into(&mut agent.estimate);
            team.latent_transition(i, agent.latent, &agent.estimate, next, &parts, &mut buf);
            agent.latent = sample_categorical(&buf, &mut rng)?;
        }
        actions.push(joint as u32);
        states.push(next as u32);
        s = next;
    }
    for (i, agent) in agents.iter().enumerate() {
        latents[i].push(agent.latent as u16);
    }
    estimates.push(agents.iter().map(|a| a.estimate).collect());
    Ok(RolloutRecord {
        trajectory: Trajectory {
            seed,
            states,
            actions,
            latents: Some(latents),
        },
        estimates,
        rewards,
        interventions,
    })
}

/// Number of labeled trajectories for a supervision ratio.
pub fn labeled_count(count: usize, ratio: f64) -> usize {
    (ceil(ratio * count as f64 - 1e-9).max(0.0) as usize).min(count)
}

fn check_ratio(count: usize, ratio: f64) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "must be at least 1".into(),
        });
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidParameter {
            name: "supervision_ratio",
            reason: alloc::format!("{ratio} not in [0, 1]"),
        });
    }
    Ok(())
}

/// Runs `count` episodes with seeds `seed, seed + 1, ...` and keeps latent
/// labels on the first `⌈ratio · count⌉` of them.
pub fn generate_dataset(team: &GroundTruthTeam<'_>, count: usize, ratio: f64, seed: u64) -> Result<LabeledDataset> {
    check_ratio(count, ratio)?;
    let records = (0..count as u64)
        .map(|k| rollout(team, seed.wrapping_add(k), &mut NoHook).map(|r| r.trajectory))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_dataset(records, ratio))
}

/// Strips labels beyond the supervised prefix. `trajectories` must be in
/// seed order.
pub fn assemble_dataset(mut trajectories: Vec<Trajectory>, ratio: f64) -> LabeledDataset {
    let keep = labeled_count(trajectories.len(), ratio);
    for t in trajectories.iter_mut().skip(keep) {
        t.latents = None;
    }
    LabeledDataset::new(trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{build_movers, build_rescue, build_tiny, Dir};

    #[test]
    fn labeled_counts() {
        assert_eq!(labeled_count(500, 0.3), 150);
        assert_eq!(labeled_count(150, 1.0), 150);
        assert_eq!(labeled_count(10, 0.0), 0);
        assert_eq!(labeled_count(3, 0.5), 2);
    }

    #[test]
    fn adjacent_agent_steps_onto_target() {
        let d = build_rescue().unwrap();
        let team = GroundTruthTeam::new(&d).unwrap();
        let grid = d.rules().grid();
        let goal = grid.unique_landmark('C').unwrap();
        let east_of_goal = grid.neighbor(goal, Dir::East);
        let mut est = *d.state(0);
        est.set(0, east_of_goal);
        let p = team.policy(0, 0, &est);
        let best = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(best, 2, "west is the move towards the goal: {p:?}");
        est.set(0, goal);
        let p = team.policy(0, 0, &est);
        let best = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(best, 5);
    }

    #[test]
    fn truck_latent_without_box_is_well_defined() {
        let d = build_movers().unwrap();
        let team = GroundTruthTeam::new(&d).unwrap();
        let p = team.policy(0, 3, d.state(0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    /// Finite-horizon Bellman recursion, long enough that the discounted tail
    /// is below the tolerance.
    #[test]
    fn value_iteration_matches_finite_horizon_recursion() {
        let d = build_tiny().unwrap();
        for goal in 0..3u8 {
            let mdp = navigation_mdp(d.rules(), goal, 0);
            let sol = mdp.value_iteration(PLAN_GAMMA, 1e-13, 100_000).unwrap();
            let mut v = vec![0.0; mdp.num_states];
            for _ in 0..1_000 {
                v = (0..mdp.num_states)
                    .map(|s| {
                        if mdp.terminal[s] {
                            return 0.0;
                        }
                        (0..mdp.num_actions)
                            .map(|a| {
                                let row = s * mdp.num_actions + a;
                                mdp.reward[row] + PLAN_GAMMA * v[mdp.next[row] as usize]
                            })
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
            }
            for s in 0..mdp.num_states {
                assert!((v[s] - sol.values[s]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rollouts_are_reproducible() {
        let d = build_movers().unwrap();
        let team = GroundTruthTeam::new(&d).unwrap();
        let a = rollout(&team, 7, &mut NoHook).unwrap();
        let b = rollout(&team, 7, &mut NoHook).unwrap();
        assert_eq!(a, b);
        assert!(a.trajectory.states.len() <= d.config().horizon + 1);
        a.trajectory.check(d.task(), &d.config().latent_sizes()).unwrap();
    }

    #[test]
    fn estimates_agree_with_observed_components() {
        let d = build_movers().unwrap();
        let team = GroundTruthTeam::new(&d).unwrap();
        let r = rollout(&team, 3, &mut NoHook).unwrap();
        for (t, &s) in r.trajectory.states.iter().enumerate() {
            for i in 0..2 {
                let v = d.observe(i, s as usize);
                for c in 0..8 {
                    if let Some(val) = v.get(c) {
                        assert_eq!(r.estimates[t][i].get(c), val);
                    }
                }
            }
        }
    }

    struct Always(Vec<usize>);

    impl InterventionHook for Always {
        fn before_step(&mut self, _t: usize, _s: &[u32], _a: &[u32]) -> Result<Option<Recommendation>> {
            Ok(Some(Recommendation {
                profile: self.0.clone(),
                acceptance: 1.0,
            }))
        }
    }

    #[test]
    fn accepted_recommendation_sets_latents() {
        let d = build_movers().unwrap();
        let team = GroundTruthTeam::new(&d).unwrap();
        let r = rollout(&team, 11, &mut Always(vec![2, 2])).unwrap();
        let latents = r.trajectory.latents.as_ref().unwrap();
        for t in 0..r.trajectory.len() {
            assert_eq!((latents[0][t], latents[1][t]), (2, 2));
        }
        assert_eq!(r.intervention_count(), r.trajectory.len());
    }

    #[test]
    fn dataset_supervision_split() {
        let d = build_tiny().unwrap();
        let team = GroundTruthTeam::new(&d).unwrap();
        let ds = generate_dataset(&team, 20, 0.3, 5).unwrap();
        assert_eq!(ds.len(), 20);
        assert_eq!(ds.labeled_count(), 6);
        assert!(ds.trajectories[..6].iter().all(|t| t.is_labeled()));
        let none = generate_dataset(&team, 5, 0.0, 5).unwrap();
        assert_eq!(none.labeled_count(), 0);
        assert!(generate_dataset(&team, 0, 0.5, 5).is_err());
    }
}
