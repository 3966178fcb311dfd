//! Benchmark teaming domains.
//!
//! Each domain is a set of [`DomainRules`] over a factored state (agent
//! positions first, then object statuses). [`Domain::build`] enumerates every
//! state reachable from the initial configuration, assigns dense ids in
//! breadth-first discovery order and tabulates the deterministic transition
//! and reward functions into a [`TaskModel`].
//!
//! Maps live in `maps/*.txt` and are compiled in.

mod cleanup;
pub mod grid;
mod movers;
mod rescue;
mod rescue2;
mod tiny;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cleanup::Cleanup;
pub use grid::{Dir, GridSpec};
pub use movers::Movers;
pub use rescue::Rescue;
pub use rescue2::RescueTwo;
pub use tiny::Tiny;

use crate::model::{JointIndex, RewardTable, TaskModel, Transitions};
use crate::{Error, Result};

pub const MAX_COMPONENTS: usize = 8;

/// Factored task state: up to eight small components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactoredState(pub [u8; MAX_COMPONENTS]);

impl FactoredState {
    #[inline]
    pub fn pack(&self) -> u64 {
        u64::from_le_bytes(self.0)
    }

    #[inline]
    pub fn unpack(v: u64) -> Self {
        FactoredState(v.to_le_bytes())
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: u8) {
        self.0[i] = v;
    }
}

/// What one agent sees of a state: component values plus a visibility mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateView {
    pub values: FactoredState,
    pub visible: u8,
}

impl StateView {
    pub fn hidden(values: FactoredState) -> Self {
        StateView { values, visible: 0 }
    }

    #[inline]
    pub fn show(&mut self, i: usize) {
        self.visible |= 1 << i;
    }

    #[inline]
    pub fn is_visible(&self, i: usize) -> bool {
        self.visible & (1 << i) != 0
    }

    pub fn get(&self, i: usize) -> Option<u8> {
        self.is_visible(i).then(|| self.values.get(i))
    }

    /// Copies every visible component into a point estimate.
    pub fn merge_into(&self, estimate: &mut FactoredState) {
        for i in 0..MAX_COMPONENTS {
            if self.is_visible(i) {
                estimate.set(i, self.values.get(i));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Move(Dir),
    Stay,
    /// Pick up / drop off, rescue, or (in the tiny domain) wait at the target.
    Interact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Movers,
    Cleanup,
    Rescue,
    Rescue2,
    Tiny,
}

impl DomainKind {
    pub const ALL: [DomainKind; 5] = [
        DomainKind::Movers,
        DomainKind::Cleanup,
        DomainKind::Rescue,
        DomainKind::Rescue2,
        DomainKind::Tiny,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Movers => "movers",
            DomainKind::Cleanup => "cleanup",
            DomainKind::Rescue => "rescue",
            DomainKind::Rescue2 => "rescue2",
            DomainKind::Tiny => "tiny",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DomainKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "domain",
                reason: alloc::format!("unknown domain {s:?} (movers|cleanup|rescue|rescue2|tiny)"),
            })
    }
}

/// Static description of a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub horizon: usize,
    pub gamma: f64,
    pub agent_names: Vec<String>,
    pub action_names: Vec<String>,
    /// Mental states: the landmark each agent may be heading for.
    pub latent_names: Vec<String>,
    /// People stranded per site (rescue domains only).
    pub site_populations: Vec<(String, u32)>,
    /// Chebyshev radius of what an agent sees around itself.
    pub view_radius: usize,
    /// Whether teammates standing on landmarks are visible from anywhere.
    pub landmarks_visible: bool,
}

impl DomainConfig {
    pub fn n_agents(&self) -> usize {
        self.agent_names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn num_latents(&self) -> usize {
        self.latent_names.len()
    }

    pub fn latent_sizes(&self) -> Vec<usize> {
        alloc::vec![self.num_latents(); self.n_agents()]
    }
}

/// Where an agent plans to go: a goal cell to interact at, and the movement
/// mode (e.g. carrying or not) that decides which cells are passable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanGoal {
    pub cell: Option<u8>,
    pub mode: u8,
}

/// Dynamics, visibility and ground-truth behavior rules of a domain.
///
/// Components `0..n_agents` of every state are agent positions.
pub trait DomainRules: Send + Sync + fmt::Debug {
    fn config(&self) -> &DomainConfig;
    fn grid(&self) -> &GridSpec;
    fn initial_state(&self) -> FactoredState;
    fn action_kind(&self, action: usize) -> ActionKind;

    /// Deterministic successor and reward of a joint action.
    fn step(&self, s: &FactoredState, actions: &[usize]) -> (FactoredState, f64);
    fn is_terminal(&self, s: &FactoredState) -> bool;

    /// Deterministic masked view of `s` from `agent`'s perspective.
    fn observe(&self, agent: usize, s: &FactoredState) -> StateView;

    /// Number of movement modes used by [`PlanGoal::mode`].
    fn num_plan_modes(&self) -> u8 {
        1
    }

    fn passable(&self, _cell: u8, _mode: u8) -> bool {
        true
    }

    /// Goal of an agent holding mental state `x` given its state estimate.
    fn plan(&self, agent: usize, x: usize, estimate: &FactoredState) -> PlanGoal;

    /// Mental states an agent may start with (drawn uniformly).
    fn initial_latents(&self, agent: usize) -> Vec<usize>;

    /// Ground-truth mental-state transition `T_x(x' | x, a_seen, s_est')`.
    ///
    /// `seen[j]` is teammate `j`'s action when `j` was visible after the
    /// step, `None` otherwise (`seen[agent]` is the agent's own action).
    fn latent_transition(
        &self,
        agent: usize,
        x: usize,
        estimate: &FactoredState,
        view: &StateView,
        seen: &[Option<usize>],
        out: &mut [f64],
    );

    /// Hand-specified compatibility `x ∈ C_s`, for domains that define one.
    fn compatible(&self, _s: &FactoredState, _profile: &[usize]) -> Option<bool> {
        None
    }

    /// ASCII rendering of a state.
    fn render(&self, s: &FactoredState) -> String {
        let n = self.config().n_agents();
        self.grid().render(|p| {
            (0..n)
                .rev()
                .find(|&i| s.get(i) == p)
                .map(|i| char::from(b'0' + i as u8))
        })
    }
}

/// A domain's rules together with its enumerated state space and task model.
#[derive(Debug)]
pub struct Domain {
    rules: Box<dyn DomainRules>,
    states: Vec<FactoredState>,
    lookup: Vec<(u64, u32)>,
    task: TaskModel,
}

impl Domain {
    /// Enumerates reachable states and tabulates the task model.
    pub fn build(rules: Box<dyn DomainRules>) -> Result<Domain> {
        let cfg = rules.config().clone();
        let n = cfg.n_agents();
        let actions = JointIndex::uniform(n, cfg.num_actions());
        let na = actions.len();
        let init = rules.initial_state();

        let mut ids: BTreeMap<u64, u32> = BTreeMap::new();
        let mut states = alloc::vec![init];
        ids.insert(init.pack(), 0);
        let mut next = Vec::new();
        let mut rewards = Vec::new();
        let mut parts = alloc::vec![0usize; n];
        let mut frontier = 0;
        while frontier < states.len() {
            let s = states[frontier];
            let terminal = rules.is_terminal(&s);
            for a in 0..na {
                let (succ, r) = if terminal {
                    (s, 0.0)
                } else {
                    actions.decode_into(a, &mut parts)?;
                    rules.step(&s, &parts)
                };
                let key = succ.pack();
                let id = match ids.get(&key) {
                    Some(&id) => id,
                    None => {
                        let id = states.len() as u32;
                        ids.insert(key, id);
                        states.push(succ);
                        id
                    }
                };
                next.push(id);
                rewards.push(r);
            }
            frontier += 1;
        }
        let terminal = states.iter().map(|s| rules.is_terminal(s)).collect();
        let lookup = ids.into_iter().collect();
        let task = TaskModel {
            name: String::from(cfg.kind.name()),
            num_states: states.len(),
            actions,
            transitions: Transitions::Deterministic(next),
            rewards: RewardTable::compact(rewards),
            terminal,
            initial_state: 0,
            gamma: cfg.gamma,
            horizon: cfg.horizon,
        };
        Ok(Domain {
            rules,
            states,
            lookup,
            task,
        })
    }

    pub fn by_kind(kind: DomainKind) -> Result<Domain> {
        match kind {
            DomainKind::Movers => build_movers(),
            DomainKind::Cleanup => build_cleanup(),
            DomainKind::Rescue => build_rescue(),
            DomainKind::Rescue2 => build_rescue_two(),
            DomainKind::Tiny => build_tiny(),
        }
    }

    pub fn task(&self) -> &TaskModel {
        &self.task
    }

    pub fn rules(&self) -> &dyn DomainRules {
        self.rules.as_ref()
    }

    pub fn config(&self) -> &DomainConfig {
        self.rules.config()
    }

    pub fn kind(&self) -> DomainKind {
        self.config().kind
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, id: usize) -> &FactoredState {
        &self.states[id]
    }

    pub fn state_id(&self, s: &FactoredState) -> Option<usize> {
        let key = s.pack();
        self.lookup
            .binary_search_by_key(&key, |&(k, _)| k)
            .ok()
            .map(|i| self.lookup[i].1 as usize)
    }

    /// Whether the rules define a compatible set for rule-based strategies.
    pub fn has_compatible_set(&self) -> bool {
        let profile = alloc::vec![0; self.config().n_agents()];
        self.rules.compatible(&self.states[0], &profile).is_some()
    }

    pub fn observe(&self, agent: usize, state_id: usize) -> StateView {
        self.rules.observe(agent, &self.states[state_id])
    }

    pub fn render(&self, state_id: usize) -> String {
        self.rules.render(&self.states[state_id])
    }
}

pub fn build_movers() -> Result<Domain> {
    Domain::build(Box::new(Movers::new()?))
}

pub fn build_cleanup() -> Result<Domain> {
    Domain::build(Box::new(Cleanup::new()?))
}

pub fn build_rescue() -> Result<Domain> {
    Domain::build(Box::new(Rescue::new()?))
}

pub fn build_rescue_two() -> Result<Domain> {
    Domain::build(Box::new(RescueTwo::new()?))
}

pub fn build_tiny() -> Result<Domain> {
    Domain::build(Box::new(Tiny::new()?))
}

/// Shared helpers for the grid domains.
pub(crate) mod common {
    use super::*;

    pub const MOVE_ACTIONS: [&str; 6] = ["north", "south", "west", "east", "stay", "interact"];

    pub fn grid_action_kind(a: usize) -> ActionKind {
        match a {
            0..=3 => ActionKind::Move(Dir::ALL[a]),
            4 => ActionKind::Stay,
            _ => ActionKind::Interact,
        }
    }

    pub fn names(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| String::from(*s)).collect()
    }

    /// Fills `out` with the uniform distribution over `support`; keeps `x`
    /// when the support is empty.
    pub fn uniform_over(out: &mut [f64], support: &[usize], x: usize) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if support.is_empty() {
            out[x] = 1.0;
        } else {
            let p = 1.0 / support.len() as f64;
            for &k in support {
                out[k] += p;
            }
        }
    }

    /// Keeps `x` with probability `1 - p_switch`, otherwise moves uniformly
    /// to one of `others` (which must not contain `x`).
    pub fn keep_or_switch(out: &mut [f64], x: usize, others: &[usize], p_switch: f64) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if others.is_empty() {
            out[x] = 1.0;
            return;
        }
        out[x] = 1.0 - p_switch;
        for &k in others {
            out[k] += p_switch / others.len() as f64;
        }
    }

    pub fn point_mass(out: &mut [f64], x: usize) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[x] = 1.0;
    }

    /// Teammate visibility: within the view radius, or standing on a
    /// landmark when landmarks are visible.
    pub fn sees_agent(grid: &GridSpec, cfg: &DomainConfig, landmark_cells: &[u8], own: u8, other: u8) -> bool {
        grid.distance(own, other) <= cfg.view_radius || (cfg.landmarks_visible && landmark_cells.contains(&other))
    }
}
