//! Two agents in a three-cell corridor who must meet at the same end.
//!
//! Small enough (9 states, 3 actions, 2 mental states) for brute-force
//! enumeration of every latent sequence.

use alloc::vec::Vec;

use super::common::{keep_or_switch, names, point_mass};
use super::{ActionKind, Dir, DomainConfig, DomainKind, DomainRules, FactoredState, GridSpec, PlanGoal, StateView};
use crate::Result;

const MAP: &str = include_str!("../../maps/tiny.txt");

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
const SWITCH_PROB: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct Tiny {
    cfg: DomainConfig,
    grid: GridSpec,
    ends: [u8; 2],
    start: u8,
}

impl Tiny {
    pub fn new() -> Result<Self> {
        let grid = GridSpec::parse(MAP)?;
        let ends = [grid.unique_landmark('l')?, grid.unique_landmark('r')?];
        let start = grid.unique_landmark('m')?;
        let cfg = DomainConfig {
            kind: DomainKind::Tiny,
            horizon: 6,
            gamma: 0.95,
            agent_names: names(&["left_agent", "right_agent"]),
            action_names: names(&["west", "east", "wait"]),
            latent_names: names(&["left", "right"]),
            site_populations: Vec::new(),
            view_radius: 0,
            landmarks_visible: false,
        };
        Ok(Tiny { cfg, grid, ends, start })
    }
}

impl DomainRules for Tiny {
    fn config(&self) -> &DomainConfig {
        &self.cfg
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn initial_state(&self) -> FactoredState {
        let mut s = FactoredState::default();
        s.set(0, self.start);
        s.set(1, self.start);
        s
    }

    fn action_kind(&self, action: usize) -> ActionKind {
        match action {
            0 => ActionKind::Move(Dir::West),
            1 => ActionKind::Move(Dir::East),
            _ => ActionKind::Interact,
        }
    }

    fn step(&self, s: &FactoredState, actions: &[usize]) -> (FactoredState, f64) {
        let mut next = *s;
        for (i, &a) in actions.iter().enumerate() {
            if let ActionKind::Move(d) = self.action_kind(a) {
                next.set(i, self.grid.neighbor(s.get(i), d));
            }
        }
        let reward = if self.is_terminal(&next) { 1.0 } else { 0.0 };
        (next, reward)
    }

    fn is_terminal(&self, s: &FactoredState) -> bool {
        s.get(0) == s.get(1) && self.ends.contains(&s.get(0))
    }

    fn observe(&self, agent: usize, s: &FactoredState) -> StateView {
        let mut v = StateView::hidden(*s);
        v.show(agent);
        if s.get(0) == s.get(1) {
            v.show(1 - agent);
        }
        v
    }

    fn plan(&self, _agent: usize, x: usize, _estimate: &FactoredState) -> PlanGoal {
        PlanGoal {
            cell: Some(self.ends[x]),
            mode: 0,
        }
    }

    fn initial_latents(&self, _agent: usize) -> Vec<usize> {
        alloc::vec![LEFT, RIGHT]
    }

    fn latent_transition(
        &self,
        agent: usize,
        x: usize,
        estimate: &FactoredState,
        view: &StateView,
        _seen: &[Option<usize>],
        out: &mut [f64],
    ) {
        if estimate.get(agent) == self.ends[x] && !view.is_visible(1 - agent) {
            keep_or_switch(out, x, &[1 - x], SWITCH_PROB);
        } else {
            point_mass(out, x);
        }
    }
}
