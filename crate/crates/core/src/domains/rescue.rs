//! Police officer and firefighter rescue people at three disaster sites.
//!
//! City hall and the campsite need one responder. The mall is only reachable
//! across a bridge, and repairing either bridge takes both responders.

use alloc::string::String;
use alloc::vec::Vec;

use super::common::{grid_action_kind, keep_or_switch, names, point_mass, sees_agent, uniform_over, MOVE_ACTIONS};
use super::{ActionKind, DomainConfig, DomainKind, DomainRules, FactoredState, GridSpec, PlanGoal, StateView};
use crate::Result;

const MAP: &str = include_str!("../../maps/rescue.txt");

pub const CITY_HALL: usize = 0;
pub const CAMPSITE: usize = 1;
pub const BRIDGE1: usize = 2;
pub const BRIDGE2: usize = 3;

/// Site status components: city hall, campsite, mall.
const HALL_C: usize = 2;
const CAMP_C: usize = 3;
const MALL_C: usize = 4;

const SWITCH_PROB: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Rescue {
    cfg: DomainConfig,
    grid: GridSpec,
    /// Cells of city hall, campsite, bridge 1 and bridge 2.
    targets: [u8; 4],
    start: [u8; 2],
}

impl Rescue {
    pub fn new() -> Result<Self> {
        let grid = GridSpec::parse(MAP)?;
        let targets = [
            grid.unique_landmark('C')?,
            grid.unique_landmark('S')?,
            grid.unique_landmark('B')?,
            grid.unique_landmark('D')?,
        ];
        let start = [grid.unique_landmark('p')?, grid.unique_landmark('f')?];
        let cfg = DomainConfig {
            kind: DomainKind::Rescue,
            horizon: 30,
            gamma: 0.95,
            agent_names: names(&["police", "firefighter"]),
            action_names: names(&MOVE_ACTIONS),
            latent_names: names(&["city_hall", "campsite", "bridge1", "bridge2"]),
            site_populations: alloc::vec![
                (String::from("city_hall"), 1),
                (String::from("campsite"), 2),
                (String::from("mall"), 4),
            ],
            view_radius: 1,
            landmarks_visible: true,
        };
        Ok(Rescue {
            cfg,
            grid,
            targets,
            start,
        })
    }

    /// Status component that a target resolves.
    fn component(x: usize) -> usize {
        match x {
            CITY_HALL => HALL_C,
            CAMPSITE => CAMP_C,
            _ => MALL_C,
        }
    }

    fn done(s: &FactoredState, x: usize) -> bool {
        s.get(Self::component(x)) == 1
    }

    /// Total people still waiting in `s`.
    pub fn remaining_population(s: &FactoredState) -> f64 {
        [(HALL_C, 1.0), (CAMP_C, 2.0), (MALL_C, 4.0)]
            .iter()
            .filter(|(c, _)| s.get(*c) == 0)
            .map(|(_, p)| p)
            .sum()
    }
}

impl DomainRules for Rescue {
    fn config(&self) -> &DomainConfig {
        &self.cfg
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn initial_state(&self) -> FactoredState {
        let mut s = FactoredState::default();
        s.set(0, self.start[0]);
        s.set(1, self.start[1]);
        s
    }

    fn action_kind(&self, action: usize) -> ActionKind {
        grid_action_kind(action)
    }

    fn step(&self, s: &FactoredState, actions: &[usize]) -> (FactoredState, f64) {
        let mut next = *s;
        let mut reward = 0.0;
        let acting = |i: usize| grid_action_kind(actions[i]) == ActionKind::Interact;
        for (i, &a) in actions.iter().enumerate() {
            let pos = s.get(i);
            match grid_action_kind(a) {
                ActionKind::Move(d) => next.set(i, self.grid.neighbor(pos, d)),
                ActionKind::Interact => {
                    if pos == self.targets[CITY_HALL] && next.get(HALL_C) == 0 {
                        next.set(HALL_C, 1);
                        reward += 1.0;
                    } else if pos == self.targets[CAMPSITE] && next.get(CAMP_C) == 0 {
                        next.set(CAMP_C, 1);
                        reward += 2.0;
                    }
                }
                ActionKind::Stay => {}
            }
        }
        let together = s.get(0) == s.get(1);
        let on_bridge = s.get(0) == self.targets[BRIDGE1] || s.get(0) == self.targets[BRIDGE2];
        if together && on_bridge && acting(0) && acting(1) && s.get(MALL_C) == 0 {
            next.set(MALL_C, 1);
            reward += 4.0;
        }
        (next, reward)
    }

    fn is_terminal(&self, s: &FactoredState) -> bool {
        s.get(HALL_C) == 1 && s.get(CAMP_C) == 1 && s.get(MALL_C) == 1
    }

    fn observe(&self, agent: usize, s: &FactoredState) -> StateView {
        let mut v = StateView::hidden(*s);
        let own = s.get(agent);
        let other = 1 - agent;
        v.show(agent);
        let teammate = s.get(other);
        if sees_agent(&self.grid, &self.cfg, &self.targets, own, teammate) {
            v.show(other);
        }
        let near = |cell: u8| self.grid.distance(own, cell) <= self.cfg.view_radius;
        // A site's status is known from nearby, or while the teammate is
        // visibly standing on it.
        let teammate_seen = v.is_visible(other);
        let at = |cell: u8| near(cell) || (teammate_seen && teammate == cell);
        if at(self.targets[CITY_HALL]) {
            v.show(HALL_C);
        }
        if at(self.targets[CAMPSITE]) {
            v.show(CAMP_C);
        }
        if at(self.targets[BRIDGE1]) || at(self.targets[BRIDGE2]) {
            v.show(MALL_C);
        }
        v
    }

    fn plan(&self, _agent: usize, x: usize, _estimate: &FactoredState) -> PlanGoal {
        PlanGoal {
            cell: Some(self.targets[x]),
            mode: 0,
        }
    }

    fn initial_latents(&self, _agent: usize) -> Vec<usize> {
        (0..4).collect()
    }

    fn latent_transition(
        &self,
        agent: usize,
        x: usize,
        estimate: &FactoredState,
        view: &StateView,
        seen: &[Option<usize>],
        out: &mut [f64],
    ) {
        let other = 1 - agent;
        let open: Vec<usize> = (0..4).filter(|&k| !Self::done(estimate, k)).collect();
        let others: Vec<usize> = open.iter().copied().filter(|&k| k != x).collect();
        if Self::done(estimate, x) {
            return uniform_over(out, &open, x);
        }
        let Some(teammate) = view.get(other) else {
            return point_mass(out, x);
        };
        let rescuing = seen[other].map(|a| grid_action_kind(a) == ActionKind::Interact) == Some(true);
        if x <= CAMPSITE && teammate == self.targets[x] && rescuing {
            return uniform_over(out, &others, x);
        }
        for bridge in [BRIDGE1, BRIDGE2] {
            if teammate == self.targets[bridge] && x != bridge {
                return keep_or_switch(out, x, &[bridge], SWITCH_PROB);
            }
        }
        point_mass(out, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Domain;
    use alloc::boxed::Box;

    const INTERACT: usize = 5;

    fn at(r: &Rescue, p: u8, q: u8) -> FactoredState {
        let mut s = r.initial_state();
        s.set(0, p);
        s.set(1, q);
        s
    }

    #[test]
    fn bridge_repair_needs_both() {
        let r = Rescue::new().unwrap();
        let b = r.targets[BRIDGE1];
        let (next, rew) = r.step(&at(&r, b, b), &[INTERACT, INTERACT]);
        assert_eq!(next.get(MALL_C), 1);
        assert_eq!(rew, 4.0);
        let (next, rew) = r.step(&at(&r, b, b), &[INTERACT, 4]);
        assert_eq!(next.get(MALL_C), 0);
        assert_eq!(rew, 0.0);
    }

    #[test]
    fn single_responder_sites() {
        let r = Rescue::new().unwrap();
        let s = at(&r, r.targets[CITY_HALL], r.start[1]);
        let (next, rew) = r.step(&s, &[INTERACT, 4]);
        assert_eq!(next.get(HALL_C), 1);
        assert_eq!(rew, 1.0);
        let s = at(&r, r.start[0], r.targets[CAMPSITE]);
        assert_eq!(r.step(&s, &[4, INTERACT]).1, 2.0);
    }

    #[test]
    fn teammate_on_landmark_is_visible() {
        let r = Rescue::new().unwrap();
        let s = at(&r, r.targets[CITY_HALL], r.targets[BRIDGE2]);
        assert!(r.observe(0, &s).is_visible(1));
        let s = at(&r, r.targets[CITY_HALL], r.start[1]);
        assert!(!r.observe(0, &s).is_visible(1));
    }

    #[test]
    fn teammate_at_bridge_pulls_with_small_probability() {
        let r = Rescue::new().unwrap();
        let s = at(&r, r.start[0], r.targets[BRIDGE1]);
        let v = r.observe(0, &s);
        let mut out = [0.0; 4];
        r.latent_transition(0, CAMPSITE, &s, &v, &[Some(0), Some(4)], &mut out);
        assert!((out[BRIDGE1] - 0.1).abs() < 1e-12);
        assert!((out[CAMPSITE] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn reachable_state_count() {
        let d = Domain::build(Box::new(Rescue::new().unwrap())).unwrap();
        let n = d.num_states();
        assert!((8_000..40_000).contains(&n), "{n}");
    }
}
