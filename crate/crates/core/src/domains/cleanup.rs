//! Two agents carry light trash bags to a truck, one bag per agent at a time.

use alloc::vec::Vec;

use super::common::{grid_action_kind, names, point_mass, sees_agent, uniform_over, MOVE_ACTIONS};
use super::{ActionKind, DomainConfig, DomainKind, DomainRules, FactoredState, GridSpec, PlanGoal, StateView};
use crate::Result;

const MAP: &str = include_str!("../../maps/cleanup.txt");

pub const NUM_BAGS: usize = 3;
pub const TRUCK: usize = NUM_BAGS;

pub const AT_SITE: u8 = 0;
/// Held by agent `i` is encoded as `HELD + i`.
pub const HELD: u8 = 1;
pub const DELIVERED: u8 = 3;

#[derive(Debug, Clone)]
pub struct Cleanup {
    cfg: DomainConfig,
    grid: GridSpec,
    sites: [u8; NUM_BAGS],
    truck: u8,
    start: [u8; 2],
}

impl Cleanup {
    pub fn new() -> Result<Self> {
        let grid = GridSpec::parse(MAP)?;
        let sites = [
            grid.unique_landmark('1')?,
            grid.unique_landmark('2')?,
            grid.unique_landmark('3')?,
        ];
        let truck = grid.unique_landmark('T')?;
        let start = [grid.unique_landmark('a')?, grid.unique_landmark('b')?];
        let cfg = DomainConfig {
            kind: DomainKind::Cleanup,
            horizon: 100,
            gamma: 0.99,
            agent_names: names(&["john", "rob"]),
            action_names: names(&MOVE_ACTIONS),
            latent_names: names(&["bag1", "bag2", "bag3", "truck"]),
            site_populations: Vec::new(),
            view_radius: 1,
            landmarks_visible: false,
        };
        Ok(Cleanup {
            cfg,
            grid,
            sites,
            truck,
            start,
        })
    }

    fn held_by(s: &FactoredState, agent: usize) -> Option<usize> {
        (0..NUM_BAGS).find(|&b| s.get(2 + b) == HELD + agent as u8)
    }
}

impl DomainRules for Cleanup {
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
        // Agent 0 resolves first, so it wins a simultaneous grab.
        for (i, &a) in actions.iter().enumerate() {
            let pos = s.get(i);
            let held = Self::held_by(&next, i);
            match grid_action_kind(a) {
                ActionKind::Move(d) => {
                    let p = self.grid.neighbor(pos, d);
                    if p != self.truck || held.is_some() {
                        next.set(i, p);
                    }
                }
                ActionKind::Interact => match held {
                    Some(b) if pos == self.truck => next.set(2 + b, DELIVERED),
                    None => {
                        if let Some(b) = self.sites.iter().position(|&c| c == pos) {
                            if next.get(2 + b) == AT_SITE {
                                next.set(2 + b, HELD + i as u8);
                            }
                        }
                    }
                    _ => {}
                },
                ActionKind::Stay => {}
            }
        }
        (next, -1.0)
    }

    fn is_terminal(&self, s: &FactoredState) -> bool {
        (0..NUM_BAGS).all(|b| s.get(2 + b) == DELIVERED)
    }

    fn observe(&self, agent: usize, s: &FactoredState) -> StateView {
        let mut v = StateView::hidden(*s);
        let own = s.get(agent);
        let other = 1 - agent;
        v.show(agent);
        let sees_other = sees_agent(&self.grid, &self.cfg, &[], own, s.get(other));
        if sees_other {
            v.show(other);
        }
        let near_truck = self.grid.distance(own, self.truck) <= self.cfg.view_radius;
        for b in 0..NUM_BAGS {
            let status = s.get(2 + b);
            if self.grid.distance(own, self.sites[b]) <= self.cfg.view_radius
                || status == HELD + agent as u8
                || (status == HELD + other as u8 && sees_other)
                || (status == DELIVERED && near_truck)
            {
                v.show(2 + b);
            }
        }
        v
    }

    fn num_plan_modes(&self) -> u8 {
        2
    }

    fn passable(&self, cell: u8, mode: u8) -> bool {
        cell != self.truck || mode == 1
    }

    /// A held bag always goes to the truck; a latent naming a bag that is no
    /// longer at its site falls back to the first bag still waiting.
    fn plan(&self, agent: usize, x: usize, estimate: &FactoredState) -> PlanGoal {
        let holding = Self::held_by(estimate, agent).is_some();
        let target = if holding || x == TRUCK || estimate.get(2 + x) != AT_SITE {
            (0..NUM_BAGS)
                .find(|&b| estimate.get(2 + b) == AT_SITE)
                .filter(|_| !holding)
        } else {
            Some(x)
        };
        PlanGoal {
            cell: Some(target.map_or(self.truck, |b| self.sites[b])),
            mode: u8::from(holding),
        }
    }

    fn initial_latents(&self, _agent: usize) -> Vec<usize> {
        (0..NUM_BAGS).collect()
    }

    fn latent_transition(
        &self,
        agent: usize,
        x: usize,
        estimate: &FactoredState,
        _view: &StateView,
        _seen: &[Option<usize>],
        out: &mut [f64],
    ) {
        if Self::held_by(estimate, agent).is_some() {
            return point_mass(out, TRUCK);
        }
        if x != TRUCK && estimate.get(2 + x) == AT_SITE {
            return point_mass(out, x);
        }
        let remaining: Vec<usize> = (0..NUM_BAGS).filter(|&b| estimate.get(2 + b) == AT_SITE).collect();
        uniform_over(out, &remaining, TRUCK);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Domain;
    use alloc::boxed::Box;

    const INTERACT: usize = 5;

    fn at(c: &Cleanup, p: u8, q: u8) -> FactoredState {
        let mut s = c.initial_state();
        s.set(0, p);
        s.set(1, q);
        s
    }

    #[test]
    fn single_agent_pickup() {
        let c = Cleanup::new().unwrap();
        let s = at(&c, c.sites[2], c.start[1]);
        let (next, _) = c.step(&s, &[INTERACT, 4]);
        assert_eq!(next.get(4), HELD);
    }

    #[test]
    fn pickup_of_held_bag_is_noop() {
        let c = Cleanup::new().unwrap();
        let mut s = at(&c, c.sites[2], c.sites[2]);
        s.set(4, HELD);
        let (next, _) = c.step(&s, &[4, INTERACT]);
        assert_eq!(next, s);
    }

    #[test]
    fn simultaneous_grab_goes_to_first_agent() {
        let c = Cleanup::new().unwrap();
        let s = at(&c, c.sites[0], c.sites[0]);
        let (next, _) = c.step(&s, &[INTERACT, INTERACT]);
        assert_eq!(next.get(2), HELD);
    }

    #[test]
    fn teammate_carrying_target_triggers_retarget() {
        let c = Cleanup::new().unwrap();
        let mut s = at(&c, c.start[0], c.truck);
        s.set(2, HELD + 1);
        let v = c.observe(0, &s);
        assert_eq!(v.get(2), Some(HELD + 1));
        let mut est = c.initial_state();
        v.merge_into(&mut est);
        let mut out = [0.0; 4];
        c.latent_transition(0, 0, &est, &v, &[None, None], &mut out);
        assert_eq!(out, [0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn reachable_state_count() {
        let d = Domain::build(Box::new(Cleanup::new().unwrap())).unwrap();
        let n = d.num_states();
        assert!((10_000..60_000).contains(&n), "{n}");
    }
}
