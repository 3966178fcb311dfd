//! Two agents move heavy boxes to a truck; every box needs both of them.

use alloc::vec::Vec;

use super::common::{grid_action_kind, keep_or_switch, names, point_mass, sees_agent, uniform_over, MOVE_ACTIONS};
use super::{ActionKind, DomainConfig, DomainKind, DomainRules, FactoredState, GridSpec, PlanGoal, StateView};
use crate::Result;

const MAP: &str = include_str!("../../maps/movers.txt");

pub const NUM_BOXES: usize = 3;
pub const TRUCK: usize = NUM_BOXES;

pub const AT_SITE: u8 = 0;
pub const CARRIED: u8 = 1;
pub const DELIVERED: u8 = 2;

const INTERACT: usize = 5;
const SWITCH_PROB: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Movers {
    cfg: DomainConfig,
    grid: GridSpec,
    sites: [u8; NUM_BOXES],
    truck: u8,
    start: [u8; 2],
}

impl Movers {
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
            kind: DomainKind::Movers,
            horizon: 150,
            gamma: 0.99,
            agent_names: names(&["alice", "rob"]),
            action_names: names(&MOVE_ACTIONS),
            latent_names: names(&["box1", "box2", "box3", "truck"]),
            site_populations: Vec::new(),
            view_radius: 1,
            landmarks_visible: false,
        };
        Ok(Movers {
            cfg,
            grid,
            sites,
            truck,
            start,
        })
    }

    pub fn sites(&self) -> &[u8; NUM_BOXES] {
        &self.sites
    }

    pub fn truck(&self) -> u8 {
        self.truck
    }

    fn carried_box(s: &FactoredState) -> Option<usize> {
        (0..NUM_BOXES).find(|&b| s.get(2 + b) == CARRIED)
    }

    fn remaining(s: &FactoredState) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_BOXES).filter(|&b| s.get(2 + b) == AT_SITE)
    }
}

impl DomainRules for Movers {
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
        let (a0, a1) = (actions[0], actions[1]);
        if let Some(b) = Self::carried_box(s) {
            // Both hold the box: they move or drop only in unison.
            if a0 == a1 {
                match grid_action_kind(a0) {
                    ActionKind::Move(d) => {
                        let p = self.grid.neighbor(s.get(0), d);
                        next.set(0, p);
                        next.set(1, p);
                    }
                    ActionKind::Interact if s.get(0) == self.truck => next.set(2 + b, DELIVERED),
                    _ => {}
                }
            }
        } else {
            for (i, &a) in actions.iter().enumerate() {
                if let ActionKind::Move(d) = grid_action_kind(a) {
                    let p = self.grid.neighbor(s.get(i), d);
                    if p != self.truck {
                        next.set(i, p);
                    }
                }
            }
            if a0 == INTERACT && a1 == INTERACT && s.get(0) == s.get(1) {
                if let Some(b) = self.sites.iter().position(|&c| c == s.get(0)) {
                    if s.get(2 + b) == AT_SITE {
                        next.set(2 + b, CARRIED);
                    }
                }
            }
        }
        (next, -1.0)
    }

    fn is_terminal(&self, s: &FactoredState) -> bool {
        (0..NUM_BOXES).all(|b| s.get(2 + b) == DELIVERED)
    }

    fn observe(&self, agent: usize, s: &FactoredState) -> StateView {
        let mut v = StateView::hidden(*s);
        let own = s.get(agent);
        let other = 1 - agent;
        v.show(agent);
        if sees_agent(&self.grid, &self.cfg, &[], own, s.get(other)) {
            v.show(other);
        }
        let near_truck = self.grid.distance(own, self.truck) <= self.cfg.view_radius;
        for b in 0..NUM_BOXES {
            let status = s.get(2 + b);
            if self.grid.distance(own, self.sites[b]) <= self.cfg.view_radius
                || status == CARRIED
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

    /// A carried box always goes to the truck; a latent naming a box that is
    /// no longer at its site falls back to the first box still waiting.
    fn plan(&self, _agent: usize, x: usize, estimate: &FactoredState) -> PlanGoal {
        let carrying = Self::carried_box(estimate).is_some();
        let target = if carrying || x == TRUCK || estimate.get(2 + x) != AT_SITE {
            Self::remaining(estimate).next().filter(|_| !carrying)
        } else {
            Some(x)
        };
        PlanGoal {
            cell: Some(target.map_or(self.truck, |b| self.sites[b])),
            mode: u8::from(carrying),
        }
    }

    fn initial_latents(&self, _agent: usize) -> Vec<usize> {
        (0..NUM_BOXES).collect()
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
        let remaining: Vec<usize> = Self::remaining(estimate).collect();
        if Self::carried_box(estimate).is_some() {
            point_mass(out, TRUCK);
        } else if x == TRUCK || estimate.get(2 + x) != AT_SITE {
            uniform_over(out, &remaining, x);
        } else {
            let own = estimate.get(agent);
            let near = self.grid.distance(own, self.sites[x]) <= self.cfg.view_radius;
            if near && !view.is_visible(1 - agent) {
                let others: Vec<usize> = remaining.iter().copied().filter(|&b| b != x).collect();
                keep_or_switch(out, x, &others, SWITCH_PROB);
            } else {
                point_mass(out, x);
            }
        }
    }

    fn compatible(&self, s: &FactoredState, profile: &[usize]) -> Option<bool> {
        let (x0, x1) = (profile[0], profile[1]);
        if x0 != x1 {
            return Some(false);
        }
        Some(if Self::carried_box(s).is_some() {
            x0 == TRUCK
        } else {
            x0 != TRUCK && s.get(2 + x0) == AT_SITE
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Domain;
    use alloc::boxed::Box;

    fn at(m: &Movers, p: u8, q: u8) -> FactoredState {
        let mut s = m.initial_state();
        s.set(0, p);
        s.set(1, q);
        s
    }

    #[test]
    fn joint_pickup_lifts_box() {
        let m = Movers::new().unwrap();
        let site = m.sites[0];
        let (next, r) = m.step(&at(&m, site, site), &[INTERACT, INTERACT]);
        assert_eq!(next.get(2), CARRIED);
        assert_eq!(r, -1.0);
    }

    #[test]
    fn lone_pickup_does_nothing() {
        let m = Movers::new().unwrap();
        let site = m.sites[0];
        let s = at(&m, site, m.start[1]);
        let (next, _) = m.step(&s, &[INTERACT, 4]);
        assert_eq!(next, s);
    }

    #[test]
    fn truck_only_enterable_while_carrying() {
        let m = Movers::new().unwrap();
        let s = at(&m, m.start[0], m.start[1]);
        // start a is west of the truck
        let (next, _) = m.step(&s, &[3, 4]);
        assert_eq!(next.get(0), m.start[0]);
        let mut carrying = at(&m, m.start[0], m.start[0]);
        carrying.set(2, CARRIED);
        let (next, _) = m.step(&carrying, &[3, 3]);
        assert_eq!(next.get(0), m.truck);
        assert_eq!(next.get(1), m.truck);
        let (done, _) = m.step(&next, &[INTERACT, INTERACT]);
        assert_eq!(done.get(2), DELIVERED);
    }

    #[test]
    fn carriers_disagreeing_stay_put() {
        let m = Movers::new().unwrap();
        let mut s = at(&m, m.start[0], m.start[0]);
        s.set(2, CARRIED);
        let (next, _) = m.step(&s, &[0, 1]);
        assert_eq!(next, s);
    }

    #[test]
    fn observation_masks_distant_teammate() {
        let m = Movers::new().unwrap();
        let s = at(&m, m.sites[0], m.sites[1]);
        let v = m.observe(0, &s);
        assert!(v.is_visible(0));
        assert!(!v.is_visible(1));
        let together = at(&m, m.sites[0], m.sites[0]);
        let v = m.observe(1, &together);
        assert!(v.is_visible(0) && v.is_visible(1));
        assert_eq!(v.get(2), Some(AT_SITE));
    }

    #[test]
    fn latent_rules() {
        let m = Movers::new().unwrap();
        let mut out = [0.0; 4];
        // en route: keep
        let s = at(&m, m.start[0], m.start[1]);
        let v = m.observe(0, &s);
        m.latent_transition(0, 1, &s, &v, &[None, None], &mut out);
        assert_eq!(out, [0.0, 1.0, 0.0, 0.0]);
        // at destination without teammate: switch w.p. 0.1
        let s = at(&m, m.sites[1], m.start[1]);
        let v = m.observe(0, &s);
        m.latent_transition(0, 1, &s, &v, &[None, None], &mut out);
        assert!((out[1] - 0.9).abs() < 1e-12);
        assert!((out[0] - 0.05).abs() < 1e-12 && (out[2] - 0.05).abs() < 1e-12);
        // carrying: truck
        let mut s = at(&m, m.sites[1], m.sites[1]);
        s.set(3, CARRIED);
        let v = m.observe(0, &s);
        m.latent_transition(0, 1, &s, &v, &[None, None], &mut out);
        assert_eq!(out, [0.0, 0.0, 0.0, 1.0]);
        // after a drop: uniform over remaining boxes
        s.set(3, DELIVERED);
        m.latent_transition(0, TRUCK, &s, &v, &[None, None], &mut out);
        assert_eq!(out, [0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn reachable_state_count() {
        let d = Domain::build(Box::new(Movers::new().unwrap())).unwrap();
        let n = d.num_states();
        assert!((20_000..80_000).contains(&n), "{n}");
        assert!(crate::model::validate_task(d.task()).is_empty());
    }
}
