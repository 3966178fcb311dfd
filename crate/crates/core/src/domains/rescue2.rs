//! Three responders; two of the three sites need at least two of them.

use alloc::string::String;
use alloc::vec::Vec;

use super::common::{grid_action_kind, keep_or_switch, names, point_mass, sees_agent, uniform_over, MOVE_ACTIONS};
use super::{ActionKind, DomainConfig, DomainKind, DomainRules, FactoredState, GridSpec, PlanGoal, StateView};
use crate::Result;

const MAP: &str = include_str!("../../maps/rescue2.txt");

pub const CAMPSITE: usize = 0;
pub const CITY_HALL: usize = 1;
pub const MALL: usize = 2;

const N: usize = 3;
/// Responders needed and people rescued per site.
const NEEDED: [usize; 3] = [1, 2, 2];
const PEOPLE: [f64; 3] = [1.0, 2.0, 2.0];
const SWITCH_PROB: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct RescueTwo {
    cfg: DomainConfig,
    grid: GridSpec,
    targets: [u8; 3],
    start: u8,
}

impl RescueTwo {
    pub fn new() -> Result<Self> {
        let grid = GridSpec::parse(MAP)?;
        let mut targets = [0; 3];
        targets[CAMPSITE] = grid.unique_landmark('S')?;
        targets[CITY_HALL] = grid.unique_landmark('C')?;
        targets[MALL] = grid.unique_landmark('M')?;
        let start = grid.unique_landmark('H')?;
        let cfg = DomainConfig {
            kind: DomainKind::Rescue2,
            horizon: 15,
            gamma: 0.95,
            agent_names: names(&["police", "firefighter", "emt"]),
            action_names: names(&MOVE_ACTIONS),
            latent_names: names(&["campsite", "city_hall", "mall"]),
            site_populations: alloc::vec![
                (String::from("campsite"), 1),
                (String::from("city_hall"), 2),
                (String::from("mall"), 2),
            ],
            view_radius: 0,
            landmarks_visible: true,
        };
        Ok(RescueTwo {
            cfg,
            grid,
            targets,
            start,
        })
    }

    fn done(s: &FactoredState, site: usize) -> bool {
        s.get(N + site) == 1
    }

    pub fn remaining_population(s: &FactoredState) -> f64 {
        (0..3).filter(|&k| !Self::done(s, k)).map(|k| PEOPLE[k]).sum()
    }
}

impl DomainRules for RescueTwo {
    fn config(&self) -> &DomainConfig {
        &self.cfg
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn initial_state(&self) -> FactoredState {
        let mut s = FactoredState::default();
        for i in 0..N {
            s.set(i, self.start);
        }
        s
    }

    fn action_kind(&self, action: usize) -> ActionKind {
        grid_action_kind(action)
    }

    fn step(&self, s: &FactoredState, actions: &[usize]) -> (FactoredState, f64) {
        let mut next = *s;
        let mut reward = 0.0;
        let mut rescuers = [0usize; 3];
        for (i, &a) in actions.iter().enumerate() {
            let pos = s.get(i);
            match grid_action_kind(a) {
                ActionKind::Move(d) => next.set(i, self.grid.neighbor(pos, d)),
                ActionKind::Interact => {
                    if let Some(k) = self.targets.iter().position(|&c| c == pos) {
                        rescuers[k] += 1;
                    }
                }
                ActionKind::Stay => {}
            }
        }
        for k in 0..3 {
            if rescuers[k] >= NEEDED[k] && !Self::done(s, k) {
                next.set(N + k, 1);
                reward += PEOPLE[k];
            }
        }
        (next, reward)
    }

    fn is_terminal(&self, s: &FactoredState) -> bool {
        (0..3).all(|k| Self::done(s, k))
    }

    fn observe(&self, agent: usize, s: &FactoredState) -> StateView {
        let mut v = StateView::hidden(*s);
        let own = s.get(agent);
        v.show(agent);
        for j in (0..N).filter(|&j| j != agent) {
            if sees_agent(&self.grid, &self.cfg, &self.targets, own, s.get(j)) {
                v.show(j);
            }
        }
        for k in 0..3 {
            let cell = self.targets[k];
            let watched = (0..N).any(|j| v.is_visible(j) && s.get(j) == cell);
            if watched {
                v.show(N + k);
            }
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
        (0..3).collect()
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
        let open: Vec<usize> = (0..3).filter(|&k| !Self::done(estimate, k)).collect();
        if Self::done(estimate, x) {
            return uniform_over(out, &open, x);
        }
        let teammates = || (0..N).filter(move |&j| j != agent);
        let rescuing_at = |cell: u8| {
            teammates().any(|j| {
                view.get(j) == Some(cell) && seen[j].map(|a| grid_action_kind(a) == ActionKind::Interact) == Some(true)
            })
        };
        if NEEDED[x] == 1 && rescuing_at(self.targets[x]) {
            let others: Vec<usize> = open.iter().copied().filter(|&k| k != x).collect();
            return uniform_over(out, &others, x);
        }
        let pulls: Vec<usize> = open
            .iter()
            .copied()
            .filter(|&k| k != x && NEEDED[k] > 1)
            .filter(|&k| teammates().any(|j| view.get(j) == Some(self.targets[k])))
            .collect();
        if pulls.is_empty() {
            point_mass(out, x)
        } else {
            keep_or_switch(out, x, &pulls, SWITCH_PROB)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Domain;
    use alloc::boxed::Box;

    const INTERACT: usize = 5;

    fn at(r: &RescueTwo, p: [u8; 3]) -> FactoredState {
        let mut s = r.initial_state();
        for (i, &c) in p.iter().enumerate() {
            s.set(i, c);
        }
        s
    }

    #[test]
    fn two_rescuers_clear_the_mall() {
        let r = RescueTwo::new().unwrap();
        let m = r.targets[MALL];
        let s = at(&r, [m, m, r.start]);
        let (next, rew) = r.step(&s, &[INTERACT, INTERACT, 4]);
        assert!(RescueTwo::done(&next, MALL));
        assert_eq!(rew, 2.0);
    }

    #[test]
    fn lone_rescuer_at_city_hall_has_no_effect() {
        let r = RescueTwo::new().unwrap();
        let c = r.targets[CITY_HALL];
        let s = at(&r, [c, r.start, r.start]);
        let (next, rew) = r.step(&s, &[INTERACT, 4, 4]);
        assert_eq!(next, s);
        assert_eq!(rew, 0.0);
    }

    #[test]
    fn colocated_teammates_are_visible() {
        let r = RescueTwo::new().unwrap();
        let s = r.initial_state();
        let v = r.observe(2, &s);
        assert!((0..3).all(|j| v.is_visible(j)));
        let far = at(
            &r,
            [r.start, r.grid.neighbor(r.start, super::super::Dir::West), r.start],
        );
        assert!(!r.observe(0, &far).is_visible(1));
    }

    #[test]
    fn reachable_state_count() {
        let d = Domain::build(Box::new(RescueTwo::new().unwrap())).unwrap();
        let n = d.num_states();
        assert!((30_000..150_000).contains(&n), "{n}");
    }
}
