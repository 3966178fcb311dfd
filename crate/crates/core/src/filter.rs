//! Task-time filtering of each agent's mental state.
//!
//! The update at time `t` conditions on the states up to `s^t` and the
//! actions up to `a^{t−1}`:
//!
//! `F(t, j) ∝ Σ_k F(t−1, k) · T̂(j | k, a^{t−1}, s^t) · π̂(a_i^{t−1} | s^{t−1}, k)`.
//!
//! An intervention recommending `x_int` replaces each agent's filter by the
//! mixture `(1 − p_a) F + p_a δ(x_int)`; later updates use the same recursion.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{AgentBehaviorModel, LabeledDataset, TaskModel};
use crate::{Error, Result};

/// Per-agent posteriors over latents after observing the history up to `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub t: usize,
    pub state: usize,
    pub beliefs: Vec<Vec<f64>>,
}

impl FilterState {
    pub fn belief(&self, agent: usize) -> &[f64] {
        &self.beliefs[agent]
    }

    /// Per-agent argmax; ties go to the lowest latent id.
    pub fn map_estimate(&self) -> Vec<usize> {
        self.beliefs.iter().map(|b| argmax(b)).collect()
    }

    /// Posterior mass of each agent's MAP latent.
    pub fn map_confidence(&self) -> Vec<f64> {
        self.beliefs.iter().map(|b| b[argmax(b)]).collect()
    }
}

/// Index of the largest entry, the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Filter over the learned behavior models of a team.
#[derive(Debug, Clone, Copy)]
pub struct MentalStateFilter<'a> {
    task: &'a TaskModel,
    models: &'a [AgentBehaviorModel],
}

impl<'a> MentalStateFilter<'a> {
    pub fn new(task: &'a TaskModel, models: &'a [AgentBehaviorModel]) -> Result<Self> {
        if models.len() != task.n_agents() {
            return Err(Error::Inconsistent(alloc::format!(
                "{} models for {} agents",
                models.len(),
                task.n_agents()
            )));
        }
        for (i, m) in models.iter().enumerate() {
            if m.num_states != task.num_states
                || m.num_joint_actions != task.num_joint_actions()
                || m.num_actions != task.actions.size(i)
            {
                return Err(Error::Inconsistent(alloc::format!(
                    "model of agent {i} does not match the task shapes"
                )));
            }
        }
        Ok(MentalStateFilter { task, models })
    }

    pub fn models(&self) -> &'a [AgentBehaviorModel] {
        self.models
    }

    pub fn init(&self, s0: usize) -> Result<FilterState> {
        self.check_state(s0)?;
        Ok(FilterState {
            t: 0,
            state: s0,
            beliefs: self.models.iter().map(|m| m.initial_row(s0).to_vec()).collect(),
        })
    }

    /// Advances by one step given the joint action taken in `prev.state` and
    /// the state it led to.
    pub fn step(&self, prev: &FilterState, joint_action: usize, next_state: usize) -> Result<FilterState> {
        self.check_state(next_state)?;
        if joint_action >= self.task.num_joint_actions() {
            return Err(Error::IndexOutOfRange {
                what: "joint action",
                index: joint_action,
                size: self.task.num_joint_actions(),
            });
        }
        let t = prev.t + 1;
        let mut beliefs = Vec::with_capacity(self.models.len());
        for (i, (m, f)) in self.models.iter().zip(&prev.beliefs).enumerate() {
            let own = self.task.actions.component(joint_action, i);
            let mut out = vec![0.0; m.num_latents];
            for (k, &fk) in f.iter().enumerate() {
                let w = fk * m.policy_row(prev.state, k)[own];
                if w == 0.0 {
                    continue;
                }
                for (o, &p) in out.iter_mut().zip(m.transition_row(k, joint_action, next_state)) {
                    *o += w * p;
                }
            }
            let z: f64 = out.iter().sum();
            if !(z > 0.0) {
                return Err(Error::ZeroMass { agent: i, step: t });
            }
            out.iter_mut().for_each(|v| *v /= z);
            beliefs.push(out);
        }
        Ok(FilterState {
            t,
            state: next_state,
            beliefs,
        })
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.task.num_states {
            return Err(Error::IndexOutOfRange {
                what: "state id",
                index: s,
                size: self.task.num_states,
            });
        }
        Ok(())
    }
}

/// Mixes every agent's belief with a point mass on its recommended latent.
pub fn apply_intervention(state: &FilterState, profile: &[usize], acceptance: f64) -> Result<FilterState> {
    if !(0.0..=1.0).contains(&acceptance) {
        return Err(Error::InvalidParameter {
            name: "acceptance",
            reason: alloc::format!("{acceptance} not in [0, 1]"),
        });
    }
    if profile.len() != state.beliefs.len() {
        return Err(Error::Inconsistent(alloc::format!(
            "profile of {} latents for {} agents",
            profile.len(),
            state.beliefs.len()
        )));
    }
    let mut next = state.clone();
    for (b, &x) in next.beliefs.iter_mut().zip(profile) {
        if x >= b.len() {
            return Err(Error::IndexOutOfRange {
                what: "recommended latent",
                index: x,
                size: b.len(),
            });
        }
        b.iter_mut().for_each(|v| *v *= 1.0 - acceptance);
        b[x] += acceptance;
    }
    Ok(next)
}

/// Fraction of correct MAP estimates `(1/nh) Σ_i Σ_t 1(x_i^t = x̂_i^t)` per
/// trajectory, over the steps `t < h` at which the agents acted.
pub fn inference_accuracy(task: &TaskModel, models: &[AgentBehaviorModel], data: &LabeledDataset) -> Result<Vec<f64>> {
    let filter = MentalStateFilter::new(task, models)?;
    let mut out = Vec::with_capacity(data.len());
    for (n, tr) in data.trajectories.iter().enumerate() {
        let labels = tr
            .latents
            .as_ref()
            .ok_or_else(|| Error::Inconsistent(alloc::format!("evaluation trajectory {n} has no labels")))?;
        let steps = tr.len().max(1);
        let mut f = filter.init(tr.states[0] as usize)?;
        let mut hits = 0usize;
        for t in 0..steps {
            if t > 0 {
                f = filter.step(&f, tr.actions[t - 1] as usize, tr.states[t] as usize)?;
            }
            hits += f
                .map_estimate()
                .iter()
                .zip(labels)
                .filter(|(&x, l)| x == l[t] as usize)
                .count();
        }
        out.push(hits as f64 / (steps * models.len()) as f64);
    }
    Ok(out)
}
