use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::TaskModel;
use crate::{Error, Result};

/// One demonstration: `states[0..=L]`, joint `actions[0..L]` and, when the
/// trajectory is labeled, every agent's latent at every state.
///
/// `actions[t]` is taken in `states[t]` and leads to `states[t + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub states: Vec<u32>,
    pub actions: Vec<u32>,
    /// `latents[agent][t]`, one entry per state. `None` for unlabeled data.
    pub latents: Option<Vec<Vec<u16>>>,
}

impl Trajectory {
    /// Number of actions taken.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.latents.is_some()
    }

    pub fn unlabeled(&self) -> Trajectory {
        Trajectory {
            latents: None,
            ..self.clone()
        }
    }

    #[inline]
    pub fn latent(&self, agent: usize, t: usize) -> Option<usize> {
        self.latents.as_ref().map(|l| l[agent][t] as usize)
    }

    /// Checks lengths and id ranges against a task and per-agent latent sizes.
    pub fn check(&self, task: &TaskModel, latent_sizes: &[usize]) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(Error::Inconsistent(format!(
                "trajectory {}: {} states for {} actions",
                self.seed,
                self.states.len(),
                self.actions.len()
            )));
        }
        if let Some(&s) = self.states.iter().find(|&&s| s as usize >= task.num_states) {
            return Err(Error::IndexOutOfRange {
                what: "state id",
                index: s as usize,
                size: task.num_states,
            });
        }
        if let Some(&a) = self.actions.iter().find(|&&a| a as usize >= task.num_joint_actions()) {
            return Err(Error::IndexOutOfRange {
                what: "joint action id",
                index: a as usize,
                size: task.num_joint_actions(),
            });
        }
        if let Some(lat) = &self.latents {
            if lat.len() != latent_sizes.len() {
                return Err(Error::Inconsistent(format!(
                    "trajectory {}: labels for {} agents, expected {}",
                    self.seed,
                    lat.len(),
                    latent_sizes.len()
                )));
            }
            for (agent, (row, &size)) in lat.iter().zip(latent_sizes).enumerate() {
                if row.len() != self.states.len() {
                    return Err(Error::Inconsistent(format!(
                        "trajectory {}: agent {agent} has {} labels for {} states",
                        self.seed,
                        row.len(),
                        self.states.len()
                    )));
                }
                if let Some(&x) = row.iter().find(|&&x| x as usize >= size) {
                    return Err(Error::IndexOutOfRange {
                        what: "latent id",
                        index: x as usize,
                        size,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Demonstrations with per-trajectory supervision: each trajectory is either
/// fully labeled or not labeled at all.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub trajectories: Vec<Trajectory>,
}

impl LabeledDataset {
    pub fn new(trajectories: Vec<Trajectory>) -> Self {
        LabeledDataset { trajectories }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.trajectories.iter().filter(|t| t.is_labeled()).count()
    }

    /// Fraction of trajectories carrying labels (0 for an empty dataset).
    pub fn supervision_ratio(&self) -> f64 {
        if self.trajectories.is_empty() {
            0.0
        } else {
            self.labeled_count() as f64 / self.trajectories.len() as f64
        }
    }

    pub fn check(&self, task: &TaskModel, latent_sizes: &[usize]) -> Result<()> {
        self.trajectories.iter().try_for_each(|t| t.check(task, latent_sizes))
    }
}
