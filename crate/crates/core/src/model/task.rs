use alloc::string::String;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use super::{uniform01, JointIndex};

/// Transition kernel `T_s(s' | s, a)`, stored per `(state, joint action)` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Transitions {
    /// One successor per row, reached with probability 1.
    Deterministic(Vec<u32>),
    /// Compressed sparse rows: `offsets[row]..offsets[row + 1]` index into
    /// `next` and `prob`.
    Stochastic {
        offsets: Vec<usize>,
        next: Vec<u32>,
        prob: Vec<f64>,
    },
}

/// Reward table `R(s, a)` per `(state, joint action)` row.
///
/// Gridworld rewards take a handful of distinct values, so large tables are
/// stored as a palette plus one byte per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RewardTable {
    Dense(Vec<f64>),
    Palette { values: Vec<f64>, index: Vec<u8> },
}

impl RewardTable {
    /// Palette form when at most 256 distinct values occur, dense otherwise.
    pub fn compact(rewards: Vec<f64>) -> Self {
        let mut values: Vec<f64> = Vec::new();
        let mut index = Vec::with_capacity(rewards.len());
        for &r in &rewards {
            let k = match values.iter().position(|v| v.to_bits() == r.to_bits()) {
                Some(k) => k,
                None if values.len() < 256 => {
                    values.push(r);
                    values.len() - 1
                }
                None => return RewardTable::Dense(rewards),
            };
            index.push(k as u8);
        }
        RewardTable::Palette { values, index }
    }

    pub fn len(&self) -> usize {
        match self {
            RewardTable::Dense(v) => v.len(),
            RewardTable::Palette { index, .. } => index.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, row: usize) -> f64 {
        match self {
            RewardTable::Dense(v) => v[row],
            RewardTable::Palette { values, index } => values[index[row] as usize],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|row| self.get(row))
    }
}

/// Tabular Dec-POMDP task: dense state ids, factored joint actions, transition
/// and reward tables, discount and horizon.
///
/// Observations are not tabulated here; every domain uses a deterministic
/// visibility mask that lives with the domain definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskModel {
    pub name: String,
    pub num_states: usize,
    pub actions: JointIndex,
    pub transitions: Transitions,
    /// `R(s, a)` indexed by `s * |A| + a`.
    pub rewards: RewardTable,
    pub terminal: Vec<bool>,
    pub initial_state: usize,
    pub gamma: f64,
    pub horizon: usize,
}

/// Iterator over `(next_state, probability)` pairs of one transition row.
#[derive(Debug, Clone)]
pub enum Successors<'a> {
    One(Option<usize>),
    Many(core::iter::Zip<core::slice::Iter<'a, u32>, core::slice::Iter<'a, f64>>),
}

impl Iterator for Successors<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            Successors::One(s) => s.take().map(|s| (s, 1.0)),
            Successors::Many(it) => it.next().map(|(&s, &p)| (s as usize, p)),
        }
    }
}

impl TaskModel {
    pub fn n_agents(&self) -> usize {
        self.actions.arity()
    }

    pub fn num_joint_actions(&self) -> usize {
        self.actions.len()
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> usize {
        s * self.actions.len() + a
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards.get(self.row(s, a))
    }

    #[inline]
    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn successors(&self, s: usize, a: usize) -> Successors<'_> {
        let row = self.row(s, a);
        match &self.transitions {
            Transitions::Deterministic(next) => Successors::One(Some(next[row] as usize)),
            Transitions::Stochastic { offsets, next, prob } => {
                let (lo, hi) = (offsets[row], offsets[row + 1]);
                Successors::Many(next[lo..hi].iter().zip(prob[lo..hi].iter()))
            }
        }
    }

    /// The successor if the row is deterministic.
    #[inline]
    pub fn deterministic_next(&self, s: usize, a: usize) -> Option<usize> {
        match &self.transitions {
            Transitions::Deterministic(next) => Some(next[self.row(s, a)] as usize),
            Transitions::Stochastic { .. } => None,
        }
    }

    pub fn sample_next<R: RngCore + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        match &self.transitions {
            Transitions::Deterministic(next) => next[self.row(s, a)] as usize,
            Transitions::Stochastic { .. } => {
                let u = uniform01(rng);
                let mut acc = 0.0;
                let mut last = s;
                for (next, p) in self.successors(s, a) {
                    acc += p;
                    last = next;
                    if u < acc {
                        return next;
                    }
                }
                last
            }
        }
    }
}
