//! Single-agent tabular MDPs solved by value iteration.
//!
//! Ground-truth agents plan on small deterministic MDPs over their own
//! position; the solutions are softened into stochastic policies.

use alloc::vec;
use alloc::vec::Vec;

use crate::special::exp;
use crate::{Error, Result};

/// Deterministic MDP with absorbing terminal states.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    /// Successor of `(s, a)` at `s * num_actions + a`.
    pub next: Vec<u32>,
    pub reward: Vec<f64>,
    pub terminal: Vec<bool>,
}

/// Fixed point of the Bellman optimality operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub values: Vec<f64>,
    /// `Q(s, a)` at `s * num_actions + a`.
    pub q: Vec<f64>,
    pub sweeps: usize,
    pub residual: f64,
}

impl ValueSolution {
    pub fn q_row(&self, s: usize, num_actions: usize) -> &[f64] {
        &self.q[s * num_actions..(s + 1) * num_actions]
    }
}

impl TabularMdp {
    fn q_value(&self, values: &[f64], s: usize, a: usize, gamma: f64) -> f64 {
        let row = s * self.num_actions + a;
        self.reward[row] + gamma * values[self.next[row] as usize]
    }

    /// Runs synchronous value iteration until the largest update is below
    /// `tol`. Terminal states keep value 0.
    pub fn value_iteration(&self, gamma: f64, tol: f64, max_sweeps: usize) -> Result<ValueSolution> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: alloc::format!("{gamma} not in (0, 1)"),
            });
        }
        let mut values = vec![0.0; self.num_states];
        let mut next_values = vec![0.0; self.num_states];
        let mut residual = f64::INFINITY;
        for sweep in 1..=max_sweeps {
            residual = 0.0;
            for s in 0..self.num_states {
                let v = if self.terminal[s] {
                    0.0
                } else {
                    (0..self.num_actions)
                        .map(|a| self.q_value(&values, s, a, gamma))
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                residual = f64::max(residual, (v - values[s]).abs());
                next_values[s] = v;
            }
            core::mem::swap(&mut values, &mut next_values);
            if residual < tol {
                let mut q = vec![0.0; self.num_states * self.num_actions];
                for s in 0..self.num_states {
                    for a in 0..self.num_actions {
                        q[s * self.num_actions + a] = if self.terminal[s] {
                            0.0
                        } else {
                            self.q_value(&values, s, a, gamma)
                        };
                    }
                }
                return Ok(ValueSolution {
                    values,
                    q,
                    sweeps: sweep,
                    residual,
                });
            }
        }
        Err(Error::NotConverged {
            what: "value iteration",
            sweeps: max_sweeps,
            residual,
        })
    }
}

/// Boltzmann distribution over action values. Exact ties receive equal
/// probability; `temperature` must be positive.
pub fn softmax(q: &[f64], temperature: f64) -> Vec<f64> {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = q.iter().map(|&v| exp((v - max) / temperature)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}
