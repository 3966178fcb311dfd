//! Compatibility of joint mental-state profiles, scored by the value of the
//! learned team policy on the fully observable chain over `(s, x)`:
//!
//! `V(s, x) = Σ_a Π_i π̂_i(a_i | s, x_i) [R(s, a) + γ Σ_{s'} T(s' | s, a)
//!            Σ_{x'} Π_i T̂_i(x'_i | x_i, a, s') V(s', x')]`.
//!
//! Learned latent-transition tables store rows only for contexts seen in the
//! data. For any `(a, s')` where no agent has a stored row, the inner sum over
//! `x'` collapses to one contraction of `V(s', ·)` with the default rows, which
//! is independent of `x`. Each sweep therefore evaluates every state through a
//! factored contraction of per-action backups, plus exact corrections for the
//! few `(a, s')` pairs with stored rows.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{AgentBehaviorModel, JointIndex, TaskModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueConfig {
    pub gamma: f64,
    /// Largest change of a sweep at which evaluation stops.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ValueConfig {
    fn default() -> Self {
        ValueConfig {
            gamma: 0.95,
            tol: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

/// `V(s, x)` for every state and joint profile, with the best profile of each
/// state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityTable {
    pub num_states: usize,
    pub profiles: JointIndex,
    /// `V(s, x)` at `s * |profiles| + x`.
    pub values: Vec<f64>,
    pub best: Vec<u32>,
    pub gamma: f64,
    pub residual: f64,
    pub sweeps: usize,
}

impl CompatibilityTable {
    fn from_values(
        num_states: usize,
        profiles: JointIndex,
        values: Vec<f64>,
        gamma: f64,
        residual: f64,
        sweeps: usize,
    ) -> Self {
        let best = values
            .chunks_exact(profiles.len())
            .map(|row| crate::filter::argmax(row) as u32)
            .collect();
        CompatibilityTable {
            num_states,
            profiles,
            values,
            best,
            gamma,
            residual,
            sweeps,
        }
    }

    pub fn num_profiles(&self) -> usize {
        self.profiles.len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        let p = self.num_profiles();
        &self.values[s * p..(s + 1) * p]
    }

    pub fn value(&self, s: usize, profile: usize) -> f64 {
        self.values[s * self.num_profiles() + profile]
    }

    /// Profile with the highest value; ties go to the lowest joint id.
    pub fn best_profile(&self, s: usize) -> usize {
        self.best[s] as usize
    }

    pub fn best_value(&self, s: usize) -> f64 {
        self.value(s, self.best_profile(s))
    }

    /// `max_x' V(s, x') − V(s, x)`.
    pub fn regret(&self, s: usize, profile: usize) -> f64 {
        self.best_value(s) - self.value(s, profile)
    }

    pub fn benefit(&self, s: usize, profile: usize, cost: f64) -> f64 {
        self.regret(s, profile) - cost
    }

    /// Table whose values are multiplied by `factor`; used to check that
    /// rankings do not depend on the reward scale.
    pub fn scaled(&self, factor: f64) -> Self {
        let values = self.values.iter().map(|v| v * factor).collect();
        Self::from_values(
            self.num_states,
            self.profiles.clone(),
            values,
            self.gamma,
            self.residual * factor.abs(),
            self.sweeps,
        )
    }
}

/// Contracts the last axis of a row-major tensor with `mat`, a
/// `new × old` matrix, and moves the new axis to the front:
/// `out[y, o] = Σ_a mat[y, a] t[o, a]`.
fn contract_last(t: &[f64], old: usize, mat: &[f64], new: usize, out: &mut Vec<f64>) {
    out.clear();
    for m in mat.chunks_exact(old).take(new) {
        out.extend(
            t.chunks_exact(old)
                .map(|src| m.iter().zip(src).map(|(w, v)| w * v).sum::<f64>()),
        );
    }
}

/// Applies one matrix per axis: the result has shape `news` and entries
/// `Σ_a Π_k mats_k[y_k, a_k] t[a]`. Matrix `k` is
/// `mats[offsets[k]..offsets[k + 1]]`. The result is left in `buf`.
fn contract_all(
    buf: &mut Vec<f64>,
    spare: &mut Vec<f64>,
    dims: &[usize],
    mats: &[f64],
    offsets: &[usize],
    news: &[usize],
) {
    for axis in (0..dims.len()).rev() {
        contract_last(
            buf,
            dims[axis],
            &mats[offsets[axis]..offsets[axis + 1]],
            news[axis],
            spare,
        );
        core::mem::swap(buf, spare);
    }
}

fn prefix_offsets(sizes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut out = vec![0];
    for s in sizes {
        out.push(out[out.len() - 1] + s);
    }
    out
}

/// A transition `(s, a, s')` for which some agent has stored latent dynamics.
#[derive(Debug, Clone, Copy)]
struct Correction {
    action: u32,
    next: u32,
    prob: f64,
    /// Block of latent-transition matrices in `Evaluator::trans`.
    block: u32,
}

/// Sweeps between two extrapolation jumps.
const EXTRAPOLATION_SPACING: usize = 8;
/// Largest change of the contraction-rate estimate that counts as steady.
const EXTRAPOLATION_RATE_TOL: f64 = 1e-3;

struct Evaluator<'a> {
    task: &'a TaskModel,
    profiles: JointIndex,
    profile_parts: Vec<usize>,
    latent_dims: Vec<usize>,
    action_dims: Vec<usize>,
    /// Per state, the matrices `π_i[x_i][a_i]` of all agents back to back.
    policies: Vec<f64>,
    policy_offsets: Vec<usize>,
    defaults: Vec<f64>,
    default_offsets: Vec<usize>,
    /// Per stored `(a, s')`, the matrices `T̂_i[x_i][x'_i]` of all agents.
    trans: Vec<f64>,
    trans_offsets: Vec<usize>,
    /// `corrections[offsets[s]..offsets[s + 1]]` belong to state `s`.
    offsets: Vec<usize>,
    corrections: Vec<Correction>,
}

impl<'a> Evaluator<'a> {
    fn new(task: &'a TaskModel, models: &'a [AgentBehaviorModel]) -> Result<Self> {
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
        let n = models.len();
        let latent_dims: Vec<usize> = models.iter().map(|m| m.num_latents).collect();
        let action_dims: Vec<usize> = task.actions.sizes().to_vec();
        let profiles = JointIndex::new(latent_dims.clone());
        let mut profile_parts = vec![0; profiles.len() * n];
        for (p, parts) in profile_parts.chunks_exact_mut(n).enumerate() {
            profiles.decode_into(p, parts)?;
        }

        let policy_offsets = prefix_offsets(models.iter().map(|m| m.num_latents * m.num_actions));
        let block = policy_offsets[n];
        let mut policies = Vec::with_capacity(task.num_states * block);
        for s in 0..task.num_states {
            for m in models {
                for x in 0..m.num_latents {
                    policies.extend_from_slice(m.policy_row(s, x));
                }
            }
        }

        let ns = task.num_states as u64;
        let mut stored: Vec<u64> = models
            .iter()
            .flat_map(|m| {
                m.latent_transition
                    .keys()
                    .iter()
                    .map(move |&k| k % (m.num_joint_actions as u64 * ns))
            })
            .collect();
        stored.sort_unstable();
        stored.dedup();
        let trans_offsets = prefix_offsets(models.iter().map(|m| m.num_latents * m.num_latents));
        let mut trans = Vec::with_capacity(stored.len() * trans_offsets[n]);
        for &key in &stored {
            let (a, next) = ((key / ns) as usize, (key % ns) as usize);
            for m in models {
                for x in 0..m.num_latents {
                    trans.extend_from_slice(m.transition_row(x, a, next));
                }
            }
        }

        let mut offsets = Vec::with_capacity(task.num_states + 1);
        let mut corrections = Vec::new();
        offsets.push(0);
        for s in 0..task.num_states {
            if !task.is_terminal(s) && !stored.is_empty() {
                for a in 0..task.num_joint_actions() {
                    for (next, prob) in task.successors(s, a) {
                        if let Ok(block) = stored.binary_search(&(a as u64 * ns + next as u64)) {
                            corrections.push(Correction {
                                action: a as u32,
                                next: next as u32,
                                prob,
                                block: block as u32,
                            });
                        }
                    }
                }
            }
            offsets.push(corrections.len());
        }
        let defaults: Vec<f64> = models
            .iter()
            .flat_map(|m| m.latent_transition.default_row().iter().copied())
            .collect();
        Ok(Evaluator {
            task,
            profiles,
            profile_parts,
            default_offsets: prefix_offsets(latent_dims.iter().copied()),
            latent_dims,
            action_dims,
            policies,
            policy_offsets,
            defaults,
            trans,
            trans_offsets,
            offsets,
            corrections,
        })
    }

    fn run(&self, cfg: &ValueConfig) -> Result<CompatibilityTable> {
        if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: alloc::format!("{} not in (0, 1)", cfg.gamma),
            });
        }
        let task = self.task;
        let n = self.latent_dims.len();
        let np = self.profiles.len();
        let na = task.num_joint_actions();
        let block = self.policy_offsets[n];
        let tblock = self.trans_offsets[n];
        let ones = vec![1usize; n];

        let mut values = vec![0.0; task.num_states * np];
        // Contraction of `V(s, ·)` with the default latent-transition rows.
        let mut collapsed = vec![0.0; task.num_states];

        let (mut buf, mut spare) = (Vec::new(), Vec::new());
        let mut row = vec![0.0; np];
        let mut parts = vec![0usize; n];

        let mut previous = values.clone();
        let mut rates = [f64::NAN; 2];
        let mut last_residual = f64::NAN;
        let mut since_jump = 0;
        let mut residual = f64::INFINITY;
        for sweep in 1..=cfg.max_sweeps {
            residual = 0.0;
            previous.copy_from_slice(&values);
            for s in 0..task.num_states {
                if task.is_terminal(s) {
                    continue;
                }
                let pol = &self.policies[s * block..(s + 1) * block];
                buf.clear();
                buf.extend((0..na).map(|a| {
                    task.reward(s, a)
                        + cfg.gamma * task.successors(s, a).map(|(next, p)| p * collapsed[next]).sum::<f64>()
                }));
                contract_all(
                    &mut buf,
                    &mut spare,
                    &self.action_dims,
                    pol,
                    &self.policy_offsets,
                    &self.latent_dims,
                );
                row.copy_from_slice(&buf);

                for c in &self.corrections[self.offsets[s]..self.offsets[s + 1]] {
                    let next = c.next as usize;
                    task.actions.decode_into(c.action as usize, &mut parts)?;
                    let mats = &self.trans[c.block as usize * tblock..(c.block as usize + 1) * tblock];
                    buf.clear();
                    buf.extend_from_slice(&values[next * np..(next + 1) * np]);
                    contract_all(
                        &mut buf,
                        &mut spare,
                        &self.latent_dims,
                        mats,
                        &self.trans_offsets,
                        &self.latent_dims,
                    );
                    let scale = cfg.gamma * c.prob;
                    for (x, r) in row.iter_mut().enumerate() {
                        let xs = &self.profile_parts[x * n..(x + 1) * n];
                        let pa: f64 = (0..n)
                            .map(|i| pol[self.policy_offsets[i] + xs[i] * self.action_dims[i] + parts[i]])
                            .product();
                        *r += scale * pa * (buf[x] - collapsed[next]);
                    }
                }

                let old = &mut values[s * np..(s + 1) * np];
                for (o, &v) in old.iter_mut().zip(&row) {
                    residual = f64::max(residual, (v - *o).abs());
                    *o = v;
                }
                buf.clear();
                buf.extend_from_slice(&row);
                contract_all(
                    &mut buf,
                    &mut spare,
                    &self.latent_dims,
                    &self.defaults,
                    &self.default_offsets,
                    &ones,
                );
                collapsed[s] = buf[0];
            }
            if !residual.is_finite() {
                break;
            }
            if residual < cfg.tol {
                return Ok(CompatibilityTable::from_values(
                    task.num_states,
                    self.profiles.clone(),
                    values,
                    cfg.gamma,
                    residual,
                    sweep,
                ));
            }
            // Once the per-sweep change shrinks at a steady rate ρ, the
            // remaining error is dominated by one slow mode and is close to
            // `Δ ρ / (1 − ρ)`. Jumping there skips most of the slow tail; the
            // stopping rule above still certifies the result.
            let rate = residual / last_residual;
            last_residual = residual;
            rates = [rates[1], rate];
            since_jump += 1;
            if since_jump >= EXTRAPOLATION_SPACING && rate < 1.0 && (rates[1] - rates[0]).abs() < EXTRAPOLATION_RATE_TOL
            {
                let factor = rate / (1.0 - rate);
                for (v, p) in values.iter_mut().zip(&previous) {
                    *v += factor * (*v - p);
                }
                for s in 0..task.num_states {
                    buf.clear();
                    buf.extend_from_slice(&values[s * np..(s + 1) * np]);
                    contract_all(
                        &mut buf,
                        &mut spare,
                        &self.latent_dims,
                        &self.defaults,
                        &self.default_offsets,
                        &ones,
                    );
                    collapsed[s] = buf[0];
                }
                since_jump = 0;
                rates = [f64::NAN; 2];
                last_residual = f64::NAN;
            }
        }
        Err(Error::NotConverged {
            what: "policy evaluation",
            sweeps: cfg.max_sweeps,
            residual,
        })
    }
}

/// Evaluates the learned team policy on the centralized chain over `(s, x)`.
pub fn evaluate_team_value(
    task: &TaskModel,
    models: &[AgentBehaviorModel],
    cfg: &ValueConfig,
) -> Result<CompatibilityTable> {
    Evaluator::new(task, models)?.run(cfg)
}
