use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Categorical rows keyed by a dense context id.
///
/// Only visited contexts are stored; every other context reads the shared
/// `default` row. This keeps tables over large `(state, latent)` or
/// `(latent, joint action, next state)` context spaces small while behaving
/// exactly like the dense table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalTable {
    width: usize,
    num_contexts: u64,
    keys: Vec<u64>,
    rows: Vec<f64>,
    default: Vec<f64>,
}

impl CategoricalTable {
    /// Table whose rows are all uniform.
    pub fn uniform(width: usize, num_contexts: u64) -> Self {
        Self::with_default(width, num_contexts, alloc::vec![1.0 / width as f64; width])
    }

    pub fn with_default(width: usize, num_contexts: u64, default: Vec<f64>) -> Self {
        assert_eq!(default.len(), width, "default row width");
        CategoricalTable {
            width,
            num_contexts,
            keys: Vec::new(),
            rows: Vec::new(),
            default,
        }
    }

    /// Builds a table from explicit `(context, row)` pairs. Later duplicates
    /// win.
    pub fn from_rows<I>(width: usize, num_contexts: u64, default: Vec<f64>, rows: I) -> Self
    where
        I: IntoIterator<Item = (u64, Vec<f64>)>,
    {
        let mut b = TableBuilder::new(width, num_contexts, default);
        for (k, r) in rows {
            b.set(k, r);
        }
        b.build()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_contexts(&self) -> u64 {
        self.num_contexts
    }

    pub fn num_stored(&self) -> usize {
        self.keys.len()
    }

    pub fn default_row(&self) -> &[f64] {
        &self.default
    }

    #[inline]
    pub fn position(&self, key: u64) -> Option<usize> {
        self.keys.binary_search(&key).ok()
    }

    /// Row of a context; the default row when the context is not stored.
    #[inline]
    pub fn row(&self, key: u64) -> &[f64] {
        self.stored_row(key).unwrap_or(&self.default)
    }

    #[inline]
    pub fn stored_row(&self, key: u64) -> Option<&[f64]> {
        self.position(key)
            .map(|i| &self.rows[i * self.width..(i + 1) * self.width])
    }

    #[inline]
    pub fn get(&self, key: u64, col: usize) -> f64 {
        self.row(key)[col]
    }

    /// Stored `(context, row)` pairs in ascending context order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f64])> + '_ {
        self.keys
            .iter()
            .zip(self.rows.chunks_exact(self.width.max(1)))
            .map(|(&k, r)| (k, r))
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    /// Applies `f` to every stored row and to the default row.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let default = f(&self.default);
        let mut rows = Vec::with_capacity(self.rows.len());
        for (_, r) in self.iter() {
            rows.extend(f(r));
        }
        CategoricalTable {
            width: default.len(),
            num_contexts: self.num_contexts,
            keys: self.keys.clone(),
            rows,
            default,
        }
    }
}

/// Incremental constructor for [`CategoricalTable`].
#[derive(Debug, Clone)]
pub struct TableBuilder {
    width: usize,
    num_contexts: u64,
    default: Vec<f64>,
    rows: BTreeMap<u64, Vec<f64>>,
}

impl TableBuilder {
    pub fn new(width: usize, num_contexts: u64, default: Vec<f64>) -> Self {
        TableBuilder {
            width,
            num_contexts,
            default,
            rows: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: u64, row: Vec<f64>) {
        assert_eq!(row.len(), self.width, "row width");
        self.rows.insert(key, row);
    }

    pub fn build(self) -> CategoricalTable {
        let mut keys = Vec::with_capacity(self.rows.len());
        let mut flat = Vec::with_capacity(self.rows.len() * self.width);
        for (k, r) in self.rows {
            keys.push(k);
            flat.extend(r);
        }
        CategoricalTable {
            width: self.width,
            num_contexts: self.num_contexts,
            keys,
            rows: flat,
            default: self.default,
        }
    }
}

/// Behavior of one team member: latent set size, initial latent distribution
/// `b(x | s0)`, latent dynamics `T_x(x' | x, a, s')` and policy `π(a_i | s, x)`.
///
/// Context encodings:
/// * initial: `s0`
/// * latent transition: `(x * |A| + a) * |S| + s'` with `a` the joint action
/// * policy: `s * |X| + x`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBehaviorModel {
    pub num_latents: usize,
    pub num_actions: usize,
    pub num_states: usize,
    pub num_joint_actions: usize,
    pub initial: CategoricalTable,
    pub latent_transition: CategoricalTable,
    pub policy: CategoricalTable,
}

impl AgentBehaviorModel {
    /// All-uniform model with the given shapes.
    pub fn uniform(num_latents: usize, num_actions: usize, num_states: usize, num_joint_actions: usize) -> Self {
        let (s, x, a) = (num_states as u64, num_latents as u64, num_joint_actions as u64);
        AgentBehaviorModel {
            num_latents,
            num_actions,
            num_states,
            num_joint_actions,
            initial: CategoricalTable::uniform(num_latents, s),
            latent_transition: CategoricalTable::uniform(num_latents, x * a * s),
            policy: CategoricalTable::uniform(num_actions, s * x),
        }
    }

    #[inline]
    pub fn transition_key(&self, x: usize, joint_action: usize, next_state: usize) -> u64 {
        ((x * self.num_joint_actions + joint_action) as u64) * self.num_states as u64 + next_state as u64
    }

    #[inline]
    pub fn policy_key(&self, s: usize, x: usize) -> u64 {
        (s * self.num_latents + x) as u64
    }

    pub fn split_transition_key(&self, key: u64) -> (usize, usize, usize) {
        let s_next = (key % self.num_states as u64) as usize;
        let rest = (key / self.num_states as u64) as usize;
        (rest / self.num_joint_actions, rest % self.num_joint_actions, s_next)
    }

    pub fn split_policy_key(&self, key: u64) -> (usize, usize) {
        let key = key as usize;
        (key / self.num_latents, key % self.num_latents)
    }

    #[inline]
    pub fn initial_row(&self, s0: usize) -> &[f64] {
        self.initial.row(s0 as u64)
    }

    #[inline]
    pub fn transition_row(&self, x: usize, joint_action: usize, next_state: usize) -> &[f64] {
        self.latent_transition
            .row(self.transition_key(x, joint_action, next_state))
    }

    #[inline]
    pub fn policy_row(&self, s: usize, x: usize) -> &[f64] {
        self.policy.row(self.policy_key(s, x))
    }
}

/// Access to the three factors of a latent chain, as probabilities or as any
/// other nonnegative weights (the learner plugs in expected-log parameters).
pub trait LatentChain {
    fn num_latents(&self) -> usize;

    /// Weights of `x0` given the initial state.
    fn initial_weights(&self, s0: usize, out: &mut [f64]);

    /// Weights of `x'` given `x`, the joint action and the next state.
    fn transition_weights(&self, x: usize, joint_action: usize, next_state: usize, out: &mut [f64]);

    /// Weight of the agent's own action in state `s` under latent `x`.
    fn action_weight(&self, s: usize, x: usize, own_action: usize) -> f64;
}

impl LatentChain for AgentBehaviorModel {
    fn num_latents(&self) -> usize {
        self.num_latents
    }

    fn initial_weights(&self, s0: usize, out: &mut [f64]) {
        out.copy_from_slice(self.initial_row(s0));
    }

    fn transition_weights(&self, x: usize, joint_action: usize, next_state: usize, out: &mut [f64]) {
        out.copy_from_slice(self.transition_row(x, joint_action, next_state));
    }

    fn action_weight(&self, s: usize, x: usize, own_action: usize) -> f64 {
        self.policy_row(s, x)[own_action]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn stored_rows_override_default() {
        let t = CategoricalTable::from_rows(2, 10, vec![0.5, 0.5], vec![(3, vec![0.9, 0.1]), (1, vec![0.2, 0.8])]);
        assert_eq!(t.row(3), &[0.9, 0.1]);
        assert_eq!(t.row(1), &[0.2, 0.8]);
        assert_eq!(t.row(7), &[0.5, 0.5]);
        assert_eq!(t.keys(), &[1, 3]);
    }

    #[test]
    fn key_round_trip() {
        let m = AgentBehaviorModel::uniform(4, 6, 100, 36);
        let k = m.transition_key(3, 35, 99);
        assert_eq!(m.split_transition_key(k), (3, 35, 99));
        assert!(k < m.latent_transition.num_contexts());
        assert_eq!(m.split_policy_key(m.policy_key(42, 2)), (42, 2));
    }
}
