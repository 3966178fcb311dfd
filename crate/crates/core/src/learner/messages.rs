//! Decoupled per-agent forward-backward messages.
//!
//! For one agent the chain factorizes into local potentials: the initial
//! weights `b(x0 | s0)`, the likelihood of the agent's own action at every
//! step, and the latent transition matrix between consecutive steps. Both
//! passes normalize every time slice, so the log normalizers of the forward
//! pass add up to the log evidence of the agent's action sequence.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{JointIndex, LatentChain, Trajectory};
use crate::special::ln;
use crate::{Error, Result};

/// Local potentials of one agent's latent chain along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPotentials {
    pub num_latents: usize,
    /// Number of actions `L`; there are `L + 1` latent steps.
    pub len: usize,
    pub initial: Vec<f64>,
    /// `emit[t * X + x]`: weight of the own action at step `t` (1 at `t = L`).
    pub emit: Vec<f64>,
    /// `trans[(t * X + j) * X + k]`: weight of `x^{t+1} = k` given `x^t = j`.
    pub trans: Vec<f64>,
}

impl ChainPotentials {
    /// Empty potentials for `len` actions, to be filled in by the caller.
    pub fn zeroed(num_latents: usize, len: usize) -> Self {
        ChainPotentials {
            num_latents,
            len,
            initial: vec![0.0; num_latents],
            emit: vec![1.0; (len + 1) * num_latents],
            trans: vec![0.0; len * num_latents * num_latents],
        }
    }

    /// Collects the potentials of `agent` from any latent chain.
    pub fn from_chain<C: LatentChain + ?Sized>(
        chain: &C,
        actions: &JointIndex,
        agent: usize,
        traj: &Trajectory,
    ) -> Self {
        let nx = chain.num_latents();
        let mut p = Self::zeroed(nx, traj.len());
        chain.initial_weights(traj.states[0] as usize, &mut p.initial);
        for t in 0..p.len {
            let s = traj.states[t] as usize;
            let a = traj.actions[t] as usize;
            let own = actions.component(a, agent);
            for x in 0..nx {
                p.emit[t * nx + x] = chain.action_weight(s, x, own);
            }
            let next = traj.states[t + 1] as usize;
            for j in 0..nx {
                let lo = (t * nx + j) * nx;
                chain.transition_weights(j, a, next, &mut p.trans[lo..lo + nx]);
            }
        }
        p
    }

    #[inline]
    pub fn trans_row(&self, t: usize, j: usize) -> &[f64] {
        let nx = self.num_latents;
        let lo = (t * nx + j) * nx;
        &self.trans[lo..lo + nx]
    }

    #[inline]
    pub fn emit_row(&self, t: usize) -> &[f64] {
        &self.emit[t * self.num_latents..(t + 1) * self.num_latents]
    }
}

/// Per-step normalized messages over `(time, latent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageTable {
    pub num_latents: usize,
    pub steps: usize,
    pub values: Vec<f64>,
    /// Log of each step's normalizer.
    pub log_norm: Vec<f64>,
}

impl MessageTable {
    #[inline]
    pub fn at(&self, t: usize) -> &[f64] {
        &self.values[t * self.num_latents..(t + 1) * self.num_latents]
    }

    /// Sum of the log normalizers: the log evidence for forward messages.
    pub fn log_evidence(&self) -> f64 {
        self.log_norm.iter().sum()
    }
}

fn normalize(v: &mut [f64], agent: usize, step: usize) -> Result<f64> {
    let z: f64 = v.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::ZeroMass { agent, step });
    }
    v.iter_mut().for_each(|x| *x /= z);
    Ok(z)
}

/// `F(0, j) ∝ b(j | s0) π(a^0 | s0, j)` and
/// `F(t, j) ∝ Σ_k F(t-1, k) T(j | k, a^{t-1}, s^t) π(a^t | s^t, j)`.
pub fn forward(p: &ChainPotentials, agent: usize) -> Result<MessageTable> {
    let nx = p.num_latents;
    let steps = p.len + 1;
    let mut values = vec![0.0; steps * nx];
    let mut log_norm = vec![0.0; steps];
    for j in 0..nx {
        values[j] = p.initial[j] * p.emit[j];
    }
    log_norm[0] = ln(normalize(&mut values[..nx], agent, 0)?);
    for t in 1..steps {
        let (done, rest) = values.split_at_mut(t * nx);
        let prev = &done[(t - 1) * nx..];
        let cur = &mut rest[..nx];
        for (k, &fk) in prev.iter().enumerate() {
            if fk == 0.0 {
                continue;
            }
            for (c, &w) in cur.iter_mut().zip(p.trans_row(t - 1, k)) {
                *c += fk * w;
            }
        }
        for (c, &e) in cur.iter_mut().zip(p.emit_row(t)) {
            *c *= e;
        }
        log_norm[t] = ln(normalize(cur, agent, t)?);
    }
    Ok(MessageTable {
        num_latents: nx,
        steps,
        values,
        log_norm,
    })
}

/// `B(L, ·) = 1` and
/// `B(t, j) ∝ Σ_k T(k | j, a^t, s^{t+1}) π(a^{t+1} | s^{t+1}, k) B(t+1, k)`.
pub fn backward(p: &ChainPotentials, agent: usize) -> Result<MessageTable> {
    let nx = p.num_latents;
    let steps = p.len + 1;
    let mut values = vec![0.0; steps * nx];
    let mut log_norm = vec![0.0; steps];
    values[p.len * nx..].iter_mut().for_each(|v| *v = 1.0);
    let mut msg = vec![0.0; nx];
    for t in (0..p.len).rev() {
        let (head, tail) = values.split_at_mut((t + 1) * nx);
        for ((m, &b), &e) in msg.iter_mut().zip(&tail[..nx]).zip(p.emit_row(t + 1)) {
            *m = b * e;
        }
        let cur = &mut head[t * nx..];
        for (j, c) in cur.iter_mut().enumerate() {
            *c = p.trans_row(t, j).iter().zip(&msg).map(|(w, m)| w * m).sum();
        }
        log_norm[t] = ln(normalize(cur, agent, t)?);
    }
    Ok(MessageTable {
        num_latents: nx,
        steps,
        values,
        log_norm,
    })
}

/// Smoothed singleton and pairwise posteriors of one agent's latents.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub num_latents: usize,
    /// `single[t * X + j] = q(x^t = j)`.
    pub single: Vec<f64>,
    /// `pair[(t * X + j) * X + k] = q(x^t = j, x^{t+1} = k)`.
    pub pair: Vec<f64>,
}

impl Marginals {
    #[inline]
    pub fn at(&self, t: usize) -> &[f64] {
        &self.single[t * self.num_latents..(t + 1) * self.num_latents]
    }

    #[inline]
    pub fn pair_at(&self, t: usize) -> &[f64] {
        let n = self.num_latents * self.num_latents;
        &self.pair[t * n..(t + 1) * n]
    }

    /// Point masses on the labels of a supervised trajectory.
    pub fn from_labels(num_latents: usize, labels: &[u16]) -> Self {
        let nx = num_latents;
        let mut single = vec![0.0; labels.len() * nx];
        let mut pair = vec![0.0; labels.len().saturating_sub(1) * nx * nx];
        for (t, &x) in labels.iter().enumerate() {
            single[t * nx + x as usize] = 1.0;
            if t + 1 < labels.len() {
                pair[(t * nx + x as usize) * nx + labels[t + 1] as usize] = 1.0;
            }
        }
        Marginals {
            num_latents,
            single,
            pair,
        }
    }
}

/// `q(x^t) ∝ F(t) B(t)` and
/// `q(x^t, x^{t+1}) ∝ F(t, j) T(k | j) π(a^{t+1} | k) B(t+1, k)`.
pub fn smoothed_marginals(
    p: &ChainPotentials,
    fwd: &MessageTable,
    bwd: &MessageTable,
    agent: usize,
) -> Result<Marginals> {
    let nx = p.num_latents;
    let steps = p.len + 1;
    let mut single = vec![0.0; steps * nx];
    for t in 0..steps {
        let q = &mut single[t * nx..(t + 1) * nx];
        for ((v, f), b) in q.iter_mut().zip(fwd.at(t)).zip(bwd.at(t)) {
            *v = f * b;
        }
        normalize(q, agent, t)?;
    }
    let mut pair = vec![0.0; p.len * nx * nx];
    let mut msg = vec![0.0; nx];
    for t in 0..p.len {
        for ((m, &b), &e) in msg.iter_mut().zip(bwd.at(t + 1)).zip(p.emit_row(t + 1)) {
            *m = b * e;
        }
        let block = &mut pair[t * nx * nx..(t + 1) * nx * nx];
        for (j, &f) in fwd.at(t).iter().enumerate() {
            for (k, &w) in p.trans_row(t, j).iter().enumerate() {
                block[j * nx + k] = f * w * msg[k];
            }
        }
        normalize(block, agent, t)?;
    }
    Ok(Marginals {
        num_latents: nx,
        single,
        pair,
    })
}

/// Both passes plus marginals; also returns the log evidence.
pub fn infer(p: &ChainPotentials, agent: usize) -> Result<(Marginals, f64)> {
    let f = forward(p, agent)?;
    let b = backward(p, agent)?;
    let m = smoothed_marginals(p, &f, &b, agent)?;
    Ok((m, f.log_evidence()))
}

/// Forward messages of `agent` along `traj` under `chain`.
pub fn forward_messages<C: LatentChain + ?Sized>(
    chain: &C,
    actions: &JointIndex,
    agent: usize,
    traj: &Trajectory,
) -> Result<MessageTable> {
    forward(&ChainPotentials::from_chain(chain, actions, agent, traj), agent)
}

/// Backward messages of `agent` along `traj` under `chain`.
pub fn backward_messages<C: LatentChain + ?Sized>(
    chain: &C,
    actions: &JointIndex,
    agent: usize,
    traj: &Trajectory,
) -> Result<MessageTable> {
    backward(&ChainPotentials::from_chain(chain, actions, agent, traj), agent)
}

/// Smoothed marginals of `agent` along `traj`; labeled trajectories yield the
/// point masses on their labels.
pub fn agent_marginals<C: LatentChain + ?Sized>(
    chain: &C,
    actions: &JointIndex,
    agent: usize,
    traj: &Trajectory,
) -> Result<Marginals> {
    if let Some(latents) = &traj.latents {
        return Ok(Marginals::from_labels(chain.num_latents(), &latents[agent]));
    }
    let p = ChainPotentials::from_chain(chain, actions, agent, traj);
    infer(&p, agent).map(|(m, _)| m)
}
