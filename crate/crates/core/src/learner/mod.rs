//! Semi-supervised learning of per-agent behavior models.
//!
//! Every row of `b(x | s0)`, `T_x(x' | x, a, s')` and `π(a_i | s, x)` gets a
//! Dirichlet factor. Variational EM alternates between
//!
//! * an E-step that runs the decoupled forward-backward messages of each
//!   agent on every unlabeled trajectory, with the expected-log parameters
//!   `exp(ψ(α_k) − ψ(Σα))` as potentials, and
//! * an M-step that sets every concentration to prior plus expected counts.
//!
//! Labeled trajectories contribute their label counts directly. The learned
//! tables are the modes of the final Dirichlet factors.

pub mod messages;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use messages::{
    agent_marginals, backward, backward_messages, forward, forward_messages, infer, smoothed_marginals,
    ChainPotentials, Marginals, MessageTable,
};

use crate::model::{
    rng_from_seed, uniform01, AgentBehaviorModel, CategoricalTable, LabeledDataset, TaskModel, Trajectory,
};
use crate::special::{digamma, exp, ln_gamma};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// Symmetric Dirichlet concentration of every row.
    pub prior_alpha: f64,
    pub max_iters: usize,
    /// Relative ELBO change that stops the iteration.
    pub tol: f64,
    /// Seeds the random initial responsibilities used when no trajectory is
    /// labeled.
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            prior_alpha: 1.01,
            max_iters: 100,
            tol: 1e-4,
            seed: 0,
        }
    }
}

/// Dirichlet concentrations of the rows of one categorical table.
///
/// Only contexts that occur in the data are stored; all others sit at the
/// prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletRows {
    pub width: usize,
    pub num_contexts: u64,
    pub prior: f64,
    pub keys: Vec<u64>,
    pub alpha: Vec<f64>,
}

impl DirichletRows {
    fn new(width: usize, num_contexts: u64, prior: f64, mut keys: Vec<u64>) -> Self {
        keys.sort_unstable();
        keys.dedup();
        let alpha = vec![prior; keys.len() * width];
        DirichletRows {
            width,
            num_contexts,
            prior,
            keys,
            alpha,
        }
    }

    pub fn slot(&self, key: u64) -> Option<usize> {
        self.keys.binary_search(&key).ok()
    }

    pub fn row(&self, slot: usize) -> &[f64] {
        &self.alpha[slot * self.width..(slot + 1) * self.width]
    }

    fn set_from_counts(&mut self, counts: &[f64]) {
        for (a, &c) in self.alpha.iter_mut().zip(counts) {
            *a = self.prior + c;
        }
    }

    /// `ψ(α_k) − ψ(Σ α)` for every stored entry.
    fn expected_log(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.alpha.len());
        for row in self.alpha.chunks_exact(self.width) {
            let total = digamma(row.iter().sum());
            out.extend(row.iter().map(|&a| digamma(a) - total));
        }
        out
    }

    /// `KL(Dir(α) || Dir(prior))` summed over stored rows.
    pub fn kl_from_prior(&self) -> f64 {
        let k = self.width as f64;
        let prior_norm = ln_gamma(k * self.prior) - k * ln_gamma(self.prior);
        let mut kl = 0.0;
        for row in self.alpha.chunks_exact(self.width) {
            if row.iter().all(|&a| a == self.prior) {
                continue;
            }
            let total: f64 = row.iter().sum();
            let dt = digamma(total);
            let mut r = ln_gamma(total) - prior_norm;
            for &a in row {
                r += -ln_gamma(a) + (a - self.prior) * (digamma(a) - dt);
            }
            kl += r;
        }
        kl
    }

    /// Mode of each stored row; rows still at the prior are left to the
    /// (uniform) default.
    pub fn map_table(&self) -> CategoricalTable {
        let default = mode(&vec![self.prior; self.width]);
        let rows = self
            .keys
            .iter()
            .zip(self.alpha.chunks_exact(self.width))
            .filter(|(_, row)| row.iter().any(|&a| a != self.prior))
            .map(|(&k, row)| (k, mode(row)));
        CategoricalTable::from_rows(self.width, self.num_contexts, default, rows)
    }
}

/// Mode of a Dirichlet, `(α_k − 1) / (Σα − K)`. Entries below 1 are clamped
/// to zero; a row with no mass left is uniform.
pub fn mode(alpha: &[f64]) -> Vec<f64> {
    let mut m: Vec<f64> = alpha.iter().map(|&a| (a - 1.0).max(0.0)).collect();
    let total: f64 = m.iter().sum();
    if total > 0.0 {
        m.iter_mut().for_each(|v| *v /= total);
    } else {
        let u = 1.0 / alpha.len() as f64;
        m.iter_mut().for_each(|v| *v = u);
    }
    m
}

/// Variational posterior over one agent's behavior tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPosterior {
    pub num_latents: usize,
    pub num_actions: usize,
    pub num_states: usize,
    pub num_joint_actions: usize,
    pub initial: DirichletRows,
    pub transition: DirichletRows,
    pub policy: DirichletRows,
}

impl DirichletPosterior {
    pub fn kl_from_prior(&self) -> f64 {
        self.initial.kl_from_prior() + self.transition.kl_from_prior() + self.policy.kl_from_prior()
    }

    pub fn map_estimate(&self) -> AgentBehaviorModel {
        AgentBehaviorModel {
            num_latents: self.num_latents,
            num_actions: self.num_actions,
            num_states: self.num_states,
            num_joint_actions: self.num_joint_actions,
            initial: self.initial.map_table(),
            latent_transition: self.transition.map_table(),
            policy: self.policy.map_table(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub models: Vec<AgentBehaviorModel>,
    pub posteriors: Vec<DirichletPosterior>,
    /// ELBO after every E-step.
    pub elbo: Vec<f64>,
    pub converged: bool,
}

/// Row slots of one trajectory in an agent's tables.
#[derive(Debug)]
struct TrajSlots {
    traj: usize,
    init: usize,
    /// Slot of the policy row `(s^t, x = 0)`; rows for other `x` follow.
    policy: Vec<usize>,
    own: Vec<usize>,
    /// Slot of the transition row `(x = j, a^t, s^{t+1})` at `t * X + j`.
    trans: Vec<usize>,
}

/// Expected counts in the slot layout of a posterior.
#[derive(Debug, Clone)]
struct Counts {
    initial: Vec<f64>,
    transition: Vec<f64>,
    policy: Vec<f64>,
}

impl Counts {
    fn zeros(p: &DirichletPosterior) -> Self {
        Counts {
            initial: vec![0.0; p.initial.alpha.len()],
            transition: vec![0.0; p.transition.alpha.len()],
            policy: vec![0.0; p.policy.alpha.len()],
        }
    }

    fn add(&mut self, slots: &TrajSlots, nx: usize, na: usize, m: &Marginals) {
        for (c, &q) in self.initial[slots.init * nx..].iter_mut().zip(m.at(0)) {
            *c += q;
        }
        for (t, (&base, &own)) in slots.policy.iter().zip(&slots.own).enumerate() {
            for (x, &q) in m.at(t).iter().enumerate() {
                self.policy[(base + x) * na + own] += q;
            }
            let pair = m.pair_at(t);
            for j in 0..nx {
                let row = slots.trans[t * nx + j] * nx;
                for (c, &q) in self.transition[row..row + nx].iter_mut().zip(&pair[j * nx..]) {
                    *c += q;
                }
            }
        }
    }

    /// `Σ n_k (ψ(α_k) − ψ(Σα))`.
    fn dot(&self, elog: &Counts) -> f64 {
        let d = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| if *x == 0.0 { 0.0 } else { x * y })
                .sum::<f64>()
        };
        d(&self.initial, &elog.initial) + d(&self.transition, &elog.transition) + d(&self.policy, &elog.policy)
    }
}

#[derive(Debug)]
struct AgentState {
    agent: usize,
    posterior: DirichletPosterior,
    labeled: Counts,
    unlabeled: Vec<TrajSlots>,
}

impl AgentState {
    fn new(agent: usize, task: &TaskModel, nx: usize, data: &[Trajectory], prior: f64) -> Result<Self> {
        let na = task.actions.size(agent);
        let ns = task.num_states;
        let nja = task.num_joint_actions();
        let tkey = |x: usize, a: usize, s: usize| ((x * nja + a) as u64) * ns as u64 + s as u64;
        let mut init_keys = Vec::new();
        let mut trans_keys = Vec::new();
        let mut policy_keys = Vec::new();
        for tr in data {
            init_keys.push(tr.states[0] as u64);
            for t in 0..tr.len() {
                let (s, a, next) = (tr.states[t] as usize, tr.actions[t] as usize, tr.states[t + 1] as usize);
                for x in 0..nx {
                    policy_keys.push((s * nx + x) as u64);
                    trans_keys.push(tkey(x, a, next));
                }
            }
        }
        let mut posterior = DirichletPosterior {
            num_latents: nx,
            num_actions: na,
            num_states: ns,
            num_joint_actions: nja,
            initial: DirichletRows::new(nx, ns as u64, prior, init_keys),
            transition: DirichletRows::new(nx, (nx * nja * ns) as u64, prior, trans_keys),
            policy: DirichletRows::new(na, (ns * nx) as u64, prior, policy_keys),
        };
        let mut labeled = Counts::zeros(&posterior);
        let mut unlabeled = Vec::new();
        for (i, tr) in data.iter().enumerate() {
            let slot = |rows: &DirichletRows, key: u64| rows.slot(key).expect("key collected above");
            let len = tr.len();
            let mut slots = TrajSlots {
                traj: i,
                init: slot(&posterior.initial, tr.states[0] as u64),
                policy: Vec::with_capacity(len),
                own: Vec::with_capacity(len),
                trans: Vec::with_capacity(len * nx),
            };
            for t in 0..len {
                let (s, a, next) = (tr.states[t] as usize, tr.actions[t] as usize, tr.states[t + 1] as usize);
                slots.policy.push(slot(&posterior.policy, (s * nx) as u64));
                slots.own.push(task.actions.component(a, agent));
                for x in 0..nx {
                    slots.trans.push(slot(&posterior.transition, tkey(x, a, next)));
                }
            }
            match &tr.latents {
                Some(lat) => {
                    let labels = &lat[agent];
                    if labels.iter().any(|&x| x as usize >= nx) {
                        return Err(Error::IndexOutOfRange {
                            what: "latent label",
                            index: *labels.iter().max().unwrap_or(&0) as usize,
                            size: nx,
                        });
                    }
                    labeled.add(&slots, nx, na, &Marginals::from_labels(nx, labels));
                }
                None => unlabeled.push(slots),
            }
        }
        posterior_from(&mut posterior, &labeled);
        Ok(AgentState {
            agent,
            posterior,
            labeled,
            unlabeled,
        })
    }

    fn expected_log(&self) -> Counts {
        Counts {
            initial: self.posterior.initial.expected_log(),
            transition: self.posterior.transition.expected_log(),
            policy: self.posterior.policy.expected_log(),
        }
    }

    fn potentials(&self, slots: &TrajSlots, w: &Counts) -> ChainPotentials {
        let nx = self.posterior.num_latents;
        let na = self.posterior.num_actions;
        let mut p = ChainPotentials::zeroed(nx, slots.own.len());
        p.initial
            .copy_from_slice(&w.initial[slots.init * nx..(slots.init + 1) * nx]);
        for (t, (&base, &own)) in slots.policy.iter().zip(&slots.own).enumerate() {
            for x in 0..nx {
                p.emit[t * nx + x] = w.policy[(base + x) * na + own];
            }
            for j in 0..nx {
                let row = slots.trans[t * nx + j] * nx;
                let lo = (t * nx + j) * nx;
                p.trans[lo..lo + nx].copy_from_slice(&w.transition[row..row + nx]);
            }
        }
        p
    }

    /// One E-step. Returns the expected counts and the ELBO of the current
    /// posterior.
    fn e_step(&self) -> Result<(Counts, f64)> {
        let elog = self.expected_log();
        let weights = Counts {
            initial: elog.initial.iter().map(|&v| exp(v)).collect(),
            transition: elog.transition.iter().map(|&v| exp(v)).collect(),
            policy: elog.policy.iter().map(|&v| exp(v)).collect(),
        };
        let nx = self.posterior.num_latents;
        let na = self.posterior.num_actions;
        let mut counts = self.labeled.clone();
        let mut log_z = 0.0;
        for slots in &self.unlabeled {
            let p = self.potentials(slots, &weights);
            let (m, lz) = infer(&p, self.agent).map_err(|e| match e {
                Error::ZeroMass { agent, step } => Error::Inconsistent(alloc::format!(
                    "trajectory {}: agent {agent} has zero mass at step {step}",
                    slots.traj
                )),
                e => e,
            })?;
            log_z += lz;
            counts.add(slots, nx, na, &m);
        }
        let elbo = log_z + self.labeled.dot(&elog) - self.posterior.kl_from_prior();
        Ok((counts, elbo))
    }

    fn random_start(&mut self, seed: u64) {
        let nx = self.posterior.num_latents;
        let na = self.posterior.num_actions;
        let mut rng = rng_from_seed(seed ^ (self.agent as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut counts = self.labeled.clone();
        for slots in &self.unlabeled {
            let steps = slots.own.len() + 1;
            let mut single = vec![0.0; steps * nx];
            for q in single.chunks_exact_mut(nx) {
                q.iter_mut().for_each(|v| *v = 0.1 + uniform01(&mut rng));
                let z: f64 = q.iter().sum();
                q.iter_mut().for_each(|v| *v /= z);
            }
            let mut pair = vec![0.0; (steps - 1) * nx * nx];
            for t in 0..steps - 1 {
                for j in 0..nx {
                    for k in 0..nx {
                        pair[(t * nx + j) * nx + k] = single[t * nx + j] * single[(t + 1) * nx + k];
                    }
                }
            }
            counts.add(
                slots,
                nx,
                na,
                &Marginals {
                    num_latents: nx,
                    single,
                    pair,
                },
            );
        }
        posterior_from(&mut self.posterior, &counts);
    }
}

fn posterior_from(p: &mut DirichletPosterior, counts: &Counts) {
    p.initial.set_from_counts(&counts.initial);
    p.transition.set_from_counts(&counts.transition);
    p.policy.set_from_counts(&counts.policy);
}

/// Fits one behavior model per agent. `latent_sizes[i]` is `|X_i|`.
pub fn fit(
    dataset: &LabeledDataset,
    task: &TaskModel,
    latent_sizes: &[usize],
    cfg: &LearnerConfig,
) -> Result<FitResult> {
    if dataset.is_empty() {
        return Err(Error::InvalidParameter {
            name: "dataset",
            reason: "no trajectories".into(),
        });
    }
    if !(cfg.prior_alpha > 0.0) {
        return Err(Error::InvalidParameter {
            name: "prior_alpha",
            reason: alloc::format!("{} must be positive", cfg.prior_alpha),
        });
    }
    if latent_sizes.len() != task.n_agents() {
        return Err(Error::Inconsistent(alloc::format!(
            "{} latent sizes for {} agents",
            latent_sizes.len(),
            task.n_agents()
        )));
    }
    dataset.check(task, latent_sizes)?;
    let data = &dataset.trajectories;
    let mut agents = latent_sizes
        .iter()
        .enumerate()
        .map(|(i, &nx)| AgentState::new(i, task, nx, data, cfg.prior_alpha))
        .collect::<Result<Vec<_>>>()?;
    let semi = agents.iter().any(|a| !a.unlabeled.is_empty());
    if dataset.labeled_count() == 0 {
        agents.iter_mut().for_each(|a| a.random_start(cfg.seed));
    }

    let mut elbo = Vec::new();
    let mut converged = !semi;
    if !semi {
        let total = agents
            .iter()
            .map(|a| a.labeled.dot(&a.expected_log()) - a.posterior.kl_from_prior())
            .sum();
        elbo.push(total);
    }
    for _ in 0..if semi { cfg.max_iters } else { 0 } {
        let mut total = 0.0;
        for a in agents.iter_mut() {
            let (counts, e) = a.e_step()?;
            total += e;
            posterior_from(&mut a.posterior, &counts);
        }
        let prev = elbo.last().copied();
        elbo.push(total);
        if let Some(prev) = prev {
            if (total - prev).abs() <= cfg.tol * prev.abs() {
                converged = true;
                break;
            }
        }
    }
    let posteriors: Vec<DirichletPosterior> = agents.into_iter().map(|a| a.posterior).collect();
    Ok(FitResult {
        models: posteriors.iter().map(DirichletPosterior::map_estimate).collect(),
        posteriors,
        elbo,
        converged,
    })
}
