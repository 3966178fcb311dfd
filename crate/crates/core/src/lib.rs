//! Core algorithms for modelling decentralized teams and deciding when to
//! intervene in their execution.
//!
//! The crate is `no_std` (it only needs `alloc`) and carries no IO. It covers:
//!
//! * [`model`]: task and behavior model types, dense index encodings and
//!   categorical utilities.
//! * [`domains`]: the gridworld teaming benchmarks (Movers, Cleanup, Rescue,
//!   Rescue-2) and a tiny verification domain.
//! * [`synthetic`]: rule-driven ground-truth agents, rollouts under partial
//!   observability, and semi-supervised dataset generation.
//! * [`learner`]: Dirichlet-categorical mean-field variational learning of
//!   per-agent behavior models with decoupled forward-backward messages.
//! * [`filter`]: task-time Bayesian filtering of mental states, including the
//!   intervention-aware update.
//! * [`compat`]: policy evaluation over states x joint mental-state profiles,
//!   regret and benefit.
//! * [`intervention`]: rule- and value-based strategies, their confidence and
//!   expectation wrappers, episode execution and benchmark sweeps.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod compat;
pub mod domains;
pub mod error;
pub mod filter;
pub mod intervention;
pub mod learner;
pub mod mdp;
pub mod model;
pub mod special;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
