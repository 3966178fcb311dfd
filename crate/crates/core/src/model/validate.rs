use alloc::vec::Vec;
use core::fmt;

use super::{AgentBehaviorModel, CategoricalTable, TaskModel, Transitions};

/// Tolerance on row sums of every stochastic table.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// One violated model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TransitionRowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    TransitionTarget {
        state: usize,
        action: usize,
        target: usize,
    },
    NegativeProbability {
        state: usize,
        action: usize,
    },
    NonFiniteReward {
        state: usize,
        action: usize,
    },
    TableLength {
        table: &'static str,
        expected: usize,
        found: usize,
    },
    Gamma(f64),
    ZeroHorizon,
    InitialState(usize),
    RowSum {
        table: &'static str,
        context: Option<u64>,
        sum: f64,
    },
    NegativeEntry {
        table: &'static str,
        context: Option<u64>,
    },
    ContextOutOfRange {
        table: &'static str,
        context: u64,
    },
    Dimension {
        table: &'static str,
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TransitionRowSum { state, action, sum } => {
                write!(f, "transition row (s={state}, a={action}) sums to {sum}")
            }
            Violation::TransitionTarget { state, action, target } => {
                write!(
                    f,
                    "transition row (s={state}, a={action}) targets unknown state {target}"
                )
            }
            Violation::NegativeProbability { state, action } => {
                write!(f, "transition row (s={state}, a={action}) has a negative entry")
            }
            Violation::NonFiniteReward { state, action } => {
                write!(f, "reward (s={state}, a={action}) is not finite")
            }
            Violation::TableLength { table, expected, found } => {
                write!(f, "{table} has {found} entries, expected {expected}")
            }
            Violation::Gamma(g) => write!(f, "discount {g} outside (0, 1]"),
            Violation::ZeroHorizon => write!(f, "horizon must be at least 1"),
            Violation::InitialState(s) => write!(f, "initial state {s} out of range"),
            Violation::RowSum { table, context, sum } => match context {
                Some(c) => write!(f, "{table} row {c} sums to {sum}"),
                None => write!(f, "{table} default row sums to {sum}"),
            },
            Violation::NegativeEntry { table, context } => match context {
                Some(c) => write!(f, "{table} row {c} has a negative entry"),
                None => write!(f, "{table} default row has a negative entry"),
            },
            Violation::ContextOutOfRange { table, context } => {
                write!(f, "{table} context {context} out of range")
            }
            Violation::Dimension { table, expected, found } => {
                write!(f, "{table} width {found}, expected {expected}")
            }
        }
    }
}

/// Lists every violated invariant of a task model; empty iff valid.
pub fn validate_task(task: &TaskModel) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(task.gamma > 0.0 && task.gamma <= 1.0) {
        out.push(Violation::Gamma(task.gamma));
    }
    if task.horizon == 0 {
        out.push(Violation::ZeroHorizon);
    }
    if task.initial_state >= task.num_states {
        out.push(Violation::InitialState(task.initial_state));
    }
    let rows = task.num_states * task.num_joint_actions();
    if task.rewards.len() != rows {
        out.push(Violation::TableLength {
            table: "reward",
            expected: rows,
            found: task.rewards.len(),
        });
    }
    if task.terminal.len() != task.num_states {
        out.push(Violation::TableLength {
            table: "terminal",
            expected: task.num_states,
            found: task.terminal.len(),
        });
    }
    let na = task.num_joint_actions().max(1);
    for (row, r) in task.rewards.iter().enumerate() {
        if !r.is_finite() {
            out.push(Violation::NonFiniteReward {
                state: row / na,
                action: row % na,
            });
        }
    }
    match &task.transitions {
        Transitions::Deterministic(next) => {
            if next.len() != rows {
                out.push(Violation::TableLength {
                    table: "transition",
                    expected: rows,
                    found: next.len(),
                });
            }
            for (row, &s) in next.iter().enumerate() {
                if s as usize >= task.num_states {
                    out.push(Violation::TransitionTarget {
                        state: row / na,
                        action: row % na,
                        target: s as usize,
                    });
                }
            }
        }
        Transitions::Stochastic { offsets, next, prob } => {
            if offsets.len() != rows + 1 || next.len() != prob.len() {
                out.push(Violation::TableLength {
                    table: "transition",
                    expected: rows + 1,
                    found: offsets.len(),
                });
                return out;
            }
            for row in 0..rows {
                let (state, action) = (row / na, row % na);
                let (lo, hi) = (offsets[row], offsets[row + 1]);
                let mut sum = 0.0;
                for (&s, &p) in next[lo..hi].iter().zip(&prob[lo..hi]) {
                    if s as usize >= task.num_states {
                        out.push(Violation::TransitionTarget {
                            state,
                            action,
                            target: s as usize,
                        });
                    }
                    if p < 0.0 {
                        out.push(Violation::NegativeProbability { state, action });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    out.push(Violation::TransitionRowSum { state, action, sum });
                }
            }
        }
    }
    out
}

fn check_table(
    table: &CategoricalTable,
    name: &'static str,
    width: usize,
    num_contexts: u64,
    out: &mut Vec<Violation>,
) {
    if table.width() != width {
        out.push(Violation::Dimension {
            table: name,
            expected: width,
            found: table.width(),
        });
    }
    if table.num_contexts() != num_contexts {
        out.push(Violation::TableLength {
            table: name,
            expected: num_contexts as usize,
            found: table.num_contexts() as usize,
        });
    }
    let mut check_row = |context: Option<u64>, row: &[f64]| {
        if row.iter().any(|&p| !(p >= 0.0)) {
            out.push(Violation::NegativeEntry { table: name, context });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            out.push(Violation::RowSum {
                table: name,
                context,
                sum,
            });
        }
    };
    check_row(None, table.default_row());
    for (k, row) in table.iter() {
        check_row(Some(k), row);
    }
    for &k in table.keys() {
        if k >= num_contexts {
            out.push(Violation::ContextOutOfRange {
                table: name,
                context: k,
            });
        }
    }
}

/// Lists every violated invariant of a behavior model. With `task`, also
/// checks the table shapes against the task and the agent's action count.
pub fn validate_behavior(model: &AgentBehaviorModel, task: Option<(&TaskModel, usize)>) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Some((task, agent)) = task {
        if model.num_states != task.num_states {
            out.push(Violation::Dimension {
                table: "state space",
                expected: task.num_states,
                found: model.num_states,
            });
        }
        if model.num_joint_actions != task.num_joint_actions() {
            out.push(Violation::Dimension {
                table: "joint action space",
                expected: task.num_joint_actions(),
                found: model.num_joint_actions,
            });
        }
        if agent < task.n_agents() && model.num_actions != task.actions.size(agent) {
            out.push(Violation::Dimension {
                table: "agent action set",
                expected: task.actions.size(agent),
                found: model.num_actions,
            });
        }
    }
    let (s, x, a) = (
        model.num_states as u64,
        model.num_latents as u64,
        model.num_joint_actions as u64,
    );
    check_table(&model.initial, "initial latent", model.num_latents, s, &mut out);
    check_table(
        &model.latent_transition,
        "latent transition",
        model.num_latents,
        x * a * s,
        &mut out,
    );
    check_table(&model.policy, "policy", model.num_actions, s * x, &mut out);
    out
}
