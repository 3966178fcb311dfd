//! Task and behavior model types shared by every other module.
//!
//! Everything here is plain data: tables are built once and then only read,
//! so they can be shared freely between threads.

mod behavior;
mod joint;
mod sampling;
mod task;
mod trajectory;
mod validate;

pub use behavior::{AgentBehaviorModel, CategoricalTable, LatentChain, TableBuilder};
pub use joint::JointIndex;
pub use sampling::{rng_from_seed, sample_categorical, uniform01, SimRng};
pub use task::{RewardTable, Successors, TaskModel, Transitions};
pub use trajectory::{LabeledDataset, Trajectory};
pub use validate::{validate_behavior, validate_task, Violation, ROW_SUM_TOLERANCE};
