//! Seeded training loop and length-extrapolation evaluation.

mod config;
mod eval;
mod pool;
mod train;

pub use config::{LengthRange, TrainConfig};
pub use eval::{evaluate, evaluate_with, pool_summary, predict_answer, EvalConfig, EvalReport};
pub use pool::{checkpoint_name, run_pool, PoolEvent, PoolMember, PoolReport};
pub use train::{sample_batch, train, train_from, train_with, StopReason, TrainLog, TrainOutcome};
