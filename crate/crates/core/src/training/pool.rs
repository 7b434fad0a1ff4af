//! Train a grid of learning rates and seeds and keep the best member.
//! Checkpoints are cached on disk so an interrupted pool resumes where it
//! stopped.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::eval::{evaluate, EvalConfig};
use super::train::{train_with, TrainLog};
use crate::automata::make_task;
use crate::error::Result;
use crate::model::{load_checkpoint, save_checkpoint, CheckpointMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolMember {
    pub lr: f64,
    pub seed: u64,
    pub steps: u64,
    pub checkpoint: PathBuf,
    pub average: f64,
    pub per_length: Vec<(usize, f64)>,
    pub train_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolReport {
    pub task: String,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub members: Vec<PoolMember>,
}

impl PoolReport {
    pub fn best(&self) -> Option<&PoolMember> {
        self.members.iter().max_by(|a, b| a.average.total_cmp(&b.average))
    }

    /// Max-over-pool average accuracy.
    pub fn max_average(&self) -> f64 {
        self.best().map_or(0.0, |m| m.average)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Events reported while a pool runs.
#[derive(Debug, Clone, Copy)]
pub enum PoolEvent<'a> {
    Start { lr: f64, seed: u64, cached: bool },
    Log(&'a TrainLog),
    Done(&'a PoolMember),
}

pub fn checkpoint_name(lr: f64, seed: u64) -> String {
    format!("lr{lr:e}_seed{seed}.json")
}

/// Trains `base` for every `(lr, seed)` in order, evaluating each member.
/// Stops early once a member's average reaches `target`. Existing
/// checkpoints in `dir` are evaluated instead of retrained. The report is
/// written to `dir/pool.json`.
pub fn run_pool(
    base: &TrainConfig,
    lrs: &[f64],
    seeds: &[u64],
    eval: &EvalConfig,
    target: Option<f64>,
    dir: &Path,
    mut on_event: impl FnMut(PoolEvent<'_>),
) -> Result<PoolReport> {
    let task = make_task(&base.task)?;
    fs::create_dir_all(dir)?;
    let mut report = PoolReport {
        task: task.name(),
        train: base.clone(),
        eval: eval.clone(),
        members: Vec::new(),
    };
    'grid: for &lr in lrs {
        for &seed in seeds {
            let path = dir.join(checkpoint_name(lr, seed));
            let cached = path.exists();
            on_event(PoolEvent::Start { lr, seed, cached });
            let (model, steps, train_secs) = if cached {
                let ck = load_checkpoint(&path)?;
                (ck.model, ck.meta.step, None)
            } else {
                let cfg = TrainConfig {
                    lr,
                    seed,
                    ..base.clone()
                };
                let outcome = train_with(&cfg, |log| on_event(PoolEvent::Log(log)))?;
                let meta = CheckpointMeta {
                    task: task.name(),
                    seed,
                    step: outcome.steps as u64,
                };
                save_checkpoint(&outcome.model, &meta, &path)?;
                (outcome.model, outcome.steps as u64, Some(outcome.wall_clock_secs))
            };
            let result = evaluate(&model, &task, eval)?;
            let member = PoolMember {
                lr,
                seed,
                steps,
                checkpoint: path,
                average: result.average,
                per_length: result.per_length,
                train_secs,
            };
            on_event(PoolEvent::Done(&member));
            let reached = target.is_some_and(|t| member.average >= t);
            report.members.push(member);
            fs::write(dir.join("pool.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            if reached {
                break 'grid;
            }
        }
    }
    Ok(report)
}
