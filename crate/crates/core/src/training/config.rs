use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::automata::{make_task, TaskSpec};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// Inclusive `start..=end` range walked in `step` increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthRange {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl LengthRange {
    pub fn new(start: usize, end: usize, step: usize) -> Result<Self> {
        let r = LengthRange { start, end, step };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(Error::config("lengths", "step must be positive"));
        }
        if self.start == 0 || self.start > self.end {
            return Err(Error::config("lengths", format!("{self} is empty")));
        }
        Ok(())
    }

    pub fn lengths(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step.max(1)).collect()
    }
}

impl fmt::Display for LengthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.step)
    }
}

impl FromStr for LengthRange {
    type Err = Error;

    /// `A:B` or `A:B:STEP`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::config("lengths", format!("`{s}` is not A:B[:STEP]")))
        };
        match parts.as_slice() {
            [a, b] => LengthRange::new(num(a)?, num(b)?, 1),
            [a, b, c] => LengthRange::new(num(a)?, num(b)?, num(c)?),
            _ => Err(Error::config("lengths", format!("`{s}` is not A:B[:STEP]"))),
        }
    }
}

/// Everything that determines a training run. Field names double as the
/// JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub task: String,
    /// `vocab_size` and `pad_token` are always derived from the task.
    pub model: ModelConfig,
    pub lr: f64,
    /// Global gradient-norm clip applied before each Adam step; 0 disables it.
    pub grad_clip: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Longest training string; lengths are uniform in `1..=train_max_len`.
    #[serde(alias = "T_tr")]
    pub train_max_len: usize,
    /// Probability of a 1 in PARITY strings.
    pub p1: f64,
    /// Stop once the logged train accuracy stays at or above this for
    /// `patience` consecutive logs. Values above 1 disable early stopping.
    pub early_stop: f64,
    pub patience: usize,
    pub log_every: usize,
    pub eval_lengths: LengthRange,
    pub eval_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: "parity".into(),
            model: ModelConfig::default(),
            lr: 3e-4,
            grad_clip: 1.0,
            batch_size: 64,
            max_steps: 20_000,
            seed: 0,
            train_max_len: 40,
            p1: 0.5,
            early_stop: 1.0,
            patience: 10,
            log_every: 100,
            eval_lengths: LengthRange {
                start: 41,
                end: 500,
                step: 9,
            },
            eval_samples: 100,
        }
    }
}

impl TrainConfig {
    pub fn for_task(task: &str) -> Result<Self> {
        let mut cfg = TrainConfig {
            task: task.to_string(),
            ..Self::default()
        };
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Fills task-derived model fields and validates the result.
    pub fn resolve(&mut self) -> Result<TaskSpec> {
        let task = make_task(&self.task)?;
        self.model.fit_task(&task);
        self.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("lr", format!("{} is not a positive learning rate", self.lr)));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return Err(Error::config("grad_clip", format!("{} is not a non-negative norm", self.grad_clip)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.train_max_len == 0 {
            return Err(Error::config("train_max_len", "T_tr must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.p1) {
            return Err(Error::config("p1", format!("{} is not a probability", self.p1)));
        }
        if self.log_every == 0 {
            return Err(Error::config("log_every", "must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience", "must be positive"));
        }
        if self.eval_samples == 0 {
            return Err(Error::config("eval_samples", "must be positive"));
        }
        self.eval_lengths.validate()?;
        let longest = self.train_max_len.max(self.eval_lengths.end);
        if longest > self.model.max_len() {
            return Err(Error::config(
                "max_groups",
                format!("length {longest} needs more than {} depth groups", self.model.max_groups),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let r: LengthRange = "41:500:9".parse().unwrap();
        let l = r.lengths();
        assert_eq!((l.len(), l[0], *l.last().unwrap()), (52, 41, 500));
        assert!("50:40:1".parse::<LengthRange>().is_err());
        assert!("1:2:0".parse::<LengthRange>().is_err());
        assert_eq!("3:5".parse::<LengthRange>().unwrap().lengths(), vec![3, 4, 5]);
    }

    #[test]
    fn json_is_partial() {
        let mut cfg: TrainConfig = serde_json::from_str(r#"{"task":"cycle_navigation","model":{"C":3},"T_tr":50}"#).unwrap();
        let task = cfg.resolve().unwrap();
        assert_eq!(cfg.model.chunk_size, 3);
        assert_eq!(cfg.model.vocab_size, task.vocab_size());
        assert_eq!(cfg.train_max_len, 50);
        assert_eq!(cfg.batch_size, 64);
    }

    #[test]
    fn bad_fields_are_named() {
        let mut cfg = TrainConfig::for_task("parity").unwrap();
        cfg.model.chunk_size = 1;
        assert!(matches!(cfg.validate(), Err(Error::Config { field: "chunk_size", .. })));
        let mut cfg = TrainConfig::for_task("parity").unwrap();
        cfg.model.max_groups = 4;
        assert!(matches!(cfg.validate(), Err(Error::Config { field: "max_groups", .. })));
        assert!(matches!(TrainConfig::for_task("nope"), Err(Error::UnknownTask(_))));
    }
}
