use serde::{Deserialize, Serialize};

use crate::automata::TaskSpec;
use crate::error::{Error, Result};

/// Which layer schedule a model runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arch {
    /// One shared block of `thickness` sublayers applied over
    /// `ceil(log_C T)` depth groups with sliding-dilated attention.
    #[default]
    Regular,
    /// Fixed-depth causal Transformer with full attention and a
    /// distance-bucketed relative bias.
    Vanilla { layers: usize, distance_buckets: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub arch: Arch,
    /// C.
    #[serde(alias = "C")]
    pub chunk_size: usize,
    /// K.
    #[serde(alias = "K")]
    pub thickness: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ffn: usize,
    pub vocab_size: usize,
    pub max_groups: usize,
    pub pad_token: usize,
    /// Prepend a start token (the last vocabulary entry) to every input.
    /// Without it a position at the start of the sequence that attends
    /// only to itself is indistinguishable from a pair of identical
    /// positions.
    pub bos: bool,
}

impl Default for ModelConfig {
    /// Desk-scale shape with an empty vocabulary; fill `vocab_size` and
    /// `pad_token` from a task before use.
    fn default() -> Self {
        ModelConfig {
            arch: Arch::Regular,
            chunk_size: 2,
            thickness: 1,
            d_model: 64,
            n_heads: 4,
            d_ffn: 256,
            vocab_size: 0,
            max_groups: 16,
            pad_token: 0,
            bos: false,
        }
    }
}

impl ModelConfig {
    /// Desk-scale defaults sized for `task`.
    pub fn for_task(task: &TaskSpec) -> Self {
        let mut c = Self::default();
        c.fit_task(task);
        c
    }

    /// Sets `vocab_size` and `pad_token` for `task`, keeping a slot for
    /// the start token when `bos` is on.
    pub fn fit_task(&mut self, task: &TaskSpec) {
        self.vocab_size = task.vocab_size() + usize::from(self.bos);
        self.pad_token = task.pad_token();
    }

    /// Whether the vocabulary matches `task`.
    pub fn fits(&self, task: &TaskSpec) -> bool {
        self.vocab_size == task.vocab_size() + usize::from(self.bos) && self.pad_token == task.pad_token()
    }

    pub fn bos_token(&self) -> Option<usize> {
        self.bos.then(|| self.vocab_size - 1)
    }

    /// Model positions used by an input of `len` tokens.
    pub fn input_len(&self, len: usize) -> usize {
        len + usize::from(self.bos)
    }

    pub fn vanilla(task: &TaskSpec, layers: usize) -> Self {
        ModelConfig {
            arch: Arch::Vanilla {
                layers,
                distance_buckets: 13,
            },
            ..Self::for_task(task)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chunk_size < 2 {
            return Err(Error::config("chunk_size", format!("C = {} but must be >= 2", self.chunk_size)));
        }
        if self.thickness < 1 {
            return Err(Error::config("thickness", "K must be >= 1"));
        }
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::config(
                "n_heads",
                format!("d_model = {} is not divisible by {} heads", self.d_model, self.n_heads),
            ));
        }
        if self.d_ffn == 0 {
            return Err(Error::config("d_ffn", "must be positive"));
        }
        if self.pad_token >= self.vocab_size {
            return Err(Error::config("pad_token", "must be inside the vocabulary"));
        }
        if self.bos_token().is_some_and(|b| b == self.pad_token || b == 0) {
            return Err(Error::config("bos", "the start token needs its own vocabulary slot"));
        }
        if self.max_groups == 0 {
            return Err(Error::config("max_groups", "must be positive"));
        }
        if let Arch::Vanilla {
            layers,
            distance_buckets,
        } = self.arch
        {
            if layers == 0 {
                return Err(Error::config("layers", "must be positive"));
            }
            if distance_buckets == 0 {
                return Err(Error::config("distance_buckets", "must be positive"));
            }
        }
        Ok(())
    }

    /// Longest input the depth cap allows.
    pub fn max_len(&self) -> usize {
        match self.arch {
            Arch::Regular => self
                .chunk_size
                .checked_pow(self.max_groups as u32)
                .map_or(usize::MAX, |n| n - usize::from(self.bos)),
            Arch::Vanilla { .. } => usize::MAX,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::make_task;

    #[test]
    fn validation() {
        let t = make_task("parity").unwrap();
        let mut c = ModelConfig::for_task(&t);
        assert!(c.validate().is_ok());
        c.chunk_size = 1;
        assert!(matches!(c.validate(), Err(Error::Config { field: "chunk_size", .. })));
        let mut c = ModelConfig::for_task(&t);
        c.n_heads = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_aliases() {
        let json = r#"{"C":3,"K":2,"d_model":8,"n_heads":2,"d_ffn":16,"vocab_size":5,"max_groups":4,"pad_token":4}"#;
        let c: ModelConfig = serde_json::from_str(json).unwrap();
        assert_eq!((c.chunk_size, c.thickness, c.arch), (3, 2, Arch::Regular));
        assert_eq!(c.max_len(), 81);
    }
}
