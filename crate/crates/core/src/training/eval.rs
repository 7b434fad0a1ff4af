use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::LengthRange;
use crate::automata::{effective_length, sample, TaskSpec};
use crate::error::{Error, Result};
use crate::model::{argmax, Model};
use crate::tensor::Float;

/// ChaCha stream reserved for evaluation samples.
pub(crate) const EVAL_STREAM: u64 = 2;

/// Upper bound on packed tokens per inference call.
const TOKENS_PER_CALL: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub lengths: LengthRange,
    pub samples: usize,
    pub p1: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            lengths: LengthRange {
                start: 41,
                end: 500,
                step: 9,
            },
            samples: 100,
            p1: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub p1: f64,
    /// `(length, accuracy)` in increasing length.
    pub per_length: Vec<(usize, f64)>,
    /// Mean of the per-length accuracies.
    pub average: f64,
    pub wall_clock_secs: f64,
}

impl EvalReport {
    /// `length,accuracy`.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "length,accuracy")?;
        for (len, acc) in &self.per_length {
            writeln!(out, "{len},{acc}")?;
        }
        Ok(())
    }
}

/// Rng for one evaluation length; independent of the training stream and
/// of every other length.
fn length_rng(seed: u64, len: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (len as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(EVAL_STREAM);
    rng
}

/// Scores any batch classifier returning answer indices.
pub fn evaluate_with(
    task: &TaskSpec,
    cfg: &EvalConfig,
    mut classify: impl FnMut(&[&[usize]]) -> Result<Vec<usize>>,
) -> Result<EvalReport> {
    cfg.lengths.validate()?;
    if cfg.samples == 0 {
        return Err(Error::config("samples", "must be positive"));
    }
    let started = Instant::now();
    let mut per_length = Vec::new();
    for len in cfg.lengths.lengths() {
        let mut rng = length_rng(cfg.seed, len);
        let samples = (0..cfg.samples)
            .map(|_| sample(task, len, &mut rng, cfg.p1))
            .collect::<Result<Vec<_>>>()?;
        let chunk = (TOKENS_PER_CALL / effective_length(task, len).max(1)).max(1);
        let mut correct = 0;
        for part in samples.chunks(chunk) {
            let seqs: Vec<&[usize]> = part.iter().map(|s| s.tokens.as_slice()).collect();
            let predicted = classify(&seqs)?;
            correct += part.iter().zip(&predicted).filter(|(s, &p)| s.answer == p).count();
        }
        per_length.push((len, correct as f64 / cfg.samples as f64));
    }
    let average = per_length.iter().map(|(_, a)| a).sum::<f64>() / per_length.len() as f64;
    Ok(EvalReport {
        task: task.name(),
        p1: cfg.p1,
        per_length,
        average,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Accuracy of `model` at each length: the readout argmax, restricted to
/// answer tokens, against the oracle.
pub fn evaluate<F: Float>(model: &Model<F>, task: &TaskSpec, cfg: &EvalConfig) -> Result<EvalReport> {
    if !model.config().fits(task) {
        return Err(Error::config(
            "task",
            format!("model vocabulary has {} tokens and does not fit {}", model.config().vocab_size, task.name()),
        ));
    }
    let longest = effective_length(task, cfg.lengths.end);
    model.depth_for(longest)?;
    evaluate_with(task, cfg, |seqs| {
        let logits = model.predict_logits(seqs)?;
        Ok(logits.iter().map(|l| predict_answer(task, l)).collect())
    })
}

/// Highest-scoring answer symbol.
pub fn predict_answer<F: Float>(task: &TaskSpec, logits: &[F]) -> usize {
    let answers: Vec<F> = (0..task.num_answers()).map(|a| logits[task.answer_token(a)]).collect();
    argmax(&answers)
}

/// Max and mean of pooled averages (seeds × learning rates).
pub fn pool_summary(averages: &[f64]) -> (f64, f64) {
    let max = averages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = averages.iter().sum::<f64>() / averages.len().max(1) as f64;
    (max, mean)
}
