use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use crate::automata::{sample, training_length, Sample, TaskSpec};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::model::{AttentionRoute, Model};
use crate::optim::{adam_step, clip_grad_norm, AdamConfig, AdamState};
use crate::tensor::Float;

use super::eval::predict_answer;

/// ChaCha stream reserved for training batches. Initialization uses the
/// seed directly and evaluation uses its own streams.
pub(crate) const TRAIN_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLog {
    pub step: usize,
    /// Mean loss over the steps since the previous log.
    pub loss: f64,
    /// Fraction of training samples since the previous log whose readout
    /// argmax matched the oracle.
    pub train_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxSteps,
    EarlyStop,
    /// Loss or gradient went non-finite at this step; the model holds the
    /// parameters of the last finite step.
    Diverged { step: usize },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub curve: Vec<TrainLog>,
    pub steps: usize,
    pub stop: StopReason,
    pub wall_clock_secs: f64,
}

impl TrainOutcome {
    /// `Err(Diverged)` if training blew up.
    pub fn check(&self) -> Result<()> {
        match self.stop {
            StopReason::Diverged { step } => Err(Error::Diverged {
                step,
                loss: self.curve.last().map_or(f64::NAN, |l| l.loss),
            }),
            _ => Ok(()),
        }
    }

    pub fn final_train_acc(&self) -> f64 {
        self.curve.last().map_or(0.0, |l| l.train_acc)
    }

    /// `step,loss,train_acc`.
    pub fn write_curve_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "step,loss,train_acc")?;
        for l in &self.curve {
            writeln!(out, "{},{},{}", l.step, l.loss, l.train_acc)?;
        }
        Ok(())
    }
}

/// One training batch of oracle-labelled strings with uniform lengths.
pub fn sample_batch(task: &TaskSpec, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Sample>> {
    (0..cfg.batch_size)
        .map(|_| {
            let len = training_length(rng, cfg.train_max_len);
            sample(task, len.max(1), rng, cfg.p1)
        })
        .collect()
}

pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(cfg, |_| {})
}

/// Trains from a fresh initialization, calling `on_log` at every log point.
pub fn train_with(cfg: &TrainConfig, on_log: impl FnMut(&TrainLog)) -> Result<TrainOutcome> {
    let mut cfg = cfg.clone();
    cfg.resolve()?;
    let model = Model::<f32>::new(cfg.model.clone(), cfg.seed)?;
    train_from(model, &cfg, on_log)
}

/// Continues training `model` under `cfg` (the model config must match).
pub fn train_from(mut model: Model<f32>, cfg: &TrainConfig, mut on_log: impl FnMut(&TrainLog)) -> Result<TrainOutcome> {
    let task = crate::automata::make_task(&cfg.task)?;
    cfg.validate()?;
    if model.config() != &cfg.model {
        return Err(Error::config("model", "checkpoint config does not match the training config"));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(TRAIN_STREAM);
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(model.params());
    let mut curve = Vec::new();
    let (mut loss_sum, mut correct, mut seen, mut window_steps) = (0.0, 0usize, 0usize, 0usize);
    let mut streak = 0;
    let mut stop = StopReason::MaxSteps;
    let mut steps = 0;

    for step in 1..=cfg.max_steps {
        let batch = sample_batch(&task, cfg, &mut rng)?;
        let seqs: Vec<&[usize]> = batch.iter().map(|s| s.tokens.as_slice()).collect();
        let targets: Vec<usize> = batch.iter().map(|s| task.answer_token(s.answer)).collect();

        let mut tape = Tape::new();
        let trace = model.forward_tape(&mut tape, &seqs, AttentionRoute::Sparse)?;
        let loss_var = trace.loss(&mut tape, &targets)?;
        let loss = tape.value(loss_var).item().f64();
        if !loss.is_finite() {
            stop = StopReason::Diverged { step };
            curve.push(TrainLog {
                step,
                loss,
                train_acc: f64::NAN,
            });
            break;
        }
        for (logits, s) in trace.logits(&tape).iter().zip(&batch) {
            correct += usize::from(predict_answer(&task, logits) == s.answer);
        }
        seen += batch.len();
        loss_sum += loss;
        window_steps += 1;

        let grads = tape.backward(loss_var)?;
        drop(tape);
        model.params_mut().zero_grad();
        grads.accumulate_into(model.params_mut(), 1.0);
        if cfg.grad_clip > 0.0 {
            clip_grad_norm(model.params_mut(), cfg.grad_clip);
        }
        if let Err(Error::NonFinite(_)) = adam_step(model.params_mut(), &mut state, &adam) {
            stop = StopReason::Diverged { step };
            curve.push(TrainLog {
                step,
                loss: f64::NAN,
                train_acc: f64::NAN,
            });
            break;
        }
        steps = step;

        if step % cfg.log_every == 0 {
            let log = TrainLog {
                step,
                loss: loss_sum / window_steps as f64,
                train_acc: correct as f64 / seen as f64,
            };
            on_log(&log);
            curve.push(log);
            (loss_sum, correct, seen, window_steps) = (0.0, 0, 0, 0);
            streak = if log.train_acc >= cfg.early_stop { streak + 1 } else { 0 };
            if streak >= cfg.patience {
                stop = StopReason::EarlyStop;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model,
        curve,
        steps,
        stop,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}
