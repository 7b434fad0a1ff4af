//! Times training steps and inference at desk-scale settings.
//!
//! ```text
//! cargo run --release --example step_throughput -- 20
//! ```

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regulargpt::autodiff::Tape;
use regulargpt::automata::make_task;
use regulargpt::model::{AttentionRoute, Model};
use regulargpt::optim::{adam_step, AdamConfig, AdamState};
use regulargpt::training::{sample_batch, TrainConfig};

fn main() -> regulargpt::Result<()> {
    let steps: usize = std::env::args().nth(1).map_or(20, |s| s.parse().expect("steps"));
    let cfg = TrainConfig::for_task("parity")?;
    let task = make_task("parity")?;
    let mut model = Model::<f32>::new(cfg.model.clone(), 0)?;
    let mut state = AdamState::new(model.params());
    let adam = AdamConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut fwd, mut bwd, mut upd) = (0.0, 0.0, 0.0);
    for _ in 0..steps {
        let batch = sample_batch(&task, &cfg, &mut rng)?;
        let seqs: Vec<&[usize]> = batch.iter().map(|s| s.tokens.as_slice()).collect();
        let targets: Vec<usize> = batch.iter().map(|s| task.answer_token(s.answer)).collect();
        let t0 = Instant::now();
        let mut tape = Tape::new();
        let trace = model.forward_tape(&mut tape, &seqs, AttentionRoute::Sparse)?;
        let loss = trace.loss(&mut tape, &targets)?;
        let t1 = Instant::now();
        let grads = tape.backward(loss)?;
        drop(tape);
        let t2 = Instant::now();
        model.params_mut().zero_grad();
        grads.accumulate_into(model.params_mut(), 1.0);
        adam_step(model.params_mut(), &mut state, &adam)?;
        let t3 = Instant::now();
        fwd += (t1 - t0).as_secs_f64();
        bwd += (t2 - t1).as_secs_f64();
        upd += (t3 - t2).as_secs_f64();
    }
    let n = steps as f64;
    println!(
        "per step: forward {:.1} ms, backward {:.1} ms, update {:.1} ms",
        1e3 * fwd / n,
        1e3 * bwd / n,
        1e3 * upd / n
    );

    let seqs: Vec<Vec<usize>> = (0..20).map(|i| (0..500).map(|j| (i + j) % 2).collect()).collect();
    let refs: Vec<&[usize]> = seqs.iter().map(|s| s.as_slice()).collect();
    let t = Instant::now();
    model.predict_logits(&refs)?;
    println!("inference: {:.1} ms for 20 sequences of length 500", 1e3 * t.elapsed().as_secs_f64());
    Ok(())
}
