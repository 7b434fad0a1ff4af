//! Train RegularGPT on a regular-language task, then measure length
//! extrapolation.
//!
//! ```text
//! cargo run --release --example train_task -- parity 3000 3e-4 0 runs/parity.json
//! ```

use regulargpt::automata::make_task;
use regulargpt::model::{save_checkpoint, CheckpointMeta};
use regulargpt::training::{evaluate, train_with, EvalConfig, TrainConfig};

fn main() -> regulargpt::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let task_name = args.first().map_or("parity", String::as_str);
    let mut cfg = TrainConfig::for_task(task_name)?;
    if let Some(s) = args.get(1) {
        cfg.max_steps = s.parse().expect("steps");
    }
    if let Some(s) = args.get(2) {
        cfg.lr = s.parse().expect("lr");
    }
    if let Some(s) = args.get(3) {
        cfg.seed = s.parse().expect("seed");
    }
    let task = make_task(task_name)?;
    let outcome = train_with(&cfg, |log| {
        println!("step {:>6}  loss {:.4}  train_acc {:.3}", log.step, log.loss, log.train_acc);
    })?;
    outcome.check()?;
    println!("stopped after {} steps ({:?}) in {:.1}s", outcome.steps, outcome.stop, outcome.wall_clock_secs);

    if let Some(path) = args.get(4) {
        let meta = CheckpointMeta {
            task: task.name(),
            seed: cfg.seed,
            step: outcome.steps as u64,
        };
        save_checkpoint(&outcome.model, &meta, path.as_ref())?;
        println!("checkpoint written to {path}");
    }

    let eval = EvalConfig {
        lengths: cfg.eval_lengths,
        samples: cfg.eval_samples,
        p1: cfg.p1,
        seed: cfg.seed,
    };
    let report = evaluate(&outcome.model, &task, &eval)?;
    for (len, acc) in &report.per_length {
        println!("length {len:>4}  accuracy {acc:.3}");
    }
    println!("avg_accuracy={:.4} ({:.1}s)", report.average, report.wall_clock_secs);
    Ok(())
}
