//! The full-attention baseline on the same task: fits the training lengths
//! but does not carry over to longer strings.
//!
//! ```text
//! cargo run --release --example vanilla_baseline -- parity 3000
//! ```

use regulargpt::automata::make_task;
use regulargpt::model::ModelConfig;
use regulargpt::training::{evaluate, train_with, EvalConfig, LengthRange, TrainConfig};

fn main() -> regulargpt::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let task_name = args.first().map_or("parity", String::as_str);
    let task = make_task(task_name)?;
    let mut cfg = TrainConfig::for_task(task_name)?;
    cfg.model = ModelConfig::vanilla(&task, 4);
    cfg.max_steps = args.get(1).map_or(Ok(3000), |s| s.parse()).expect("steps");
    let outcome = train_with(&cfg, |log| {
        println!("step {:>6}  loss {:.4}  train_acc {:.3}", log.step, log.loss, log.train_acc);
    })?;
    outcome.check()?;
    for (name, lengths) in [("in-distribution", "1:40:1"), ("extrapolation", "41:200:9")] {
        let report = evaluate(
            &outcome.model,
            &task,
            &EvalConfig {
                lengths: lengths.parse::<LengthRange>()?,
                samples: 50,
                p1: cfg.p1,
                seed: 0,
            },
        )?;
        println!("{name:<16} avg_accuracy={:.4}", report.average);
    }
    Ok(())
}
