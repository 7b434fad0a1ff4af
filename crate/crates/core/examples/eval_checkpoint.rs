//! Length-extrapolation accuracy of a saved checkpoint.
//!
//! ```text
//! cargo run --release --example eval_checkpoint -- runs/checkpoint.json 41:500:9 100
//! ```

use regulargpt::automata::make_task;
use regulargpt::model::load_checkpoint;
use regulargpt::training::{evaluate, EvalConfig, LengthRange};

fn main() -> regulargpt::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: eval_checkpoint CHECKPOINT [A:B:S] [SAMPLES] [P1]");
        std::process::exit(1);
    };
    let lengths: LengthRange = args.get(1).map_or("41:500:9", String::as_str).parse()?;
    let samples = args.get(2).map_or(Ok(100), |s| s.parse()).expect("samples");
    let p1 = args.get(3).map_or(Ok(0.5), |s| s.parse()).expect("p1");
    let ck = load_checkpoint(path.as_ref())?;
    let task = make_task(&ck.meta.task)?;
    let report = evaluate(
        &ck.model,
        &task,
        &EvalConfig {
            lengths,
            samples,
            p1,
            seed: 0,
        },
    )?;
    for (len, acc) in &report.per_length {
        println!("length {len:>4}  accuracy {acc:.3}");
    }
    println!("avg_accuracy={:.4}", report.average);
    Ok(())
}
