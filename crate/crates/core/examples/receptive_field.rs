//! How far back the readout of a trained model looks: cumulative gradient
//! norm with respect to each input embedding.
//!
//! ```text
//! cargo run --release --example receptive_field -- runs/checkpoint.json 500
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regulargpt::analysis::receptive_field;
use regulargpt::automata::{make_task, sample};
use regulargpt::model::load_checkpoint;

fn main() -> regulargpt::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: receptive_field CHECKPOINT [T]");
        std::process::exit(1);
    };
    let len = args.get(1).map_or(Ok(500), |s| s.parse()).expect("length");
    let ck = load_checkpoint(path.as_ref())?;
    let task = make_task(&ck.meta.task)?;
    let s = sample(&task, len, &mut ChaCha8Rng::seed_from_u64(0), 0.5)?;
    let profile = receptive_field(&ck.model, &s.tokens, task.answer_token(s.answer))?;
    for j in (0..s.len()).step_by((s.len() / 10).max(1)) {
        println!("position {j:>4}  grad_norm {:.3e}  cumulative {:.3}", profile.grad_norms[j], profile.cumulative[j]);
    }
    println!("earliest position share {:.4}", profile.earliest_share());
    Ok(())
}
