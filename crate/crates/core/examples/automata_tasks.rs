//! The task registry: sample strings, label them with the exact oracle and
//! check that transition matrices compose like the strings they summarize.
//!
//! ```text
//! cargo run --release --example automata_tasks
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regulargpt::automata::{build, sample, TaskKind};

fn main() -> regulargpt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for kind in TaskKind::ALL {
        let task = build(kind)?;
        let s = sample(&task, 12, &mut rng, 0.5)?;
        let a = &s.tokens[..s.len() / 2];
        let b = &s.tokens[s.len() / 2..];
        let whole = task.automaton.transition_matrix(&s.tokens)?;
        let composed = task.automaton.transition_matrix(a)?.then(&task.automaton.transition_matrix(b)?)?;
        println!(
            "{:<20} states {:>2}  {}  homomorphism {}",
            task.name(),
            task.automaton.num_states(),
            s.to_line(&task),
            if whole == composed { "ok" } else { "BROKEN" }
        );
    }

    let parity = build(TaskKind::Parity)?;
    let m = parity.automaton.transition_matrix(&parity.encode_str("1 0 1 1")?)?;
    println!("\nparity transition for `1 0 1 1`: {:?}", m.to_dense());
    Ok(())
}
