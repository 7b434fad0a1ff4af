//! Finite-difference check of the full model's gradients in 64-bit mode.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use regulargpt::automata::make_task;
use regulargpt::gradcheck::finite_difference_check;
use regulargpt::model::{AttentionRoute, Model, ModelConfig};

fn main() -> regulargpt::Result<()> {
    let task = make_task("parity")?;
    let mut config = ModelConfig::for_task(&task);
    config.d_model = 16;
    config.n_heads = 2;
    config.d_ffn = 32;
    let model = Model::<f64>::new(config.clone(), 0)?;
    let tokens = task.encode_str("1 0 1 1")?;
    let target = task.answer_token(task.oracle(&tokens)?);
    let report = finite_difference_check(
        model.params(),
        |store, tape| {
            let m = Model::from_params(config.clone(), store.clone())?;
            let trace = m.forward_tape(tape, &[&tokens], AttentionRoute::Sparse)?;
            trace.loss(tape, &[target])
        },
        1e-5,
        300,
        0,
    )?;
    println!(
        "checked {} coordinates, max relative error {:.3e} (worst {:?})",
        report.coordinates, report.max_rel_error, report.worst
    );
    Ok(())
}
