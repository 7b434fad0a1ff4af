//! Save a model, load it back and confirm the logits are bit-identical.
//!
//! ```text
//! cargo run --release --example checkpoint_roundtrip
//! ```

use regulargpt::automata::make_task;
use regulargpt::model::{load_checkpoint, save_checkpoint, CheckpointMeta, Model, ModelConfig};

fn main() -> regulargpt::Result<()> {
    let task = make_task("cycle_navigation")?;
    let model = Model::<f32>::new(ModelConfig::for_task(&task), 7)?;
    let dir = std::env::temp_dir().join("regulargpt-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.json");
    let meta = CheckpointMeta {
        task: task.name(),
        seed: 7,
        step: 0,
    };
    save_checkpoint(&model, &meta, &path)?;
    let loaded = load_checkpoint(&path)?;
    let probe = task.encode_str("+1 -1 STAY +1 +1")?;
    let before = model.logits(&probe)?;
    let after = loaded.model.logits(&probe)?;
    println!("manifest: {}", path.display());
    println!("logits before: {before:?}");
    println!("logits after:  {after:?}");
    println!("bit-identical: {}", before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits()));
    Ok(())
}
