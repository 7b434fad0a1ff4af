//! Exact attention-entry counts of the dilated model against a full causal
//! stack, and the sublayer ratio at which they break even.
//!
//! ```text
//! cargo run --release --example attention_cost
//! ```

use regulargpt::analysis::{asymptotic_cost_threshold, attention_cost, exact_cost_threshold, vanilla_cost};
use regulargpt::model::adaptive_depth;

fn main() {
    println!("{:>6} {:>5} {:>6} {:>12} {:>12} {:>9} {:>10}", "T", "C", "depth", "dilated K=1", "vanilla L=1", "exact K/L", "asymptotic");
    for (len, chunk) in [(64, 2), (512, 2), (512, 8), (512, 128), (4096, 64)] {
        let depth = adaptive_depth(len, chunk);
        println!(
            "{len:>6} {chunk:>5} {depth:>6} {:>12} {:>12} {:>9.3} {:>10.3}",
            attention_cost(chunk, 1, len, depth),
            vanilla_cost(len, 1),
            exact_cost_threshold(chunk, len),
            asymptotic_cost_threshold(chunk, len)
        );
    }
}
