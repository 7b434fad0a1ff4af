//! The sliding-dilated attention pattern: one bias matrix per depth group
//! and the positions the last token can reach through them.
//!
//! ```text
//! cargo run --release --example dilated_mask -- 8 2
//! ```

use regulargpt::analysis::{reachable_set, routing_coverage};
use regulargpt::model::{adaptive_depth, dilated_bias};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer")).collect();
    let len = args.first().copied().unwrap_or(8);
    let chunk = args.get(1).copied().unwrap_or(2);
    let r: Vec<f64> = (0..chunk).map(|i| i as f64).collect();
    let depth = adaptive_depth(len, chunk);
    println!("T = {len}, C = {chunk}, depth = {depth}, r_i = i");
    for group in 0..depth {
        println!("\ngroup {group}");
        let bias = dilated_bias(group, chunk, len, &r);
        for m in 0..len {
            let row: Vec<String> = bias[m * len..(m + 1) * len]
                .iter()
                .map(|&b| if b.is_finite() { format!("{b:>4}") } else { "   .".to_string() })
                .collect();
            println!("{}", row.join(""));
        }
    }
    let reach = reachable_set(chunk, len);
    println!(
        "\nreachable from position {}: {}/{len}",
        len - 1,
        reach.iter().filter(|&&r| r).count()
    );
    for t in [100, 500, 1024] {
        println!("T = {t:>4}: coverage {}", routing_coverage(chunk, t));
    }
}
