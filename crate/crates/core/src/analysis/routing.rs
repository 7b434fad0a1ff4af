//! Reachability through the dilated pattern and attention-cost accounting.

use crate::model::{adaptive_depth, mask::dilation};

/// Positions that position `len - 1` can draw information from after all
/// `ceil(log_C len)` groups: walking from the top group down, each group
/// extends every reached position `m` to `m - j·C^l`, `j in 0..C`.
pub fn reachable_set(chunk: usize, len: usize) -> Vec<bool> {
    assert!(chunk >= 2, "chunk size must be at least 2");
    let mut reached = vec![false; len];
    if len == 0 {
        return reached;
    }
    reached[len - 1] = true;
    for group in (0..adaptive_depth(len, chunk)).rev() {
        let step = dilation(chunk, group);
        let mut next = reached.clone();
        for m in (0..len).filter(|&m| reached[m]) {
            for j in 1..chunk {
                match j.checked_mul(step) {
                    Some(gap) if gap <= m => next[m - gap] = true,
                    _ => break,
                }
            }
        }
        reached = next;
    }
    reached
}

/// Number of positions reachable from `len - 1`.
pub fn routing_coverage(chunk: usize, len: usize) -> usize {
    reachable_set(chunk, len).into_iter().filter(|&r| r).count()
}

/// Finite attention entries of the dilated model over all groups and
/// sublayers: `K · Σ_l Σ_m min(C, ⌊m / C^l⌋ + 1)`.
pub fn attention_cost(chunk: usize, thickness: usize, len: usize, depth: usize) -> u64 {
    let mut per_sublayer = 0u64;
    for group in 0..depth {
        let step = dilation(chunk, group);
        per_sublayer += (0..len).map(|m| chunk.min(m / step + 1) as u64).sum::<u64>();
    }
    per_sublayer * thickness as u64
}

/// Finite entries of an `layers`-deep causal Transformer: `L · T(T+1)/2`.
pub fn vanilla_cost(len: usize, layers: usize) -> u64 {
    layers as u64 * (len as u64 * (len as u64 + 1) / 2)
}

/// Ratio `K* / L` below which the dilated model is cheaper, from exact
/// counts at the adaptive depth for `len`.
pub fn exact_cost_threshold(chunk: usize, len: usize) -> f64 {
    let depth = adaptive_depth(len, chunk);
    vanilla_cost(len, 1) as f64 / attention_cost(chunk, 1, len, depth) as f64
}

/// The same ratio from the asymptotic forms `T·C·K·log_C T` and `T²·L`.
pub fn asymptotic_cost_threshold(chunk: usize, len: usize) -> f64 {
    let t = len as f64;
    let log_c_t = t.ln() / (chunk as f64).ln();
    t * t / (t * chunk as f64 * log_c_t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_examples() {
        assert_eq!(routing_coverage(2, 8), 8);
        assert_eq!(routing_coverage(2, 500), 500);
        assert_eq!(routing_coverage(5, 1), 1);
    }

    #[test]
    fn cost_examples() {
        assert_eq!(attention_cost(8, 1, 8, 1), 36);
        assert!(attention_cost(2, 1, 8, 3) <= 48);
        assert_eq!(vanilla_cost(4, 3), 30);
        assert!((asymptotic_cost_threshold(128, 512) - 3.11).abs() < 0.01);
    }
}
