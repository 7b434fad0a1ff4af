//! Sliding-dilated attention pattern, adaptive depth and padding.
//!
//! At depth group `l` query `m` sees key `n` iff `m >= n` and
//! `(m - n) / C^l` is an integer in `0..C`; the entry carries the learnable
//! scalar `r[(m - n) / C^l]`. Everything else is `-inf`.

use crate::autodiff::AttnPattern;
use crate::error::{Error, Result};

/// Number of depth groups needed to cover a length-`len` input:
/// `ceil(log_C len)`, and 1 for `len == 1`.
pub fn adaptive_depth(len: usize, chunk: usize) -> usize {
    assert!(chunk >= 2, "chunk size must be at least 2");
    let mut depth = 1;
    let mut reach = chunk;
    while reach < len {
        reach = reach.saturating_mul(chunk);
        depth += 1;
    }
    depth
}

/// `adaptive_depth` with the model's safety cap.
pub fn checked_depth(len: usize, chunk: usize, max_groups: usize) -> Result<usize> {
    let depth = adaptive_depth(len, chunk);
    if depth > max_groups {
        return Err(Error::DepthExceeded {
            len,
            needed: depth,
            max: max_groups,
        });
    }
    Ok(depth)
}

/// `C^l`, saturating.
pub fn dilation(chunk: usize, group: usize) -> usize {
    chunk.checked_pow(group as u32).unwrap_or(usize::MAX)
}

/// Slot index `(m - n) / C^l` when `(m, n)` is visible at group `l`.
pub fn dilated_slot(m: usize, n: usize, chunk: usize, group: usize) -> Option<usize> {
    if n > m {
        return None;
    }
    let gap = m - n;
    let step = dilation(chunk, group);
    (gap % step == 0 && gap / step < chunk).then_some(gap / step)
}

/// The `len × len` additive bias of one head at group `l`, row-major.
pub fn dilated_bias(group: usize, chunk: usize, len: usize, r: &[f64]) -> Vec<f64> {
    assert_eq!(r.len(), chunk, "one scalar per offset");
    let mut bias = vec![f64::NEG_INFINITY; len * len];
    for m in 0..len {
        for n in 0..=m {
            if let Some(j) = dilated_slot(m, n, chunk, group) {
                bias[m * len + n] = r[j];
            }
        }
    }
    bias
}

/// Sparse form of the group-`l` pattern over one sequence of length `len`.
/// Keys are listed nearest first.
pub fn dilated_pattern(group: usize, chunk: usize, len: usize) -> AttnPattern {
    let step = dilation(chunk, group);
    let mut b = AttnPattern::builder(len);
    for m in 0..len {
        for j in 0..chunk {
            match j.checked_mul(step) {
                Some(gap) if gap <= m => b.push(m - gap, j),
                _ => break,
            }
        }
        b.end_row();
    }
    b.build()
}

/// Full causal pattern with distance-bucketed bias slots.
pub fn causal_pattern(len: usize, buckets: usize) -> AttnPattern {
    let mut b = AttnPattern::builder(len);
    for m in 0..len {
        for n in (0..=m).rev() {
            b.push(n, distance_bucket(m - n, buckets));
        }
        b.end_row();
    }
    b.build()
}

/// Exact buckets for distances below 8, then one bucket per power of two,
/// the last bucket absorbing everything farther.
pub fn distance_bucket(distance: usize, buckets: usize) -> usize {
    let exact = 8.min(buckets);
    let b = if distance < exact {
        distance
    } else {
        exact + (distance.ilog2() as usize).saturating_sub(exact.max(1).ilog2() as usize)
    };
    b.min(buckets - 1)
}

/// Right-pads to a multiple of `chunk`. Returns the padded tokens and the
/// index of the last real token.
pub fn pad_input(tokens: &[usize], chunk: usize, pad: usize) -> Result<(Vec<usize>, usize)> {
    if tokens.is_empty() {
        return Err(Error::invalid("pad_input", "empty input"));
    }
    let padded_len = tokens.len().div_ceil(chunk) * chunk;
    let mut out = tokens.to_vec();
    out.resize(padded_len, pad);
    Ok((out, tokens.len() - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_examples() {
        assert_eq!(adaptive_depth(512, 32), 2);
        assert_eq!(adaptive_depth(4096, 64), 2);
        assert_eq!(adaptive_depth(4097, 64), 3);
        assert_eq!(adaptive_depth(8, 2), 3);
        assert_eq!(adaptive_depth(1, 2), 1);
        assert_eq!(adaptive_depth(2, 2), 1);
        assert!(checked_depth(500, 2, 8).is_err());
        assert_eq!(checked_depth(500, 2, 9).unwrap(), 9);
    }

    #[test]
    fn bias_rows() {
        let r = [10.0, 20.0];
        let b0 = dilated_bias(0, 2, 4, &r);
        assert_eq!(&b0[12..16], &[f64::NEG_INFINITY, f64::NEG_INFINITY, 20.0, 10.0]);
        let b1 = dilated_bias(1, 2, 4, &r);
        assert_eq!(&b1[12..16], &[f64::NEG_INFINITY, 20.0, f64::NEG_INFINITY, 10.0]);
        assert_eq!(&b0[0..4], &[10.0, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY]);
    }

    #[test]
    fn pattern_matches_bias() {
        for chunk in 2..5 {
            for group in 0..3 {
                let len = 20;
                let p = dilated_pattern(group, chunk, len);
                let r: Vec<f64> = (0..chunk).map(|j| j as f64).collect();
                let dense = dilated_bias(group, chunk, len, &r);
                for m in 0..len {
                    let mut from_pattern = vec![f64::NEG_INFINITY; len];
                    for (n, j) in p.row(m) {
                        from_pattern[n] = r[j];
                    }
                    assert_eq!(from_pattern, dense[m * len..(m + 1) * len]);
                }
            }
        }
    }

    #[test]
    fn padding() {
        assert_eq!(pad_input(&[1, 1, 1, 1, 1], 2, 9).unwrap(), (vec![1, 1, 1, 1, 1, 9], 4));
        assert_eq!(pad_input(&[1, 1, 1, 1], 2, 9).unwrap(), (vec![1, 1, 1, 1], 3));
        assert!(pad_input(&[], 2, 9).is_err());
    }

    #[test]
    fn buckets_are_monotone() {
        let b: Vec<usize> = (0..300).map(|d| distance_bucket(d, 13)).collect();
        assert!(b.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(b[7], 7);
        assert_eq!(b[8], 8);
        assert_eq!(b[16], 9);
        assert_eq!(b[299], 12);
    }
}
