//! Sparse multi-head attention over an explicit (query, key, bias-slot)
//! pattern.
//!
//! Computes exactly what the dense route computes,
//! `softmax(Q Kᵀ / sqrt(d_h) + B) V` with `B` holding `-inf` off-pattern,
//! but only touches the entries of the pattern. Each entry names the key row
//! it reads and the learnable bias slot `r[h, slot]` added to its score.

use crate::error::{Error, Result};
use crate::tensor::Float;

/// CSR layout: the entries of query row `q` live in
/// `offsets[q]..offsets[q + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttnPattern {
    offsets: Vec<usize>,
    keys: Vec<usize>,
    slots: Vec<usize>,
}

impl AttnPattern {
    pub fn builder(num_queries: usize) -> AttnPatternBuilder {
        AttnPatternBuilder {
            pattern: AttnPattern {
                offsets: Vec::with_capacity(num_queries + 1),
                keys: Vec::new(),
                slots: Vec::new(),
            },
        }
    }

    pub fn num_queries(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_entries(&self) -> usize {
        self.keys.len()
    }

    /// `(key, slot)` pairs visible from query row `q`.
    pub fn row(&self, q: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let range = self.offsets[q]..self.offsets[q + 1];
        self.keys[range.clone()]
            .iter()
            .copied()
            .zip(self.slots[range].iter().copied())
    }

    pub fn max_key(&self) -> Option<usize> {
        self.keys.iter().copied().max()
    }

    pub fn max_slot(&self) -> Option<usize> {
        self.slots.iter().copied().max()
    }

    /// Concatenates patterns of independent sequences whose rows are stacked
    /// one after another.
    pub fn stack(parts: &[&AttnPattern]) -> AttnPattern {
        let total: usize = parts.iter().map(|p| p.num_queries()).sum();
        let mut b = AttnPattern::builder(total);
        let mut base = 0;
        for p in parts {
            for q in 0..p.num_queries() {
                for (k, s) in p.row(q) {
                    b.push(base + k, s);
                }
                b.end_row();
            }
            base += p.num_queries();
        }
        b.build()
    }
}

pub struct AttnPatternBuilder {
    pattern: AttnPattern,
}

impl AttnPatternBuilder {
    pub fn push(&mut self, key: usize, slot: usize) {
        if self.pattern.offsets.is_empty() {
            self.pattern.offsets.push(0);
        }
        self.pattern.keys.push(key);
        self.pattern.slots.push(slot);
    }

    pub fn end_row(&mut self) {
        if self.pattern.offsets.is_empty() {
            self.pattern.offsets.push(0);
        }
        self.pattern.offsets.push(self.pattern.keys.len());
    }

    pub fn build(mut self) -> AttnPattern {
        if self.pattern.offsets.is_empty() {
            self.pattern.offsets.push(0);
        }
        self.pattern
    }
}

pub(crate) struct AttnDims {
    pub rows: usize,
    pub d: usize,
    pub heads: usize,
    pub slots: usize,
}

impl AttnDims {
    fn dh(&self) -> usize {
        self.d / self.heads
    }
}

/// Returns `(output, probs)`; `probs[e * heads + h]` is the attention weight of
/// pattern entry `e` in head `h`.
pub(crate) fn forward<F: Float>(
    q: &[F],
    k: &[F],
    v: &[F],
    bias: &[F],
    pattern: &AttnPattern,
    dims: &AttnDims,
) -> Result<(Vec<F>, Vec<F>)> {
    let AttnDims { d, heads, slots, .. } = *dims;
    let dh = dims.dh();
    let scale = F::of(1.0 / (dh as f64).sqrt());
    let mut out = vec![F::zero(); dims.rows * d];
    let mut probs = vec![F::zero(); pattern.num_entries() * heads];
    let mut scores: Vec<F> = Vec::new();
    for m in 0..dims.rows {
        let lo = pattern.offsets[m];
        let hi = pattern.offsets[m + 1];
        for h in 0..heads {
            let qh = &q[m * d + h * dh..m * d + (h + 1) * dh];
            scores.clear();
            let mut max = F::neg_infinity();
            for e in lo..hi {
                let key = pattern.keys[e];
                let kh = &k[key * d + h * dh..key * d + (h + 1) * dh];
                let dot: F = qh.iter().zip(kh).map(|(&a, &b)| a * b).sum();
                let s = dot * scale + bias[h * slots + pattern.slots[e]];
                if s > max {
                    max = s;
                }
                scores.push(s);
            }
            if !max.is_finite() {
                return Err(Error::AllMasked { row: m });
            }
            let mut z = F::zero();
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                z += *s;
            }
            let oh = &mut out[m * d + h * dh..m * d + (h + 1) * dh];
            for (i, e) in (lo..hi).enumerate() {
                let p = scores[i] / z;
                probs[e * heads + h] = p;
                if p == F::zero() {
                    continue;
                }
                let key = pattern.keys[e];
                let vh = &v[key * d + h * dh..key * d + (h + 1) * dh];
                for (o, &x) in oh.iter_mut().zip(vh) {
                    *o += p * x;
                }
            }
        }
    }
    Ok((out, probs))
}

pub(crate) struct AttnGrads<'a, F> {
    pub dq: Option<&'a mut [F]>,
    pub dk: Option<&'a mut [F]>,
    pub dv: Option<&'a mut [F]>,
    pub dbias: Option<&'a mut [F]>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<F: Float>(
    q: &[F],
    k: &[F],
    v: &[F],
    probs: &[F],
    dout: &[F],
    pattern: &AttnPattern,
    dims: &AttnDims,
    mut grads: AttnGrads<'_, F>,
) {
    let AttnDims { d, heads, slots, .. } = *dims;
    let dh = dims.dh();
    let scale = F::of(1.0 / (dh as f64).sqrt());
    let mut dp: Vec<F> = Vec::new();
    for m in 0..dims.rows {
        let lo = pattern.offsets[m];
        let hi = pattern.offsets[m + 1];
        for h in 0..heads {
            let doh = &dout[m * d + h * dh..m * d + (h + 1) * dh];
            dp.clear();
            let mut weighted = F::zero();
            for e in lo..hi {
                let key = pattern.keys[e];
                let vh = &v[key * d + h * dh..key * d + (h + 1) * dh];
                let g: F = doh.iter().zip(vh).map(|(&a, &b)| a * b).sum();
                weighted += probs[e * heads + h] * g;
                dp.push(g);
            }
            for (i, e) in (lo..hi).enumerate() {
                let p = probs[e * heads + h];
                if p == F::zero() {
                    continue;
                }
                let key = pattern.keys[e];
                let ds = p * (dp[i] - weighted);
                if let Some(dv) = grads.dv.as_deref_mut() {
                    let dvh = &mut dv[key * d + h * dh..key * d + (h + 1) * dh];
                    for (x, &g) in dvh.iter_mut().zip(doh) {
                        *x += p * g;
                    }
                }
                if let Some(db) = grads.dbias.as_deref_mut() {
                    db[h * slots + pattern.slots[e]] += ds;
                }
                let coef = ds * scale;
                if let Some(dq) = grads.dq.as_deref_mut() {
                    let kh = &k[key * d + h * dh..key * d + (h + 1) * dh];
                    let dqh = &mut dq[m * d + h * dh..m * d + (h + 1) * dh];
                    for (x, &kk) in dqh.iter_mut().zip(kh) {
                        *x += coef * kk;
                    }
                }
                if let Some(dk) = grads.dk.as_deref_mut() {
                    let qh = &q[m * d + h * dh..m * d + (h + 1) * dh];
                    let dkh = &mut dk[key * d + h * dh..key * d + (h + 1) * dh];
                    for (x, &qq) in dkh.iter_mut().zip(qh) {
                        *x += coef * qq;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_and_stack() {
        let mut b = AttnPattern::builder(2);
        b.push(0, 0);
        b.end_row();
        b.push(1, 0);
        b.push(0, 1);
        b.end_row();
        let p = b.build();
        assert_eq!(p.num_queries(), 2);
        assert_eq!(p.row(1).collect::<Vec<_>>(), vec![(1, 0), (0, 1)]);
        let s = AttnPattern::stack(&[&p, &p]);
        assert_eq!(s.num_queries(), 4);
        assert_eq!(s.row(3).collect::<Vec<_>>(), vec![(3, 0), (2, 1)]);
    }

    #[test]
    fn empty_row_is_all_masked() {
        let mut b = AttnPattern::builder(1);
        b.end_row();
        let p = b.build();
        let dims = AttnDims {
            rows: 1,
            d: 2,
            heads: 1,
            slots: 1,
        };
        let x = [1.0f64, 2.0];
        let err = forward(&x, &x, &x, &[0.0], &p, &dims).unwrap_err();
        assert!(matches!(err, Error::AllMasked { row: 0 }));
    }
}
