//! How strongly the readout depends on each input position: L2 norms of
//! the loss gradient with respect to the token embeddings.

use std::io::Write;

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::model::{AttentionRoute, Model};
use crate::tensor::Float;

#[derive(Debug, Clone, PartialEq)]
pub struct ReceptiveProfile {
    /// `g_j`, one per real input position.
    pub grad_norms: Vec<f64>,
    /// `c_j = Σ_{j' >= j} g_{j'}`, normalized so `c_0 = 1`.
    pub cumulative: Vec<f64>,
    /// `Σ_j g_j` before normalization.
    pub total: f64,
}

impl ReceptiveProfile {
    /// `position,grad_norm,cumulative`.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "position,grad_norm,cumulative")?;
        for (j, (g, c)) in self.grad_norms.iter().zip(&self.cumulative).enumerate() {
            writeln!(out, "{j},{g},{c}")?;
        }
        Ok(())
    }

    /// Share of the total gradient mass at the earliest position.
    pub fn earliest_share(&self) -> f64 {
        if self.total > 0.0 {
            self.grad_norms[0] / self.total
        } else {
            0.0
        }
    }
}

/// Profile of the cross-entropy at the readout against `target` (a
/// vocabulary index).
pub fn receptive_field<F: Float>(model: &Model<F>, tokens: &[usize], target: usize) -> Result<ReceptiveProfile> {
    if target >= model.config().vocab_size {
        return Err(Error::invalid("receptive_field", format!("target {target} outside vocabulary")));
    }
    let mut tape = Tape::new();
    let trace = model.forward_tape(&mut tape, &[tokens], AttentionRoute::Sparse)?;
    let loss = trace.loss(&mut tape, &[target])?;
    let embedding = trace.buckets[0].embedding;
    let grads = tape.backward_keep(loss, &[embedding])?;
    let g = grads
        .get(embedding)
        .ok_or_else(|| Error::invalid("receptive_field", "embedding received no gradient"))?;
    let offset = usize::from(model.config().bos);
    let grad_norms: Vec<f64> = (offset..offset + tokens.len())
        .map(|j| g.row(j).iter().map(|x| x.f64() * x.f64()).sum::<f64>().sqrt())
        .collect();
    Ok(profile_from_norms(grad_norms))
}

pub fn profile_from_norms(grad_norms: Vec<f64>) -> ReceptiveProfile {
    let total: f64 = grad_norms.iter().sum();
    let mut cumulative = vec![0.0; grad_norms.len()];
    let mut acc = 0.0;
    for j in (0..grad_norms.len()).rev() {
        acc += grad_norms[j];
        cumulative[j] = if total > 0.0 { acc / total } else { 0.0 };
    }
    ReceptiveProfile {
        grad_norms,
        cumulative,
        total,
    }
}
