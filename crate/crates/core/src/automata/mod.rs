//! Finite-state semiautomata: task definitions, samplers, exact oracles and
//! the transition-matrix algebra under which composition is a matrix
//! product.

mod sampling;
mod semiautomaton;
mod tasks;

pub use sampling::{effective_length, sample, training_length, Sample};
pub use semiautomaton::{compose, Semiautomaton, TransitionMatrix};
pub use tasks::{build, make_task, Sampler, TaskKind, TaskSpec, ACCEPT_REJECT};

use crate::error::Result;

/// State reached from `q` after `tokens`; the empty sequence returns `q`.
pub fn transition_apply(automaton: &Semiautomaton, q: usize, tokens: &[usize]) -> Result<usize> {
    automaton.apply(q, tokens)
}

pub fn transition_matrix(automaton: &Semiautomaton, tokens: &[usize]) -> Result<TransitionMatrix> {
    automaton.transition_matrix(tokens)
}

/// The shift-by-`k` matrix of the 5-cycle, row `q` = one-hot of `(q + k) mod 5`.
pub fn cycle_shift(k: usize) -> TransitionMatrix {
    TransitionMatrix::from_map((0..5).map(|q| (q + k) % 5).collect()).expect("in range")
}
