//! RegularGPT: a Transformer whose attention follows a sliding dilated
//! pattern, with one block of `K` sublayers shared across a depth that grows
//! as `ceil(log_C T)`. Alongside the model live the pieces needed to check
//! it: exact finite-state tasks, a reverse-mode autodiff tape with gradient
//! checking, the two-layer ReLU construction for binary matrix products,
//! and the clustering / receptive-field / cost analyses.
//!
//! The `examples/` directory shows each capability end to end; the
//! `regulargpt` binary wraps the same functions as subcommands.

pub mod analysis;
pub mod automata;
pub mod autodiff;
pub mod cli;
pub mod error;
pub mod gradcheck;
pub mod lemma;
pub mod model;
pub mod optim;
pub mod param;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
