//! Claim-fact matching pretraining engine.
//!
//! Distills frozen teacher (language-model) embeddings into a small
//! graph-attention knowledge model over a knowledge graph, trained with a
//! three-term contrastive/distillation objective and evaluated by linear
//! probe and ranking metrics.

pub mod error;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod wire;

pub use error::{Error, Result};
pub use tape::{gradient_check, GradCheckReport, Tape, Var};
pub use tensor::Tensor;
