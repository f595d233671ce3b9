//! Hierarchical self-attentive recommendation of user-generated item lists.
//!
//! Items are aggregated into list representations, lists into user
//! representations, both through self-attention followed by a learned
//! attention pooling. A small prediction network scores user–list pairs.
//!
//! The crate is organised bottom-up:
//!
//! * [`numeric`]: dense arrays, reverse-mode tape, Adam, gradient checking
//! * [`data`]: loading, splitting, padding, negative sampling, synthesis
//! * [`model`]: the forward computation and its ablation switches
//! * [`training`]: loss, optimisation loop, early stopping, checkpoints
//! * [`eval`]: ranking and NDCG / precision / recall
//! * [`baselines`]: popularity, matrix factorisation and BPR

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numeric;
pub mod training;

pub use error::{Error, Result};
