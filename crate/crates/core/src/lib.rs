//! Multi-source collaborative gradient discrepancy minimization for
//! federated domain generalization.
//!
//! Decentralized clients each hold one labeled source domain. Every round a
//! client starts from the broadcast global model, trains with cross-entropy
//! on original and augmented batches plus two gradient-matching penalties on
//! the classifier head, and uploads its model. The server averages the
//! uploads weighted by sample count and broadcasts the result together with
//! the clients' pre-aggregation heads, which serve as frozen bridges for the
//! next round's cross-domain matching.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the `mcgdm` companion crate.
//!
//! Layout:
//! - [`autodiff`]: dense tensors and a define-by-run reverse-mode tape.
//! - [`model`]: MLP feature extractor plus linear head.
//! - [`objective`]: cross-entropy, closed-form head gradients, cosine
//!   gradient matching and the combined local loss.
//! - [`data`]: synthetic shifted domains and label-preserving augmentations.
//! - [`federation`]: local training, aggregation, knowledge vote and the
//!   generalization / adaptation round loops.

#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod data;
mod error;
pub mod federation;
pub mod gradcheck;
pub mod model;
pub mod objective;
pub mod rng;

pub use error::{Error, Result};
