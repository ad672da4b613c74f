//! Interpretable topic and narrative factor models.
//!
//! Documents are described two ways: a bag-of-words count vector and a vector
//! of categorical answers to a fixed questionnaire. Both views are explained by
//! double-softmax factor models (topics over words, narratives over answers)
//! whose per-document mixtures are softmaxes of latent functions living in a
//! reproducing kernel Hilbert space. The latent functions are fitted by kernel
//! functional gradient descent, where each step is a local posterior-minus-prior
//! correction followed by a kernel-weighted average across documents.
//!
//! The same update, with learned query/key projections of fixed document
//! embeddings, doubles as a single-head attention layer and is used to
//! extrapolate answers to documents that were never questioned ([`icl`]).
//!
//! The crate is `no_std` (with `alloc`). All transcendental functions go
//! through `libm` so results are bit-identical across platforms.

#![no_std]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod icl;
pub mod kernel;
pub mod linalg;
pub mod math;
pub mod rng;
pub mod simplex;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use linalg::Matrix;
