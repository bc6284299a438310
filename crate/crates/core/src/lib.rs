//! Convolutional text representations, from scratch.
//!
//! The crate turns raw question text into dense sentence vectors through a
//! small set of hand-written forward/backward kernels:
//!
//! ```text
//! text -> tokens -> index sequence -> embedding lookup ->
//!     [inception / gated / residual 1-D convolutions] ->
//!     masked k-max or mean pooling -> fixed-size representation
//! ```
//!
//! Everything runs on plain dense arrays with explicit backward passes and
//! 64-bit precision by default, so every gradient can be verified against
//! central finite differences. The crate is `no_std` (with `alloc`); all IO,
//! file formats and the CLI live in the companion `convtext` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod extractor;
pub mod head;
pub mod ops;
pub mod real;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
pub use extractor::{
    Extractor, ExtractorConfig, InceptionSpec, KernelSpec, Variant,
};
pub use head::Classifier;
pub use real::Real;
pub use rng::Rng;
pub use tensor::Tensor;
pub use vocab::{CharVocab, EncodedSentence, WordVocab};
