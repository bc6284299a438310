//! Standard-library companion to `convtext-core`: file formats (vocabulary,
//! TSV corpora, tensors, checkpoints, metrics logs), run configuration, and
//! the command implementations behind the `convtext` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod metrics;
pub mod tensor_io;
pub mod tsv;
pub mod vocab_io;

pub use config::Settings;
pub use error::{Error, Result};
