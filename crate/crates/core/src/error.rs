//! Error type shared by all modules.

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Vocabulary construction got no tokens at all.
    EmptyCorpus,
    /// Encoding was asked to encode an empty token list.
    EmptySentence,
    /// A character appears twice in a character-vocabulary configuration.
    DuplicateChar(char),
    /// A configured punctuation entry is a letter or the space character.
    InvalidPunctuation(char),
    /// Token or row index outside the valid range.
    IndexOutOfRange { index: usize, bound: usize },
    /// Tensor shapes do not line up for the requested operation.
    ShapeMismatch(String),
    /// Pooling or averaging over a fully masked sequence.
    FullyMasked,
    /// k-max pooling with k < 1.
    InvalidK,
    /// Dropout rate outside [0, 1).
    InvalidRate(String),
    /// Classification label >= number of classes.
    LabelOutOfRange { label: usize, classes: usize },
    /// Architecture or training configuration rejected, with the reason.
    InvalidConfig(String),
    /// A loss or activation became NaN/Inf.
    NonFinite(String),
    /// Training or evaluation over an empty dataset.
    EmptyDataset,
    /// The consensus metric needs exactly ten ground-truth answers.
    GroundTruthCount(usize),
    /// Malformed spec string (kernel settings, variants, ...).
    Parse(String),
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::EmptyCorpus => write!(f, "empty corpus"),
            Error::EmptySentence => write!(f, "empty sentence"),
            Error::DuplicateChar(c) => write!(f, "duplicate character {c:?} in vocabulary config"),
            Error::InvalidPunctuation(c) => {
                write!(f, "punctuation list may not contain letters or space, got {c:?}")
            }
            Error::IndexOutOfRange { index, bound } => {
                write!(f, "index {index} out of range (bound {bound})")
            }
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::FullyMasked => write!(f, "fully masked input"),
            Error::InvalidK => write!(f, "k-max pooling requires k >= 1"),
            Error::InvalidRate(msg) => write!(f, "invalid rate: {msg}"),
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::EmptyDataset => write!(f, "empty dataset"),
            Error::GroundTruthCount(n) => {
                write!(f, "expected exactly 10 ground-truth answers, got {n}")
            }
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}
