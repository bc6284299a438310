//! The model zoo: architecture configs, exact parameter counts, and the
//! instantiated extractors.
//!
//! Kernel settings follow the `width(out_channels)` notation, e.g.
//! `2(512)+3(512)+4(512)+5(512)` is an inception layer with four branches.

mod net;
mod params;

pub use net::{ArchCache, EncodedQuestion, Extractor};
pub use params::{Grads, Param, ParamSet};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One convolution branch: kernel width and number of feature maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    pub width: usize,
    pub out_channels: usize,
}

impl core::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}({})", self.width, self.out_channels)
    }
}

impl core::str::FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| Error::Parse(format!("bad kernel spec {s:?}")))?;
        if !s.ends_with(')') {
            return Err(Error::Parse(format!("bad kernel spec {s:?}")));
        }
        let width = s[..open]
            .parse()
            .map_err(|_| Error::Parse(format!("bad kernel width in {s:?}")))?;
        let out_channels = s[open + 1..s.len() - 1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad channel count in {s:?}")))?;
        let spec = KernelSpec { width, out_channels };
        if width < 1 || out_channels < 1 {
            return Err(Error::Parse(format!("kernel spec {spec} must be >= 1(1)")));
        }
        Ok(spec)
    }
}

/// An inception layer: parallel branches whose outputs concatenate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InceptionSpec {
    pub branches: Vec<KernelSpec>,
}

impl InceptionSpec {
    pub fn new(branches: Vec<KernelSpec>) -> Self {
        InceptionSpec { branches }
    }

    pub fn total_channels(&self) -> usize {
        self.branches.iter().map(|b| b.out_channels).sum()
    }
}

impl core::fmt::Display for InceptionSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for (i, b) in self.branches.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl core::str::FromStr for InceptionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let branches: Result<Vec<KernelSpec>> = s.split('+').map(str::parse).collect();
        let branches = branches?;
        if branches.is_empty() {
            return Err(Error::Parse("empty kernel setting".to_string()));
        }
        Ok(InceptionSpec { branches })
    }
}

/// The eleven text feature extractors explored in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    NonInception,
    InceptionWord,
    InceptionResidual,
    InceptionBottleneck,
    InceptionGateTanh,
    InceptionGate,
    InceptionChar,
    DeepResidualChar,
    InceptionCharWord,
    FastTextWord,
    FastTextCharWord,
}

impl Variant {
    pub const ALL: [Variant; 11] = [
        Variant::NonInception,
        Variant::InceptionWord,
        Variant::InceptionResidual,
        Variant::InceptionBottleneck,
        Variant::InceptionGateTanh,
        Variant::InceptionGate,
        Variant::InceptionChar,
        Variant::DeepResidualChar,
        Variant::InceptionCharWord,
        Variant::FastTextWord,
        Variant::FastTextCharWord,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NonInception => "non-inception",
            Variant::InceptionWord => "inception-word",
            Variant::InceptionResidual => "inception-residual",
            Variant::InceptionBottleneck => "inception-bottleneck",
            Variant::InceptionGateTanh => "inception-gate-tanh",
            Variant::InceptionGate => "inception-gate",
            Variant::InceptionChar => "inception-char",
            Variant::DeepResidualChar => "deep-residual-char",
            Variant::InceptionCharWord => "inception-char-word",
            Variant::FastTextWord => "fasttext-word",
            Variant::FastTextCharWord => "fasttext-char-word",
        }
    }

    /// Variants whose pipeline reads the word-index sequence.
    pub fn uses_words(self) -> bool {
        !matches!(self, Variant::InceptionChar | Variant::DeepResidualChar)
    }

    /// Variants whose pipeline reads the whole question as characters.
    pub fn uses_char_sequence(self) -> bool {
        matches!(self, Variant::InceptionChar | Variant::DeepResidualChar)
    }

    /// Variants that need per-word character encodings.
    pub fn uses_word_chars(self) -> bool {
        matches!(self, Variant::InceptionCharWord | Variant::FastTextCharWord)
    }

    pub fn is_fasttext(self) -> bool {
        matches!(self, Variant::FastTextWord | Variant::FastTextCharWord)
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown variant {s:?}")))
    }
}

/// Declarative architecture description; [`Extractor::build`] instantiates it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractorConfig {
    pub variant: Variant,
    /// Pseudo-image channel count d for word-level pipelines; also the output
    /// dimension of the fastText variants.
    pub embed_dim: usize,
    /// Character embedding dimension (char-CNN input channels, or the char
    /// half of the fastText char+word representation).
    pub char_embed_dim: usize,
    /// Kernel setting of the main convolution layer.
    pub inception: InceptionSpec,
    /// Kernel setting of the shared per-word char-CNN module.
    pub charcnn_inception: InceptionSpec,
    /// Word-vector dimension the char-CNN produces per word.
    pub charcnn_out: usize,
    /// Channel count of the deep residual character model.
    pub deep_channels: usize,
    /// Embedding row counts, including the PAD/UNK slots. Zero when unused.
    pub word_vocab_size: usize,
    pub char_vocab_size: usize,
}

impl ExtractorConfig {
    /// Published configuration for a variant: d = 300 with the best-reported
    /// kernel setting, 150-unit character module for char+word models.
    pub fn published(
        variant: Variant,
        word_vocab_size: usize,
        char_vocab_size: usize,
    ) -> Self {
        let inception = match variant {
            Variant::NonInception => "3(2048)",
            Variant::InceptionResidual => "1(512)+3(512)+5(512)+7(512)",
            Variant::InceptionBottleneck => "3(1024)+5(1024)",
            _ => "2(512)+3(512)+4(512)+5(512)",
        }
        .parse()
        .expect("builtin kernel settings parse");
        let char_embed_dim = match variant {
            Variant::FastTextCharWord => 150,
            _ => 16,
        };
        ExtractorConfig {
            variant,
            embed_dim: 300,
            char_embed_dim,
            inception,
            charcnn_inception: "2(64)+3(64)+4(64)+5(64)".parse().expect("valid"),
            charcnn_out: 150,
            deep_channels: 256,
            word_vocab_size,
            char_vocab_size,
        }
    }

    /// A reduced configuration for gradient checking and fast tests.
    pub fn tiny(variant: Variant, word_vocab_size: usize, char_vocab_size: usize) -> Self {
        ExtractorConfig {
            variant,
            embed_dim: 8,
            char_embed_dim: 4,
            inception: "2(4)+3(4)".parse().expect("valid"),
            charcnn_inception: "2(3)+3(3)".parse().expect("valid"),
            charcnn_out: 4,
            deep_channels: 5,
            word_vocab_size,
            char_vocab_size,
        }
    }

    /// Dimension of the vector [`Extractor::extract`] produces.
    pub fn output_dim(&self) -> usize {
        match self.variant {
            Variant::DeepResidualChar => self.deep_channels,
            Variant::FastTextWord | Variant::FastTextCharWord => self.embed_dim,
            _ => self.inception.total_channels(),
        }
    }

    /// Word-embedding column count (the word half for char+word variants).
    pub fn word_embed_cols(&self) -> usize {
        match self.variant {
            Variant::InceptionCharWord => self.embed_dim - self.charcnn_out,
            Variant::FastTextCharWord => self.embed_dim - self.char_embed_dim,
            _ => self.embed_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        let needs_inception = !matches!(
            self.variant,
            Variant::DeepResidualChar | Variant::FastTextWord | Variant::FastTextCharWord
        );
        if needs_inception {
            if self.inception.branches.is_empty() {
                return fail("inception setting has no branches".to_string());
            }
            for b in &self.inception.branches {
                if b.width < 1 || b.out_channels < 1 {
                    return fail(format!("invalid branch {b}"));
                }
            }
        }
        if self.variant.uses_words() {
            if self.word_vocab_size < 3 {
                return fail(format!(
                    "word vocabulary size {} too small (needs PAD, UNK and content)",
                    self.word_vocab_size
                ));
            }
            if self.word_embed_cols() < 1 {
                return fail(format!(
                    "word embedding half must be >= 1 (embed_dim {} too small)",
                    self.embed_dim
                ));
            }
        }
        let uses_chars = self.variant.uses_char_sequence() || self.variant.uses_word_chars();
        if uses_chars {
            if self.char_vocab_size < 3 {
                return fail(format!("char vocabulary size {} too small", self.char_vocab_size));
            }
            if self.char_embed_dim < 1 {
                return fail("char_embed_dim must be >= 1".to_string());
            }
        }
        if self.variant == Variant::InceptionCharWord {
            if self.charcnn_inception.branches.is_empty() || self.charcnn_out < 1 {
                return fail("char-CNN module needs branches and a positive output dim".to_string());
            }
            if self.charcnn_out >= self.embed_dim {
                return fail(format!(
                    "charcnn_out {} must leave room for the word half of d = {}",
                    self.charcnn_out, self.embed_dim
                ));
            }
        }
        if self.variant == Variant::FastTextCharWord && self.char_embed_dim >= self.embed_dim {
            return fail(format!(
                "char half {} must leave room for the word half of d = {}",
                self.char_embed_dim, self.embed_dim
            ));
        }
        if self.variant == Variant::DeepResidualChar && self.deep_channels < 1 {
            return fail("deep_channels must be >= 1".to_string());
        }
        Ok(())
    }
}

fn plain_branch_params(width: usize, c_in: usize, c_out: usize) -> u64 {
    (width * c_in * c_out + c_out) as u64
}

fn bottleneck_mid(c_out: usize) -> usize {
    (c_out / 4).max(1)
}

fn bottleneck_branch_params(width: usize, c_in: usize, c_out: usize) -> u64 {
    let m = bottleneck_mid(c_out);
    plain_branch_params(1, c_in, m)
        + plain_branch_params(width, m, m)
        + plain_branch_params(1, m, c_out)
}

fn inception_params(spec: &InceptionSpec, c_in: usize, gated: bool, bottleneck: bool) -> u64 {
    spec.branches
        .iter()
        .map(|b| {
            if bottleneck {
                bottleneck_branch_params(b.width, c_in, b.out_channels)
            } else {
                let base = plain_branch_params(b.width, c_in, b.out_channels);
                if gated {
                    2 * base
                } else {
                    base
                }
            }
        })
        .sum()
}

/// Exact number of convolution/gate weights and biases of a configuration.
///
/// Embedding tables are excluded: the published per-model counts are only
/// reproducible under that reading. Use [`embedding_param_count`] for the
/// table sizes.
pub fn param_count(config: &ExtractorConfig) -> u64 {
    match config.variant {
        Variant::NonInception | Variant::InceptionWord | Variant::InceptionChar => {
            let c_in = if config.variant == Variant::InceptionChar {
                config.char_embed_dim
            } else {
                config.embed_dim
            };
            inception_params(&config.inception, c_in, false, false)
        }
        Variant::InceptionGateTanh | Variant::InceptionGate => {
            inception_params(&config.inception, config.embed_dim, true, false)
        }
        Variant::InceptionBottleneck => {
            inception_params(&config.inception, config.embed_dim, false, true)
        }
        Variant::InceptionResidual => {
            let total = config.inception.total_channels();
            inception_params(&config.inception, config.embed_dim, false, false)
                + inception_params(&config.inception, total, false, false)
        }
        Variant::DeepResidualChar => {
            let c = config.deep_channels;
            plain_branch_params(3, config.char_embed_dim, c) + 4 * plain_branch_params(3, c, c)
        }
        Variant::InceptionCharWord => {
            let charcnn_total = config.charcnn_inception.total_channels();
            inception_params(&config.charcnn_inception, config.char_embed_dim, false, false)
                + plain_branch_params(1, charcnn_total, config.charcnn_out)
                + inception_params(&config.inception, config.embed_dim, false, false)
        }
        Variant::FastTextWord | Variant::FastTextCharWord => 0,
    }
}

/// Total entries of the embedding tables a configuration instantiates.
pub fn embedding_param_count(config: &ExtractorConfig) -> u64 {
    let mut total = 0u64;
    if config.variant.uses_words() {
        total += (config.word_vocab_size * config.word_embed_cols()) as u64;
    }
    if config.variant.uses_char_sequence() || config.variant.uses_word_chars() {
        total += (config.char_vocab_size * config.char_embed_dim) as u64;
    }
    total
}

/// Parameter count of a stacked LSTM: per layer `4 * ((in + h) * h + h)`,
/// where the first layer sees `input_dim` and later layers see `hidden_dim`.
pub fn lstm_param_count(input_dim: usize, hidden_dim: usize, num_layers: usize) -> u64 {
    let mut total = 0u64;
    let mut in_dim = input_dim;
    for _ in 0..num_layers {
        total += 4 * ((in_dim + hidden_dim) * hidden_dim + hidden_dim) as u64;
        in_dim = hidden_dim;
    }
    total
}
