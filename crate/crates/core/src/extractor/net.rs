//! Building and running the extractors: parameter initialization, the
//! forward pass with cached intermediates, and the hand-written backward
//! pass for every variant.

#[allow(unused_imports)] // required in no_std builds, redundant when std is linked for tests
use num_traits::Float as _;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops::{
    concat_channels, conv1d_backward, conv1d_forward, embedding_backward, embedding_forward,
    kmax_pool_backward, kmax_pool_forward, local_max_pool2_backward, local_max_pool2_forward,
    mean_pool_backward, mean_pool_forward, sigmoid, sigmoid_backward, split_channels, tanh_backward,
    tanh_map, zero_masked_rows, ArgPositions,
};
use crate::real::Real;
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::vocab::{encode_chars, encode_words, CharVocab, EncodedSentence, WordVocab};

use super::params::{Grads, ParamSet};
use super::{ExtractorConfig, InceptionSpec, Variant};

/// Everything a variant may need per question. Unused fields stay `None`.
#[derive(Debug, Clone)]
pub struct EncodedQuestion {
    /// Word-index sequence of the question.
    pub words: Option<EncodedSentence>,
    /// The whole question as one character sequence.
    pub char_seq: Option<EncodedSentence>,
    /// Per-word character encodings, one per unpadded word position.
    pub word_chars: Option<Vec<EncodedSentence>>,
}

impl EncodedQuestion {
    /// Encode a tokenized question with exactly the fields `variant` needs.
    ///
    /// `word_target` pads/crops the word sequence, `word_char_target` each
    /// word's characters, `char_seq_target` the flat character sequence
    /// (tokens joined by single spaces).
    pub fn encode(
        tokens: &[String],
        variant: Variant,
        word_vocab: Option<&WordVocab>,
        char_vocab: Option<&CharVocab>,
        word_target: usize,
        word_char_target: usize,
        char_seq_target: usize,
    ) -> Result<Self> {
        let mut q = EncodedQuestion {
            words: None,
            char_seq: None,
            word_chars: None,
        };
        if variant.uses_words() {
            let vocab = word_vocab
                .ok_or_else(|| Error::InvalidConfig("variant needs a word vocabulary".into()))?;
            q.words = Some(encode_words(vocab, tokens, word_target)?);
        }
        if variant.uses_char_sequence() {
            let vocab = char_vocab
                .ok_or_else(|| Error::InvalidConfig("variant needs a char vocabulary".into()))?;
            let joined = tokens.join(" ");
            q.char_seq = Some(encode_chars(vocab, &joined, char_seq_target)?);
        }
        if variant.uses_word_chars() {
            let vocab = char_vocab
                .ok_or_else(|| Error::InvalidConfig("variant needs a char vocabulary".into()))?;
            let words = q.words.as_ref().expect("word-chars variants also use words");
            let mut per_word = Vec::with_capacity(words.true_length);
            for t in 0..words.true_length {
                per_word.push(encode_chars(vocab, &tokens[t], word_char_target)?);
            }
            q.word_chars = Some(per_word);
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvRef {
    weights: usize,
    bias: usize,
    c_out: usize,
}

#[derive(Debug, Clone)]
enum Branch {
    Plain(ConvRef),
    Gated {
        content: ConvRef,
        gate: ConvRef,
        tanh: bool,
    },
    Bottleneck {
        reduce: ConvRef,
        mid: ConvRef,
        expand: ConvRef,
    },
}

impl Branch {
    fn out_channels(&self) -> usize {
        match self {
            Branch::Plain(c) => c.c_out,
            Branch::Gated { content, .. } => content.c_out,
            Branch::Bottleneck { expand, .. } => expand.c_out,
        }
    }
}

#[derive(Debug, Clone)]
struct InceptionLayer {
    branches: Vec<Branch>,
}

impl InceptionLayer {
    fn branch_sizes(&self) -> Vec<usize> {
        self.branches.iter().map(Branch::out_channels).collect()
    }
}

#[derive(Debug, Clone)]
struct CharCnn {
    embed: usize,
    inception: InceptionLayer,
    reduce: ConvRef,
}

#[derive(Debug, Clone)]
enum Arch {
    Conv {
        embed: usize,
        char_input: bool,
        layer1: InceptionLayer,
        layer2: Option<InceptionLayer>,
    },
    DeepResidual {
        embed: usize,
        conv0: ConvRef,
        res: Vec<ConvRef>,
    },
    CharWord {
        word_embed: usize,
        charcnn: CharCnn,
        layer: InceptionLayer,
    },
    FastTextWord {
        embed: usize,
    },
    FastTextCharWord {
        word_embed: usize,
        char_embed: usize,
    },
}

#[derive(Debug, Clone)]
enum BranchCache<F> {
    Plain,
    Gated { sig: Tensor<F>, act: Tensor<F> },
    Bottleneck { reduced: Tensor<F>, mid_out: Tensor<F> },
}

#[derive(Debug, Clone)]
struct InceptionCache<F> {
    input: Tensor<F>,
    branches: Vec<BranchCache<F>>,
}

#[derive(Debug, Clone)]
struct CharCnnCache<F> {
    incep: InceptionCache<F>,
    incep_out: Tensor<F>,
    argpos: ArgPositions,
}

/// Opaque forward state consumed by [`Extractor::extract_backward`].
#[derive(Debug, Clone)]
pub struct ArchCache<F> {
    inner: CacheInner<F>,
}

#[derive(Debug, Clone)]
enum CacheInner<F> {
    Conv {
        c1: InceptionCache<F>,
        c2: Option<InceptionCache<F>>,
        argpos: ArgPositions,
        t_len: usize,
    },
    DeepResidual {
        embedded: Tensor<F>,
        res_inputs: Vec<Tensor<F>>,
        stage_masks: Vec<Vec<bool>>,
        pools: Vec<(ArgPositions, usize)>,
        final_argpos: ArgPositions,
        final_rows: usize,
    },
    CharWord {
        c_main: InceptionCache<F>,
        char_caches: Vec<CharCnnCache<F>>,
        argpos: ArgPositions,
        t_len: usize,
    },
    FastText,
}

pub struct Extractor<F: Real> {
    config: ExtractorConfig,
    params: ParamSet<F>,
    arch: Arch,
    output_dim: usize,
}

struct Builder<'a, F: Real> {
    params: &'a mut ParamSet<F>,
    rng: Rng,
}

impl<F: Real> Builder<'_, F> {
    fn conv_named(
        &mut self,
        name_w: String,
        name_b: String,
        width: usize,
        c_in: usize,
        c_out: usize,
    ) -> ConvRef {
        let fan_in = (width * c_in) as f64;
        let fan_out = (width * c_out) as f64;
        let bound = (6.0 / (fan_in + fan_out)).sqrt();
        let mut weights = Tensor::zeros(&[width, c_in, c_out]);
        for w in weights.data_mut() {
            *w = self.rng.uniform(-bound, bound);
        }
        let bias = Tensor::zeros(&[c_out]);
        let weights = self.params.add(name_w, weights, true, None);
        let bias = self.params.add(name_b, bias, true, None);
        ConvRef {
            weights,
            bias,
            c_out,
        }
    }

    fn conv(&mut self, name: &str, width: usize, c_in: usize, c_out: usize) -> ConvRef {
        self.conv_named(format!("{name}.w"), format!("{name}.b"), width, c_in, c_out)
    }

    /// Gate kernels live under `<name>.gate_*` so the content kernel keeps
    /// the same name as in the ungated variant.
    fn gate_conv(&mut self, name: &str, width: usize, c_in: usize, c_out: usize) -> ConvRef {
        self.conv_named(
            format!("{name}.gate_w"),
            format!("{name}.gate_b"),
            width,
            c_in,
            c_out,
        )
    }

    fn embedding(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        let mut table = Tensor::zeros(&[rows, cols]);
        for w in table.data_mut() {
            *w = self.rng.uniform(-0.08, 0.08);
        }
        // PAD row stays zero so padded positions embed to zero.
        for c in 0..cols {
            table.set2(crate::vocab::PAD_INDEX, c, F::zero());
        }
        self.params.add(
            String::from(name),
            table,
            false,
            Some(crate::vocab::PAD_INDEX),
        )
    }

    fn inception(
        &mut self,
        prefix: &str,
        spec: &InceptionSpec,
        c_in: usize,
        gated: Option<bool>,
        bottleneck: bool,
    ) -> InceptionLayer {
        let mut branches = Vec::new();
        for (i, b) in spec.branches.iter().enumerate() {
            let name = format!("{prefix}.b{i}");
            let branch = if bottleneck {
                let m = (b.out_channels / 4).max(1);
                Branch::Bottleneck {
                    reduce: self.conv(&format!("{name}.reduce"), 1, c_in, m),
                    mid: self.conv(&format!("{name}.mid"), b.width, m, m),
                    expand: self.conv(&format!("{name}.expand"), 1, m, b.out_channels),
                }
            } else if let Some(tanh) = gated {
                Branch::Gated {
                    content: self.conv(&name, b.width, c_in, b.out_channels),
                    gate: self.gate_conv(&name, b.width, c_in, b.out_channels),
                    tanh,
                }
            } else {
                Branch::Plain(self.conv(&name, b.width, c_in, b.out_channels))
            };
            branches.push(branch);
        }
        InceptionLayer { branches }
    }
}

impl<F: Real> Extractor<F> {
    /// Instantiate a configuration with deterministic initialization.
    pub fn build(config: ExtractorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let mut b = Builder {
            params: &mut params,
            rng: Rng::new(seed),
        };
        let arch = match config.variant {
            Variant::NonInception | Variant::InceptionWord => {
                let embed = b.embedding("embed.word", config.word_vocab_size, config.embed_dim);
                let layer1 = b.inception("layer1", &config.inception, config.embed_dim, None, false);
                Arch::Conv {
                    embed,
                    char_input: false,
                    layer1,
                    layer2: None,
                }
            }
            Variant::InceptionGateTanh | Variant::InceptionGate => {
                let tanh = config.variant == Variant::InceptionGateTanh;
                let embed = b.embedding("embed.word", config.word_vocab_size, config.embed_dim);
                let layer1 =
                    b.inception("layer1", &config.inception, config.embed_dim, Some(tanh), false);
                Arch::Conv {
                    embed,
                    char_input: false,
                    layer1,
                    layer2: None,
                }
            }
            Variant::InceptionBottleneck => {
                let embed = b.embedding("embed.word", config.word_vocab_size, config.embed_dim);
                let layer1 = b.inception("layer1", &config.inception, config.embed_dim, None, true);
                Arch::Conv {
                    embed,
                    char_input: false,
                    layer1,
                    layer2: None,
                }
            }
            Variant::InceptionResidual => {
                let embed = b.embedding("embed.word", config.word_vocab_size, config.embed_dim);
                let layer1 = b.inception("layer1", &config.inception, config.embed_dim, None, false);
                let total = config.inception.total_channels();
                let layer2 = b.inception("layer2", &config.inception, total, None, false);
                Arch::Conv {
                    embed,
                    char_input: false,
                    layer1,
                    layer2: Some(layer2),
                }
            }
            Variant::InceptionChar => {
                let embed = b.embedding("embed.char", config.char_vocab_size, config.char_embed_dim);
                let layer1 =
                    b.inception("layer1", &config.inception, config.char_embed_dim, None, false);
                Arch::Conv {
                    embed,
                    char_input: true,
                    layer1,
                    layer2: None,
                }
            }
            Variant::DeepResidualChar => {
                let embed = b.embedding("embed.char", config.char_vocab_size, config.char_embed_dim);
                let c = config.deep_channels;
                let conv0 = b.conv("conv0", 3, config.char_embed_dim, c);
                let res = (1..=4).map(|i| b.conv(&format!("res{i}"), 3, c, c)).collect();
                Arch::DeepResidual { embed, conv0, res }
            }
            Variant::InceptionCharWord => {
                let word_embed =
                    b.embedding("embed.word", config.word_vocab_size, config.word_embed_cols());
                let char_embed =
                    b.embedding("embed.char", config.char_vocab_size, config.char_embed_dim);
                let charcnn_inception = b.inception(
                    "charcnn",
                    &config.charcnn_inception,
                    config.char_embed_dim,
                    None,
                    false,
                );
                let reduce = b.conv(
                    "charcnn.reduce",
                    1,
                    config.charcnn_inception.total_channels(),
                    config.charcnn_out,
                );
                let layer = b.inception("layer1", &config.inception, config.embed_dim, None, false);
                Arch::CharWord {
                    word_embed,
                    charcnn: CharCnn {
                        embed: char_embed,
                        inception: charcnn_inception,
                        reduce,
                    },
                    layer,
                }
            }
            Variant::FastTextWord => {
                let embed = b.embedding("embed.word", config.word_vocab_size, config.embed_dim);
                Arch::FastTextWord { embed }
            }
            Variant::FastTextCharWord => {
                let word_embed =
                    b.embedding("embed.word", config.word_vocab_size, config.word_embed_cols());
                let char_embed =
                    b.embedding("embed.char", config.char_vocab_size, config.char_embed_dim);
                Arch::FastTextCharWord {
                    word_embed,
                    char_embed,
                }
            }
        };
        let output_dim = config.output_dim();
        Ok(Extractor {
            config,
            params,
            arch,
            output_dim,
        })
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn params(&self) -> &ParamSet<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<F> {
        &mut self.params
    }

    pub fn new_grads(&self) -> Grads<F> {
        Grads::zeros_like(&self.params)
    }

    fn tensor(&self, idx: usize) -> &Tensor<F> {
        self.params.get(idx)
    }

    fn run_conv(&self, r: ConvRef, input: &Tensor<F>) -> Result<Tensor<F>> {
        conv1d_forward(input, self.tensor(r.weights), self.tensor(r.bias))
    }

    fn conv_back(
        &self,
        grads: &mut Grads<F>,
        r: ConvRef,
        grad_out: &Tensor<F>,
        input: &Tensor<F>,
    ) -> Result<Tensor<F>> {
        let (grad_in, grad_w, grad_b) = conv1d_backward(grad_out, input, self.tensor(r.weights))?;
        grads.tensors[r.weights].axpy(F::one(), &grad_w);
        grads.tensors[r.bias].axpy(F::one(), &grad_b);
        Ok(grad_in)
    }

    fn inception_forward(
        &self,
        layer: &InceptionLayer,
        input: &Tensor<F>,
        mask: &[bool],
    ) -> Result<(Tensor<F>, InceptionCache<F>)> {
        let mut outs = Vec::with_capacity(layer.branches.len());
        let mut caches = Vec::with_capacity(layer.branches.len());
        for branch in &layer.branches {
            match branch {
                Branch::Plain(r) => {
                    outs.push(self.run_conv(*r, input)?);
                    caches.push(BranchCache::Plain);
                }
                Branch::Gated { content, gate, tanh } => {
                    let conv_c = self.run_conv(*content, input)?;
                    let sig = sigmoid(&self.run_conv(*gate, input)?);
                    let act = if *tanh { tanh_map(&conv_c) } else { conv_c };
                    outs.push(crate::ops::hadamard(&sig, &act)?);
                    caches.push(BranchCache::Gated { sig, act });
                }
                Branch::Bottleneck { reduce, mid, expand } => {
                    // padded rows would otherwise carry the reduce bias into
                    // the wider middle convolution
                    let mut reduced = self.run_conv(*reduce, input)?;
                    zero_masked_rows(&mut reduced, mask);
                    let mid_out = self.run_conv(*mid, &reduced)?;
                    outs.push(self.run_conv(*expand, &mid_out)?);
                    caches.push(BranchCache::Bottleneck { reduced, mid_out });
                }
            }
        }
        let refs: Vec<&Tensor<F>> = outs.iter().collect();
        let out = concat_channels(&refs)?;
        Ok((
            out,
            InceptionCache {
                input: input.clone(),
                branches: caches,
            },
        ))
    }

    fn inception_backward(
        &self,
        grads: &mut Grads<F>,
        layer: &InceptionLayer,
        cache: &InceptionCache<F>,
        grad_out: &Tensor<F>,
        mask: &[bool],
    ) -> Result<Tensor<F>> {
        let parts = split_channels(grad_out, &layer.branch_sizes())?;
        let mut grad_input = Tensor::zeros(cache.input.shape());
        for ((branch, bcache), part) in layer.branches.iter().zip(&cache.branches).zip(&parts) {
            match (branch, bcache) {
                (Branch::Plain(r), BranchCache::Plain) => {
                    let g = self.conv_back(grads, *r, part, &cache.input)?;
                    grad_input.axpy(F::one(), &g);
                }
                (Branch::Gated { content, gate, tanh }, BranchCache::Gated { sig, act }) => {
                    let grad_act = crate::ops::hadamard(part, sig)?;
                    let grad_sig = crate::ops::hadamard(part, act)?;
                    let grad_gate_pre = sigmoid_backward(&grad_sig, sig);
                    let grad_content_pre = if *tanh {
                        tanh_backward(&grad_act, act)
                    } else {
                        grad_act
                    };
                    let g1 = self.conv_back(grads, *content, &grad_content_pre, &cache.input)?;
                    let g2 = self.conv_back(grads, *gate, &grad_gate_pre, &cache.input)?;
                    grad_input.axpy(F::one(), &g1);
                    grad_input.axpy(F::one(), &g2);
                }
                (
                    Branch::Bottleneck { reduce, mid, expand },
                    BranchCache::Bottleneck { reduced, mid_out },
                ) => {
                    let g_mid = self.conv_back(grads, *expand, part, mid_out)?;
                    let mut g_red = self.conv_back(grads, *mid, &g_mid, reduced)?;
                    zero_masked_rows(&mut g_red, mask);
                    let g_in = self.conv_back(grads, *reduce, &g_red, &cache.input)?;
                    grad_input.axpy(F::one(), &g_in);
                }
                _ => return Err(Error::InvalidConfig("stale forward cache".into())),
            }
        }
        Ok(grad_input)
    }

    fn embed_back(
        &self,
        grads: &mut Grads<F>,
        table_idx: usize,
        grad: &Tensor<F>,
        sentence: &EncodedSentence,
    ) -> Result<()> {
        let table = self.tensor(table_idx);
        let g = embedding_backward(grad, sentence, table.rows(), table.cols())?;
        grads.tensors[table_idx].axpy(F::one(), &g);
        Ok(())
    }

    fn words_of<'a>(&self, q: &'a EncodedQuestion) -> Result<&'a EncodedSentence> {
        q.words
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("question lacks word encoding".into()))
    }

    fn charcnn_forward(
        &self,
        charcnn: &CharCnn,
        word: &EncodedSentence,
    ) -> Result<(Tensor<F>, CharCnnCache<F>)> {
        let emb = embedding_forward(self.tensor(charcnn.embed), word)?;
        let (incep_out, incep) = self.inception_forward(&charcnn.inception, &emb, &word.mask)?;
        let reduced = self.run_conv(charcnn.reduce, &incep_out)?;
        let (pooled, argpos) = kmax_pool_forward(&reduced, 1, &word.mask)?;
        let out = Tensor::from_vec(&[pooled.cols()], pooled.data().to_vec())?;
        Ok((
            out,
            CharCnnCache {
                incep,
                incep_out,
                argpos,
            },
        ))
    }

    fn charcnn_backward(
        &self,
        grads: &mut Grads<F>,
        charcnn: &CharCnn,
        cache: &CharCnnCache<F>,
        word: &EncodedSentence,
        grad_vec: &Tensor<F>,
    ) -> Result<()> {
        let c_out = grad_vec.numel();
        let g = Tensor::from_vec(&[1, c_out], grad_vec.data().to_vec())?;
        let g_reduced = kmax_pool_backward(&g, &cache.argpos, word.indices.len(), c_out)?;
        let g_incep = self.conv_back(grads, charcnn.reduce, &g_reduced, &cache.incep_out)?;
        let g_emb =
            self.inception_backward(grads, &charcnn.inception, &cache.incep, &g_incep, &word.mask)?;
        self.embed_back(grads, charcnn.embed, &g_emb, word)
    }

    /// Deterministic forward pass to a fixed-size representation.
    pub fn extract(&self, q: &EncodedQuestion) -> Result<Tensor<F>> {
        self.extract_with_cache(q).map(|(out, _)| out)
    }

    /// Forward pass that also returns the state [`Self::extract_backward`] needs.
    pub fn extract_with_cache(&self, q: &EncodedQuestion) -> Result<(Tensor<F>, ArchCache<F>)> {
        let (out, inner) = match &self.arch {
            Arch::Conv {
                embed,
                char_input,
                layer1,
                layer2,
            } => {
                let sent = if *char_input {
                    q.char_seq
                        .as_ref()
                        .ok_or_else(|| Error::InvalidConfig("question lacks char encoding".into()))?
                } else {
                    self.words_of(q)?
                };
                let embedded = embedding_forward(self.tensor(*embed), sent)?;
                let (mut h1, c1) = self.inception_forward(layer1, &embedded, &sent.mask)?;
                let (h, c2) = match layer2 {
                    Some(l2) => {
                        // keep padded rows at zero so the second layer sees
                        // the same boundary as an unpadded sentence would
                        zero_masked_rows(&mut h1, &sent.mask);
                        let (h2, c2) = self.inception_forward(l2, &h1, &sent.mask)?;
                        (h2.add(&h1)?, Some(c2))
                    }
                    None => (h1, None),
                };
                let (pooled, argpos) = kmax_pool_forward(&h, 1, &sent.mask)?;
                let out = Tensor::from_vec(&[pooled.cols()], pooled.data().to_vec())?;
                (
                    out,
                    CacheInner::Conv {
                        c1,
                        c2,
                        argpos,
                        t_len: sent.indices.len(),
                    },
                )
            }
            Arch::DeepResidual { embed, conv0, res } => {
                let sent = q
                    .char_seq
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("question lacks char encoding".into()))?;
                let embedded = embedding_forward(self.tensor(*embed), sent)?;
                let mut h = self.run_conv(*conv0, &embedded)?;
                let mut mask = sent.mask.clone();
                // padded rows stay zero throughout the stack; otherwise each
                // conv bias would leak across the sentence boundary
                zero_masked_rows(&mut h, &mask);
                let mut res_inputs = Vec::with_capacity(res.len());
                let mut stage_masks = Vec::with_capacity(res.len());
                let mut pools = Vec::new();
                for (i, r) in res.iter().enumerate() {
                    res_inputs.push(h.clone());
                    stage_masks.push(mask.clone());
                    h = self.run_conv(*r, &h)?.add(&h)?;
                    zero_masked_rows(&mut h, &mask);
                    // local pooling after each residual conv except the last
                    if i + 1 < res.len() {
                        let rows = h.rows();
                        let (pooled, new_mask, argpos) = local_max_pool2_forward(&h, &mask)?;
                        pools.push((argpos, rows));
                        h = pooled;
                        mask = new_mask;
                    }
                }
                let final_rows = h.rows();
                let (pooled, final_argpos) = kmax_pool_forward(&h, 1, &mask)?;
                let out = Tensor::from_vec(&[pooled.cols()], pooled.data().to_vec())?;
                (
                    out,
                    CacheInner::DeepResidual {
                        embedded,
                        res_inputs,
                        stage_masks,
                        pools,
                        final_argpos,
                        final_rows,
                    },
                )
            }
            Arch::CharWord {
                word_embed,
                charcnn,
                layer,
            } => {
                let words = self.words_of(q)?;
                let word_chars = q
                    .word_chars
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("question lacks per-word chars".into()))?;
                if word_chars.len() != words.true_length {
                    return Err(Error::ShapeMismatch(format!(
                        "{} per-word char encodings for {} words",
                        word_chars.len(),
                        words.true_length
                    )));
                }
                let table = self.tensor(*word_embed);
                let dw = table.cols();
                let dc = self.config.charcnn_out;
                let t_len = words.indices.len();
                let mut image = Tensor::zeros(&[t_len, dw + dc]);
                let mut char_caches = Vec::with_capacity(words.true_length);
                for t in 0..words.true_length {
                    let idx = words.indices[t];
                    if idx >= table.rows() {
                        return Err(Error::IndexOutOfRange {
                            index: idx,
                            bound: table.rows(),
                        });
                    }
                    for c in 0..dw {
                        image.set2(t, c, table.at2(idx, c));
                    }
                    let (cvec, ccache) = self.charcnn_forward(charcnn, &word_chars[t])?;
                    for c in 0..dc {
                        image.set2(t, dw + c, cvec.data()[c]);
                    }
                    char_caches.push(ccache);
                }
                let (h, c_main) = self.inception_forward(layer, &image, &words.mask)?;
                let (pooled, argpos) = kmax_pool_forward(&h, 1, &words.mask)?;
                let out = Tensor::from_vec(&[pooled.cols()], pooled.data().to_vec())?;
                (
                    out,
                    CacheInner::CharWord {
                        c_main,
                        char_caches,
                        argpos,
                        t_len,
                    },
                )
            }
            Arch::FastTextWord { embed } => {
                let words = self.words_of(q)?;
                let embedded = embedding_forward(self.tensor(*embed), words)?;
                let out = mean_pool_forward(&embedded, &words.mask)?;
                (out, CacheInner::FastText)
            }
            Arch::FastTextCharWord {
                word_embed,
                char_embed,
            } => {
                let words = self.words_of(q)?;
                let word_chars = q
                    .word_chars
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("question lacks per-word chars".into()))?;
                if word_chars.len() != words.true_length {
                    return Err(Error::ShapeMismatch(format!(
                        "{} per-word char encodings for {} words",
                        word_chars.len(),
                        words.true_length
                    )));
                }
                let wtable = self.tensor(*word_embed);
                let ctable = self.tensor(*char_embed);
                let dw = wtable.cols();
                let dc = ctable.cols();
                let t_len = words.indices.len();
                let mut image = Tensor::zeros(&[t_len, dw + dc]);
                for t in 0..words.true_length {
                    let idx = words.indices[t];
                    if idx >= wtable.rows() {
                        return Err(Error::IndexOutOfRange {
                            index: idx,
                            bound: wtable.rows(),
                        });
                    }
                    for c in 0..dw {
                        image.set2(t, c, wtable.at2(idx, c));
                    }
                    let cemb = embedding_forward(ctable, &word_chars[t])?;
                    let cmean = mean_pool_forward(&cemb, &word_chars[t].mask)?;
                    for c in 0..dc {
                        image.set2(t, dw + c, cmean.data()[c]);
                    }
                }
                let out = mean_pool_forward(&image, &words.mask)?;
                (out, CacheInner::FastText)
            }
        };
        debug_assert_eq!(out.numel(), self.output_dim);
        Ok((out, ArchCache { inner }))
    }

    /// Exact gradients of every parameter for `d loss / d output = grad_out`.
    pub fn extract_backward(
        &self,
        q: &EncodedQuestion,
        cache: &ArchCache<F>,
        grad_out: &Tensor<F>,
    ) -> Result<Grads<F>> {
        if grad_out.numel() != self.output_dim {
            return Err(Error::ShapeMismatch(format!(
                "grad_out has {} entries, output_dim is {}",
                grad_out.numel(),
                self.output_dim
            )));
        }
        let mut grads = self.new_grads();
        match (&self.arch, &cache.inner) {
            (
                Arch::Conv {
                    embed,
                    char_input,
                    layer1,
                    layer2,
                },
                CacheInner::Conv {
                    c1,
                    c2,
                    argpos,
                    t_len,
                },
            ) => {
                let sent = if *char_input {
                    q.char_seq
                        .as_ref()
                        .ok_or_else(|| Error::InvalidConfig("question lacks char encoding".into()))?
                } else {
                    self.words_of(q)?
                };
                let g = Tensor::from_vec(&[1, self.output_dim], grad_out.data().to_vec())?;
                let grad_h = kmax_pool_backward(&g, argpos, *t_len, self.output_dim)?;
                let grad_h1 = match (layer2, c2) {
                    (Some(l2), Some(c2)) => {
                        let mut g1 =
                            self.inception_backward(&mut grads, l2, c2, &grad_h, &sent.mask)?;
                        g1.axpy(F::one(), &grad_h);
                        // the forward pass zeroed padded rows of h1
                        zero_masked_rows(&mut g1, &sent.mask);
                        g1
                    }
                    (None, None) => grad_h,
                    _ => return Err(Error::InvalidConfig("stale forward cache".into())),
                };
                let grad_emb =
                    self.inception_backward(&mut grads, layer1, c1, &grad_h1, &sent.mask)?;
                self.embed_back(&mut grads, *embed, &grad_emb, sent)?;
            }
            (
                Arch::DeepResidual { embed, conv0, res },
                CacheInner::DeepResidual {
                    embedded,
                    res_inputs,
                    stage_masks,
                    pools,
                    final_argpos,
                    final_rows,
                },
            ) => {
                let sent = q
                    .char_seq
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("question lacks char encoding".into()))?;
                let channels = self.output_dim;
                let g = Tensor::from_vec(&[1, channels], grad_out.data().to_vec())?;
                let mut grad = kmax_pool_backward(&g, final_argpos, *final_rows, channels)?;
                for (i, r) in res.iter().enumerate().rev() {
                    // the forward pass zeroed padded rows after the residual add
                    zero_masked_rows(&mut grad, &stage_masks[i]);
                    let input = &res_inputs[i];
                    let mut g_in = self.conv_back(&mut grads, *r, &grad, input)?;
                    g_in.axpy(F::one(), &grad);
                    grad = g_in;
                    if i > 0 {
                        let (argpos, rows) = &pools[i - 1];
                        grad = local_max_pool2_backward(&grad, argpos, *rows, channels)?;
                    }
                }
                // and after the stem convolution
                zero_masked_rows(&mut grad, &sent.mask);
                let grad_emb = self.conv_back(&mut grads, *conv0, &grad, embedded)?;
                self.embed_back(&mut grads, *embed, &grad_emb, sent)?;
            }
            (
                Arch::CharWord {
                    word_embed,
                    charcnn,
                    layer,
                },
                CacheInner::CharWord {
                    c_main,
                    char_caches,
                    argpos,
                    t_len,
                },
            ) => {
                let words = self.words_of(q)?;
                let word_chars = q
                    .word_chars
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("question lacks per-word chars".into()))?;
                let g = Tensor::from_vec(&[1, self.output_dim], grad_out.data().to_vec())?;
                let grad_h = kmax_pool_backward(&g, argpos, *t_len, self.output_dim)?;
                let grad_image =
                    self.inception_backward(&mut grads, layer, c_main, &grad_h, &words.mask)?;
                let dw = self.tensor(*word_embed).cols();
                let dc = self.config.charcnn_out;
                for t in 0..words.true_length {
                    let idx = words.indices[t];
                    for c in 0..dw {
                        grads.tensors[*word_embed].add2(idx, c, grad_image.at2(t, c));
                    }
                    let gvec = Tensor::from_vec(
                        &[dc],
                        (0..dc).map(|c| grad_image.at2(t, dw + c)).collect(),
                    )?;
                    self.charcnn_backward(
                        &mut grads,
                        charcnn,
                        &char_caches[t],
                        &word_chars[t],
                        &gvec,
                    )?;
                }
                // rows t >= true_length of the image are structural zeros
            }
            (Arch::FastTextWord { embed }, CacheInner::FastText) => {
                let words = self.words_of(q)?;
                let grad_emb =
                    mean_pool_backward(grad_out, &words.mask, words.indices.len())?;
                self.embed_back(&mut grads, *embed, &grad_emb, words)?;
            }
            (
                Arch::FastTextCharWord {
                    word_embed,
                    char_embed,
                },
                CacheInner::FastText,
            ) => {
                let words = self.words_of(q)?;
                let word_chars = q
                    .word_chars
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("question lacks per-word chars".into()))?;
                let dw = self.tensor(*word_embed).cols();
                let dc = self.tensor(*char_embed).cols();
                let grad_image =
                    mean_pool_backward(grad_out, &words.mask, words.indices.len())?;
                for t in 0..words.true_length {
                    let idx = words.indices[t];
                    for c in 0..dw {
                        grads.tensors[*word_embed].add2(idx, c, grad_image.at2(t, c));
                    }
                    let gchar = Tensor::from_vec(
                        &[dc],
                        (0..dc).map(|c| grad_image.at2(t, dw + c)).collect(),
                    )?;
                    let gc_rows = mean_pool_backward(
                        &gchar,
                        &word_chars[t].mask,
                        word_chars[t].indices.len(),
                    )?;
                    self.embed_back(&mut grads, *char_embed, &gc_rows, &word_chars[t])?;
                }
            }
            _ => return Err(Error::InvalidConfig("forward cache does not match variant".into())),
        }
        grads.respect_frozen(&self.params);
        Ok(grads)
    }
}
