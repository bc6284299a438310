//! Forward/backward kernel pairs.
//!
//! Every operation is a pure function of its inputs; backward passes are
//! written out explicitly (no tape) and are verified against central finite
//! differences in the tests. Sequences are 2-D tensors `[T, channels]`;
//! convolution kernels are `[width, c_in, c_out]` with an implicit height of 1.
//!
//! Convolutions use "same" zero padding with stride 1, so the output length
//! always equals the input length and the sentence mask stays valid. Padded
//! positions are convolved over and excluded later at the pooling stage; the
//! pooling mask is the single source of length truth.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::{real, Real};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::vocab::EncodedSentence;

/// A 1-D convolution kernel: `weights` is `[width, c_in, c_out]`, `bias` is `[c_out]`.
#[derive(Debug, Clone)]
pub struct ConvKernel<F> {
    pub weights: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Real> ConvKernel<F> {
    pub fn width(&self) -> usize {
        self.weights.shape()[0]
    }
    pub fn c_in(&self) -> usize {
        self.weights.shape()[1]
    }
    pub fn c_out(&self) -> usize {
        self.weights.shape()[2]
    }
}

/// Which content activation a gated convolution applies: tanh on the content
/// path, or none (linear).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateVariant {
    Tanh,
    Linear,
}

// ---------------------------------------------------------------------------
// embedding
// ---------------------------------------------------------------------------

/// Look up one table row per sentence position: out is `[T, d]`.
pub fn embedding_forward<F: Real>(
    table: &Tensor<F>,
    sentence: &EncodedSentence,
) -> Result<Tensor<F>> {
    let rows = table.rows();
    let d = table.cols();
    let t_len = sentence.indices.len();
    let mut out = Tensor::zeros(&[t_len, d]);
    for (t, &idx) in sentence.indices.iter().enumerate() {
        if idx >= rows {
            return Err(Error::IndexOutOfRange { index: idx, bound: rows });
        }
        for c in 0..d {
            out.set2(t, c, table.at2(idx, c));
        }
    }
    Ok(out)
}

/// Scatter-add: repeated indices accumulate their gradient rows.
pub fn embedding_backward<F: Real>(
    grad_out: &Tensor<F>,
    sentence: &EncodedSentence,
    table_rows: usize,
    table_cols: usize,
) -> Result<Tensor<F>> {
    if grad_out.rows() != sentence.indices.len() || grad_out.cols() != table_cols {
        return Err(Error::ShapeMismatch(format!(
            "embedding_backward: grad {:?} vs T={} d={}",
            grad_out.shape(),
            sentence.indices.len(),
            table_cols
        )));
    }
    let mut grad_table = Tensor::zeros(&[table_rows, table_cols]);
    for (t, &idx) in sentence.indices.iter().enumerate() {
        if idx >= table_rows {
            return Err(Error::IndexOutOfRange { index: idx, bound: table_rows });
        }
        for c in 0..table_cols {
            grad_table.add2(idx, c, grad_out.at2(t, c));
        }
    }
    Ok(grad_table)
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

/// "Same" zero-padded 1-D convolution, stride 1.
///
/// `out[t, o] = bias[o] + sum_{j, i} in[t + j - floor(w/2), i] * W[j, i, o]`
/// with zero contributions outside the input bounds.
pub fn conv1d_forward<F: Real>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<Tensor<F>> {
    let t_len = input.rows();
    let c_in = input.cols();
    let (w, k_in, c_out) = (weights.shape()[0], weights.shape()[1], weights.shape()[2]);
    if k_in != c_in {
        return Err(Error::ShapeMismatch(format!(
            "conv1d: input has {c_in} channels, kernel expects {k_in}"
        )));
    }
    if bias.numel() != c_out {
        return Err(Error::ShapeMismatch(format!(
            "conv1d: bias has {} entries, kernel outputs {c_out}",
            bias.numel()
        )));
    }
    let offset = (w / 2) as isize;
    let mut out = Tensor::zeros(&[t_len, c_out]);
    for t in 0..t_len {
        for o in 0..c_out {
            let mut acc = bias.data()[o];
            for j in 0..w {
                let pos = t as isize + j as isize - offset;
                if pos < 0 || pos >= t_len as isize {
                    continue;
                }
                let pos = pos as usize;
                for i in 0..c_in {
                    acc = acc + input.at2(pos, i) * weights.at3(j, i, o);
                }
            }
            out.set2(t, o, acc);
        }
    }
    Ok(out)
}

/// Gradients of [`conv1d_forward`] w.r.t. input, weights, and bias.
pub fn conv1d_backward<F: Real>(
    grad_out: &Tensor<F>,
    input: &Tensor<F>,
    weights: &Tensor<F>,
) -> Result<(Tensor<F>, Tensor<F>, Tensor<F>)> {
    let t_len = input.rows();
    let c_in = input.cols();
    let (w, k_in, c_out) = (weights.shape()[0], weights.shape()[1], weights.shape()[2]);
    if k_in != c_in || grad_out.rows() != t_len || grad_out.cols() != c_out {
        return Err(Error::ShapeMismatch(format!(
            "conv1d_backward: grad {:?}, input {:?}, weights {:?}",
            grad_out.shape(),
            input.shape(),
            weights.shape()
        )));
    }
    let offset = (w / 2) as isize;
    let mut grad_input = Tensor::zeros(&[t_len, c_in]);
    let mut grad_weights = Tensor::zeros(&[w, c_in, c_out]);
    let mut grad_bias = Tensor::zeros(&[c_out]);
    for t in 0..t_len {
        for o in 0..c_out {
            let g = grad_out.at2(t, o);
            grad_bias.data_mut()[o] = grad_bias.data_mut()[o] + g;
            for j in 0..w {
                let pos = t as isize + j as isize - offset;
                if pos < 0 || pos >= t_len as isize {
                    continue;
                }
                let pos = pos as usize;
                for i in 0..c_in {
                    grad_input.add2(pos, i, g * weights.at3(j, i, o));
                    let idx = (j * c_in + i) * c_out + o;
                    grad_weights.data_mut()[idx] = grad_weights.data_mut()[idx] + g * input.at2(pos, i);
                }
            }
        }
    }
    Ok((grad_input, grad_weights, grad_bias))
}

// ---------------------------------------------------------------------------
// elementwise activations
// ---------------------------------------------------------------------------

pub fn sigmoid<F: Real>(input: &Tensor<F>) -> Tensor<F> {
    input.map(|x| F::one() / (F::one() + (-x).exp()))
}

pub fn tanh_map<F: Real>(input: &Tensor<F>) -> Tensor<F> {
    input.map(|x| x.tanh())
}

/// Backward through sigmoid, given the *forward output* `sig`.
pub fn sigmoid_backward<F: Real>(grad_out: &Tensor<F>, sig: &Tensor<F>) -> Tensor<F> {
    let mut g = grad_out.clone();
    for (g, &s) in g.data_mut().iter_mut().zip(sig.data()) {
        *g = *g * s * (F::one() - s);
    }
    g
}

/// Backward through tanh, given the *forward output* `th`.
pub fn tanh_backward<F: Real>(grad_out: &Tensor<F>, th: &Tensor<F>) -> Tensor<F> {
    let mut g = grad_out.clone();
    for (g, &t) in g.data_mut().iter_mut().zip(th.data()) {
        *g = *g * (F::one() - t * t);
    }
    g
}

/// Elementwise product.
pub fn hadamard<F: Real>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "hadamard {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = a.clone();
    for (o, &x) in out.data_mut().iter_mut().zip(b.data()) {
        *o = *o * x;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// gated convolution
// ---------------------------------------------------------------------------

/// Gated convolution: `O = sigmoid(Kg * I + bg) .* act(K * I + b)` where the
/// content activation is tanh or identity depending on `variant`.
pub fn gated_conv_forward<F: Real>(
    input: &Tensor<F>,
    kernel: &ConvKernel<F>,
    gate_kernel: &ConvKernel<F>,
    variant: GateVariant,
) -> Result<Tensor<F>> {
    if kernel.width() != gate_kernel.width() || kernel.c_out() != gate_kernel.c_out() {
        return Err(Error::ShapeMismatch(format!(
            "gated conv: kernel {:?} vs gate {:?}",
            kernel.weights.shape(),
            gate_kernel.weights.shape()
        )));
    }
    let content = conv1d_forward(input, &kernel.weights, &kernel.bias)?;
    let gate = sigmoid(&conv1d_forward(input, &gate_kernel.weights, &gate_kernel.bias)?);
    let activated = match variant {
        GateVariant::Tanh => tanh_map(&content),
        GateVariant::Linear => content,
    };
    hadamard(&gate, &activated)
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

/// Positions selected by a pooling forward pass, used to route gradients.
/// `usize::MAX` marks an output slot with no source (fewer candidates than k).
pub type ArgPositions = Vec<usize>;

fn check_mask<F: Real>(input: &Tensor<F>, mask: &[bool]) -> Result<()> {
    if mask.len() != input.rows() {
        return Err(Error::ShapeMismatch(format!(
            "mask length {} vs sequence length {}",
            mask.len(),
            input.rows()
        )));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::FullyMasked);
    }
    Ok(())
}

/// Per channel: the k largest values among unmasked positions, emitted in
/// their original sequence order. Ties go to the earliest position. Slots
/// beyond the number of unmasked positions are zero.
pub fn kmax_pool_forward<F: Real>(
    input: &Tensor<F>,
    k: usize,
    mask: &[bool],
) -> Result<(Tensor<F>, ArgPositions)> {
    if k < 1 {
        return Err(Error::InvalidK);
    }
    check_mask(input, mask)?;
    let channels = input.cols();
    let mut out = Tensor::zeros(&[k, channels]);
    let mut argpos = vec![usize::MAX; k * channels];
    let mut candidates: Vec<(usize, F)> = Vec::with_capacity(input.rows());
    for c in 0..channels {
        candidates.clear();
        for t in 0..input.rows() {
            if mask[t] {
                candidates.push((t, input.at2(t, c)));
            }
        }
        // value descending, position ascending on ties
        candidates.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        let mut selected: Vec<(usize, F)> = candidates.iter().take(k).copied().collect();
        selected.sort_by_key(|&(pos, _)| pos);
        for (slot, &(pos, val)) in selected.iter().enumerate() {
            out.set2(slot, c, val);
            argpos[slot * channels + c] = pos;
        }
    }
    Ok((out, argpos))
}

/// Scatter gradients back to the positions the forward pass selected.
pub fn kmax_pool_backward<F: Real>(
    grad_out: &Tensor<F>,
    argpos: &ArgPositions,
    input_rows: usize,
    input_cols: usize,
) -> Result<Tensor<F>> {
    let k = grad_out.rows();
    if grad_out.cols() != input_cols || argpos.len() != k * input_cols {
        return Err(Error::ShapeMismatch(format!(
            "kmax_pool_backward: grad {:?}, argpos {}, cols {}",
            grad_out.shape(),
            argpos.len(),
            input_cols
        )));
    }
    let mut grad_input = Tensor::zeros(&[input_rows, input_cols]);
    for slot in 0..k {
        for c in 0..input_cols {
            let pos = argpos[slot * input_cols + c];
            if pos == usize::MAX {
                continue;
            }
            if pos >= input_rows {
                return Err(Error::IndexOutOfRange { index: pos, bound: input_rows });
            }
            grad_input.add2(pos, c, grad_out.at2(slot, c));
        }
    }
    Ok(grad_input)
}

/// Local max pooling with window 2, stride 2, honoring the mask.
///
/// Output length is `ceil(T/2)`; an output position is masked iff both window
/// positions are masked (its value is then zero and routes no gradient).
pub fn local_max_pool2_forward<F: Real>(
    input: &Tensor<F>,
    mask: &[bool],
) -> Result<(Tensor<F>, Vec<bool>, ArgPositions)> {
    check_mask(input, mask)?;
    let t_len = input.rows();
    let channels = input.cols();
    let out_len = t_len.div_ceil(2);
    let mut out = Tensor::zeros(&[out_len, channels]);
    let mut out_mask = vec![false; out_len];
    let mut argpos = vec![usize::MAX; out_len * channels];
    for s in 0..out_len {
        let window: Vec<usize> = (2 * s..(2 * s + 2).min(t_len)).filter(|&t| mask[t]).collect();
        if window.is_empty() {
            continue;
        }
        out_mask[s] = true;
        for c in 0..channels {
            let mut best = window[0];
            for &t in &window[1..] {
                if input.at2(t, c) > input.at2(best, c) {
                    best = t;
                }
            }
            out.set2(s, c, input.at2(best, c));
            argpos[s * channels + c] = best;
        }
    }
    Ok((out, out_mask, argpos))
}

pub fn local_max_pool2_backward<F: Real>(
    grad_out: &Tensor<F>,
    argpos: &ArgPositions,
    input_rows: usize,
    input_cols: usize,
) -> Result<Tensor<F>> {
    kmax_pool_backward(grad_out, argpos, input_rows, input_cols)
}

/// Zero every row whose mask entry is false. Applied between stacked
/// convolutions so padded positions carry no bias term into the next layer;
/// the same call zeroes the corresponding gradient rows in the backward pass.
pub fn zero_masked_rows<F: Real>(t: &mut Tensor<F>, mask: &[bool]) {
    let cols = t.cols();
    for (r, &m) in mask.iter().enumerate() {
        if !m {
            for c in 0..cols {
                t.set2(r, c, F::zero());
            }
        }
    }
}

/// Per-channel mean over unmasked positions only; output is `[channels]`.
pub fn mean_pool_forward<F: Real>(input: &Tensor<F>, mask: &[bool]) -> Result<Tensor<F>> {
    check_mask(input, mask)?;
    let channels = input.cols();
    let count = mask.iter().filter(|&&m| m).count();
    let inv = F::one() / real::<F>(count as f64);
    let mut out = Tensor::zeros(&[channels]);
    for t in 0..input.rows() {
        if !mask[t] {
            continue;
        }
        for c in 0..channels {
            out.data_mut()[c] = out.data()[c] + input.at2(t, c) * inv;
        }
    }
    Ok(out)
}

pub fn mean_pool_backward<F: Real>(
    grad_out: &Tensor<F>,
    mask: &[bool],
    input_rows: usize,
) -> Result<Tensor<F>> {
    let channels = grad_out.numel();
    if mask.len() != input_rows {
        return Err(Error::ShapeMismatch(format!(
            "mean_pool_backward: mask {} vs rows {}",
            mask.len(),
            input_rows
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::FullyMasked);
    }
    let inv = F::one() / real::<F>(count as f64);
    let mut grad_input = Tensor::zeros(&[input_rows, channels]);
    for t in 0..input_rows {
        if !mask[t] {
            continue;
        }
        for c in 0..channels {
            grad_input.set2(t, c, grad_out.data()[c] * inv);
        }
    }
    Ok(grad_input)
}

// ---------------------------------------------------------------------------
// concatenation
// ---------------------------------------------------------------------------

/// Concatenate along the channel axis; all parts must share the other dims.
pub fn concat_channels<F: Real>(parts: &[&Tensor<F>]) -> Result<Tensor<F>> {
    if parts.is_empty() {
        return Err(Error::ShapeMismatch("concat of zero parts".into()));
    }
    match parts[0].shape().len() {
        1 => {
            let total: usize = parts.iter().map(|p| p.numel()).sum();
            let mut data = Vec::with_capacity(total);
            for p in parts {
                data.extend_from_slice(p.data());
            }
            Tensor::from_vec(&[total], data)
        }
        2 => {
            let rows = parts[0].rows();
            for p in parts {
                if p.rows() != rows {
                    return Err(Error::ShapeMismatch(format!(
                        "concat: {} rows vs {} rows",
                        p.rows(),
                        rows
                    )));
                }
            }
            let total: usize = parts.iter().map(|p| p.cols()).sum();
            let mut out = Tensor::zeros(&[rows, total]);
            for r in 0..rows {
                let mut offset = 0;
                for p in parts {
                    for c in 0..p.cols() {
                        out.set2(r, offset + c, p.at2(r, c));
                    }
                    offset += p.cols();
                }
            }
            Ok(out)
        }
        n => Err(Error::ShapeMismatch(format!("concat of rank-{n} tensors"))),
    }
}

/// Split a channel-concatenated gradient back into per-part gradients.
pub fn split_channels<F: Real>(grad: &Tensor<F>, sizes: &[usize]) -> Result<Vec<Tensor<F>>> {
    let total: usize = sizes.iter().sum();
    match grad.shape().len() {
        1 => {
            if grad.numel() != total {
                return Err(Error::ShapeMismatch(format!(
                    "split: {} channels into {total}",
                    grad.numel()
                )));
            }
            let mut out = Vec::new();
            let mut offset = 0;
            for &s in sizes {
                out.push(Tensor::from_vec(&[s], grad.data()[offset..offset + s].to_vec())?);
                offset += s;
            }
            Ok(out)
        }
        2 => {
            if grad.cols() != total {
                return Err(Error::ShapeMismatch(format!(
                    "split: {} channels into {total}",
                    grad.cols()
                )));
            }
            let rows = grad.rows();
            let mut out = Vec::new();
            let mut offset = 0;
            for &s in sizes {
                let mut part = Tensor::zeros(&[rows, s]);
                for r in 0..rows {
                    for c in 0..s {
                        part.set2(r, c, grad.at2(r, offset + c));
                    }
                }
                out.push(part);
                offset += s;
            }
            Ok(out)
        }
        n => Err(Error::ShapeMismatch(format!("split of rank-{n} tensor"))),
    }
}

// ---------------------------------------------------------------------------
// classifier head pieces
// ---------------------------------------------------------------------------

/// Affine map: `out = x W + b` with `x: [n]`, `W: [n, m]`, `b: [m]`.
pub fn linear_forward<F: Real>(
    x: &Tensor<F>,
    weights: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<Tensor<F>> {
    let n = x.numel();
    if weights.rows() != n || weights.cols() != bias.numel() {
        return Err(Error::ShapeMismatch(format!(
            "linear: x[{n}] W{:?} b[{}]",
            weights.shape(),
            bias.numel()
        )));
    }
    let m = weights.cols();
    let mut out = Tensor::zeros(&[m]);
    for o in 0..m {
        let mut acc = bias.data()[o];
        for i in 0..n {
            acc = acc + x.data()[i] * weights.at2(i, o);
        }
        out.data_mut()[o] = acc;
    }
    Ok(out)
}

pub fn linear_backward<F: Real>(
    grad_out: &Tensor<F>,
    x: &Tensor<F>,
    weights: &Tensor<F>,
) -> Result<(Tensor<F>, Tensor<F>, Tensor<F>)> {
    let n = x.numel();
    let m = grad_out.numel();
    if weights.rows() != n || weights.cols() != m {
        return Err(Error::ShapeMismatch(format!(
            "linear_backward: x[{n}] W{:?} g[{m}]",
            weights.shape()
        )));
    }
    let mut grad_x = Tensor::zeros(&[n]);
    let mut grad_w = Tensor::zeros(&[n, m]);
    for i in 0..n {
        let mut acc = F::zero();
        for o in 0..m {
            acc = acc + grad_out.data()[o] * weights.at2(i, o);
            grad_w.set2(i, o, x.data()[i] * grad_out.data()[o]);
        }
        grad_x.data_mut()[i] = acc;
    }
    Ok((grad_x, grad_w, grad_out.clone()))
}

/// Numerically stabilized softmax cross-entropy; returns the loss and the
/// gradient w.r.t. the logits (`softmax - onehot`).
pub fn softmax_cross_entropy<F: Real>(logits: &Tensor<F>, label: usize) -> Result<(F, Tensor<F>)> {
    let n = logits.numel();
    if label >= n {
        return Err(Error::LabelOutOfRange { label, classes: n });
    }
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for &z in logits.data() {
        sum = sum + (z - max).exp();
    }
    let log_sum = sum.ln() + max;
    let loss = log_sum - logits.data()[label];
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss".into()));
    }
    let mut grad = logits.map(|z| (z - log_sum).exp());
    grad.data_mut()[label] = grad.data()[label] - F::one();
    Ok((loss, grad))
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

/// Inverted dropout: in training, zero each entry with probability `rate` and
/// scale survivors by `1/(1-rate)`; in evaluation, identity.
pub fn dropout_forward<F: Real>(
    input: &Tensor<F>,
    rate: f64,
    rng: &mut Rng,
    training: bool,
) -> Result<(Tensor<F>, Vec<bool>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate(format!("dropout rate {rate} not in [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((input.clone(), vec![true; input.numel()]));
    }
    let scale = real::<F>(1.0 / (1.0 - rate));
    let mut out = input.clone();
    let mut keep = vec![true; input.numel()];
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        if rng.next_f64() < rate {
            *v = F::zero();
            keep[i] = false;
        } else {
            *v = *v * scale;
        }
    }
    Ok((out, keep))
}

pub fn dropout_backward<F: Real>(
    grad_out: &Tensor<F>,
    keep: &[bool],
    rate: f64,
) -> Result<Tensor<F>> {
    if keep.len() != grad_out.numel() {
        return Err(Error::ShapeMismatch("dropout keep mask length".into()));
    }
    let scale = real::<F>(1.0 / (1.0 - rate));
    let mut grad = grad_out.clone();
    for (i, g) in grad.data_mut().iter_mut().enumerate() {
        *g = if keep[i] { *g * scale } else { F::zero() };
    }
    Ok(grad)
}
