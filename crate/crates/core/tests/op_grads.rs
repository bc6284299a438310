//! Central finite-difference checks for every differentiable building block.
//!
//! Each op is wrapped in a scalar loss `L = sum_i c_i * out_i` with fixed
//! random coefficients, so the analytic gradient of any op input can be
//! compared entry by entry against `(L(x + eps) - L(x - eps)) / (2 eps)`.

use convtext_core::ops::{
    conv1d_backward, conv1d_forward, embedding_backward, embedding_forward, gated_conv_forward,
    hadamard, kmax_pool_backward, kmax_pool_forward, linear_backward, linear_forward,
    local_max_pool2_backward, local_max_pool2_forward, mean_pool_backward, mean_pool_forward,
    sigmoid, sigmoid_backward, softmax_cross_entropy, tanh_backward, tanh_map, ConvKernel,
    GateVariant,
};
use convtext_core::rng::Rng;
use convtext_core::tensor::Tensor;
use convtext_core::vocab::EncodedSentence;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn random_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = rng.uniform(-1.5, 1.5);
    }
    t
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Weighted-sum loss and its gradient (= the coefficients themselves).
fn loss_of(out: &Tensor<f64>, coeffs: &Tensor<f64>) -> f64 {
    out.data()
        .iter()
        .zip(coeffs.data())
        .map(|(o, c)| o * c)
        .sum()
}

/// Check the analytic gradient of one tensor argument of `f` against central
/// finite differences, where `f` maps the perturbed tensor to the loss.
fn check_grad(
    target: &Tensor<f64>,
    analytic: &Tensor<f64>,
    mut f: impl FnMut(&Tensor<f64>) -> f64,
    what: &str,
) {
    assert_eq!(target.shape(), analytic.shape(), "{what}: gradient shape");
    let mut probe = target.clone();
    for e in 0..probe.numel() {
        let orig = probe.data()[e];
        probe.data_mut()[e] = orig + EPS;
        let plus = f(&probe);
        probe.data_mut()[e] = orig - EPS;
        let minus = f(&probe);
        probe.data_mut()[e] = orig;
        let numeric = (plus - minus) / (2.0 * EPS);
        let err = rel_error(analytic.data()[e], numeric);
        assert!(
            err < TOL,
            "{what}[{e}]: analytic {} vs numeric {numeric} (rel {err})",
            analytic.data()[e]
        );
    }
}

#[test]
fn conv_gradients() {
    let mut rng = Rng::new(1);
    for (t_len, w, c_in, c_out) in [(5, 3, 2, 3), (4, 4, 3, 2), (1, 5, 1, 1), (7, 1, 2, 2)] {
        let input = random_tensor(&mut rng, &[t_len, c_in]);
        let weights = random_tensor(&mut rng, &[w, c_in, c_out]);
        let bias = random_tensor(&mut rng, &[c_out]);
        let coeffs = random_tensor(&mut rng, &[t_len, c_out]);
        let (gi, gw, gb) = conv1d_backward(&coeffs, &input, &weights).unwrap();
        check_grad(
            &input,
            &gi,
            |x| loss_of(&conv1d_forward(x, &weights, &bias).unwrap(), &coeffs),
            "conv input",
        );
        check_grad(
            &weights,
            &gw,
            |wt| loss_of(&conv1d_forward(&input, wt, &bias).unwrap(), &coeffs),
            "conv weights",
        );
        check_grad(
            &bias,
            &gb,
            |b| loss_of(&conv1d_forward(&input, &weights, b).unwrap(), &coeffs),
            "conv bias",
        );
    }
}

#[test]
fn gated_conv_gradients_both_variants() {
    let mut rng = Rng::new(2);
    for variant in [GateVariant::Tanh, GateVariant::Linear] {
        let (t_len, w, c_in, c_out) = (4, 3, 2, 3);
        let input = random_tensor(&mut rng, &[t_len, c_in]);
        let kernel = ConvKernel {
            weights: random_tensor(&mut rng, &[w, c_in, c_out]),
            bias: random_tensor(&mut rng, &[c_out]),
        };
        let gate = ConvKernel {
            weights: random_tensor(&mut rng, &[w, c_in, c_out]),
            bias: random_tensor(&mut rng, &[c_out]),
        };
        let coeffs = random_tensor(&mut rng, &[t_len, c_out]);

        // analytic backward assembled from the primitive backward ops
        let content_pre = conv1d_forward(&input, &kernel.weights, &kernel.bias).unwrap();
        let gate_pre = conv1d_forward(&input, &gate.weights, &gate.bias).unwrap();
        let sig = sigmoid(&gate_pre);
        let act = match variant {
            GateVariant::Tanh => tanh_map(&content_pre),
            GateVariant::Linear => content_pre.clone(),
        };
        let grad_sig = hadamard(&coeffs, &act).unwrap();
        let grad_act = hadamard(&coeffs, &sig).unwrap();
        let grad_gate_pre = sigmoid_backward(&grad_sig, &sig);
        let grad_content_pre = match variant {
            GateVariant::Tanh => tanh_backward(&grad_act, &act),
            GateVariant::Linear => grad_act,
        };
        let (gi_c, gw_c, gb_c) = conv1d_backward(&grad_content_pre, &input, &kernel.weights).unwrap();
        let (gi_g, gw_g, gb_g) = conv1d_backward(&grad_gate_pre, &input, &gate.weights).unwrap();
        let gi = gi_c.add(&gi_g).unwrap();

        let forward = |input: &Tensor<f64>, kw: &Tensor<f64>, kb: &Tensor<f64>, gw: &Tensor<f64>, gb: &Tensor<f64>| {
            let k = ConvKernel { weights: kw.clone(), bias: kb.clone() };
            let g = ConvKernel { weights: gw.clone(), bias: gb.clone() };
            loss_of(&gated_conv_forward(input, &k, &g, variant).unwrap(), &coeffs)
        };
        check_grad(&input, &gi, |x| forward(x, &kernel.weights, &kernel.bias, &gate.weights, &gate.bias), "gated input");
        check_grad(&kernel.weights, &gw_c, |w| forward(&input, w, &kernel.bias, &gate.weights, &gate.bias), "gated content weights");
        check_grad(&kernel.bias, &gb_c, |b| forward(&input, &kernel.weights, b, &gate.weights, &gate.bias), "gated content bias");
        check_grad(&gate.weights, &gw_g, |w| forward(&input, &kernel.weights, &kernel.bias, w, &gate.bias), "gate weights");
        check_grad(&gate.bias, &gb_g, |b| forward(&input, &kernel.weights, &kernel.bias, &gate.weights, b), "gate bias");
    }
}

#[test]
fn kmax_pool_gradient() {
    let mut rng = Rng::new(3);
    let input = random_tensor(&mut rng, &[7, 3]);
    let mask = vec![true, true, false, true, true, true, false];
    let k = 3;
    let coeffs = random_tensor(&mut rng, &[k, 3]);
    let (_, pos) = kmax_pool_forward(&input, k, &mask).unwrap();
    let grad = kmax_pool_backward(&coeffs, &pos, 7, 3).unwrap();
    check_grad(
        &input,
        &grad,
        |x| loss_of(&kmax_pool_forward(x, k, &mask).unwrap().0, &coeffs),
        "kmax input",
    );
}

#[test]
fn local_max_pool_gradient() {
    let mut rng = Rng::new(4);
    let input = random_tensor(&mut rng, &[6, 2]);
    let mask = vec![true, true, true, false, true, true];
    let coeffs = random_tensor(&mut rng, &[3, 2]);
    let (_, _, pos) = local_max_pool2_forward(&input, &mask).unwrap();
    let grad = local_max_pool2_backward(&coeffs, &pos, 6, 2).unwrap();
    check_grad(
        &input,
        &grad,
        |x| loss_of(&local_max_pool2_forward(x, &mask).unwrap().0, &coeffs),
        "local max input",
    );
}

#[test]
fn mean_pool_gradient() {
    let mut rng = Rng::new(5);
    let input = random_tensor(&mut rng, &[5, 4]);
    let mask = vec![true, false, true, true, false];
    let coeffs = random_tensor(&mut rng, &[4]);
    let grad = mean_pool_backward(&coeffs, &mask, 5).unwrap();
    check_grad(
        &input,
        &grad,
        |x| loss_of(&mean_pool_forward(x, &mask).unwrap(), &coeffs),
        "mean pool input",
    );
}

#[test]
fn linear_gradients() {
    let mut rng = Rng::new(6);
    let x = random_tensor(&mut rng, &[5]);
    let w = random_tensor(&mut rng, &[5, 3]);
    let b = random_tensor(&mut rng, &[3]);
    let coeffs = random_tensor(&mut rng, &[3]);
    let (gx, gw, gb) = linear_backward(&coeffs, &x, &w).unwrap();
    check_grad(&x, &gx, |x| loss_of(&linear_forward(x, &w, &b).unwrap(), &coeffs), "linear x");
    check_grad(&w, &gw, |w| loss_of(&linear_forward(&x, w, &b).unwrap(), &coeffs), "linear W");
    check_grad(&b, &gb, |b| loss_of(&linear_forward(&x, &w, b).unwrap(), &coeffs), "linear b");
}

#[test]
fn softmax_cross_entropy_gradient() {
    let mut rng = Rng::new(7);
    for label in 0..4 {
        let logits = random_tensor(&mut rng, &[4]);
        let (_, grad) = softmax_cross_entropy(&logits, label).unwrap();
        check_grad(
            &logits,
            &grad,
            |z| softmax_cross_entropy(z, label).unwrap().0,
            "softmax logits",
        );
    }
}

#[test]
fn embedding_gradient_accumulates_repeated_indices() {
    let mut rng = Rng::new(8);
    let table = random_tensor(&mut rng, &[6, 3]);
    let sentence = EncodedSentence {
        indices: vec![2, 4, 2, 0],
        true_length: 4,
        mask: vec![true; 4],
    };
    let coeffs = random_tensor(&mut rng, &[4, 3]);
    let grad = embedding_backward(&coeffs, &sentence, 6, 3).unwrap();
    check_grad(
        &table,
        &grad,
        |t| loss_of(&embedding_forward(t, &sentence).unwrap(), &coeffs),
        "embedding table",
    );
}
