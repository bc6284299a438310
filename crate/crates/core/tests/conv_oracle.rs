//! Exhaustive comparison of the convolution against an independently written
//! brute-force reference that pads the input explicitly.

use convtext_core::ops::conv1d_forward;
use convtext_core::rng::Rng;
use convtext_core::tensor::Tensor;

/// Reference: materialize a zero-padded copy of the input, then correlate.
fn conv_reference(
    input: &Tensor<f64>,
    weights: &Tensor<f64>,
    bias: &Tensor<f64>,
) -> Tensor<f64> {
    let t_len = input.rows();
    let c_in = input.cols();
    let (w, _, c_out) = (weights.shape()[0], weights.shape()[1], weights.shape()[2]);
    let left = w / 2;
    // padded[t] corresponds to input[t - left]
    let padded_len = t_len + w; // generous; extra rows stay zero
    let mut padded = vec![vec![0.0f64; c_in]; padded_len];
    for t in 0..t_len {
        for i in 0..c_in {
            padded[t + left][i] = input.at2(t, i);
        }
    }
    let mut out = Tensor::zeros(&[t_len, c_out]);
    for t in 0..t_len {
        for o in 0..c_out {
            let mut acc = bias.data()[o];
            for j in 0..w {
                for i in 0..c_in {
                    acc += padded[t + j][i] * weights.at3(j, i, o);
                }
            }
            out.set2(t, o, acc);
        }
    }
    out
}

fn random_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = rng.uniform(-2.0, 2.0);
    }
    t
}

#[test]
fn conv_matches_brute_force_over_all_small_shapes() {
    let mut rng = Rng::new(42);
    let mut cases = 0usize;
    for t_len in 1..=8 {
        for w in 1..=5 {
            for c_in in 1..=4 {
                for c_out in 1..=4 {
                    let input = random_tensor(&mut rng, &[t_len, c_in]);
                    let weights = random_tensor(&mut rng, &[w, c_in, c_out]);
                    let bias = random_tensor(&mut rng, &[c_out]);
                    let got = conv1d_forward(&input, &weights, &bias).unwrap();
                    let want = conv_reference(&input, &weights, &bias);
                    assert_eq!(got.shape(), want.shape());
                    let dist = got.linf_distance(&want);
                    assert!(
                        dist <= 1e-12,
                        "T={t_len} w={w} c_in={c_in} c_out={c_out}: L-inf {dist}"
                    );
                    cases += 1;
                }
            }
        }
    }
    assert_eq!(cases, 8 * 5 * 4 * 4);
}

#[test]
fn width_one_conv_is_a_pointwise_linear_map() {
    let mut rng = Rng::new(7);
    let input = random_tensor(&mut rng, &[6, 3]);
    let weights = random_tensor(&mut rng, &[1, 3, 2]);
    let bias = random_tensor(&mut rng, &[2]);
    let out = conv1d_forward(&input, &weights, &bias).unwrap();
    for t in 0..6 {
        for o in 0..2 {
            let mut want = bias.data()[o];
            for i in 0..3 {
                want += input.at2(t, i) * weights.at3(0, i, o);
            }
            assert!((out.at2(t, o) - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn even_width_uses_floor_offset() {
    // w = 2, offset floor(2/2) = 1: out[t] = b + in[t-1]*W[0] + in[t]*W[1]
    let input = Tensor::from_vec(&[3, 1], vec![1.0, 10.0, 100.0]).unwrap();
    let weights = Tensor::from_vec(&[2, 1, 1], vec![1.0, 2.0]).unwrap();
    let bias = Tensor::from_vec(&[1], vec![0.0]).unwrap();
    let out = conv1d_forward(&input, &weights, &bias).unwrap();
    assert_eq!(out.data(), &[2.0, 21.0, 210.0]);
}
