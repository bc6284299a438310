//! k-max pooling against a sort-based reference, including masks, ties, and
//! the short-sequence sentinel behavior.

use convtext_core::ops::{kmax_pool_backward, kmax_pool_forward};
use convtext_core::rng::Rng;
use convtext_core::tensor::Tensor;

/// Reference: stable sort of (value, position) pairs per channel.
fn kmax_reference(input: &Tensor<f64>, k: usize, mask: &[bool]) -> (Tensor<f64>, Vec<usize>) {
    let channels = input.cols();
    let mut out = Tensor::zeros(&[k, channels]);
    let mut argpos = vec![usize::MAX; k * channels];
    for c in 0..channels {
        let mut pairs: Vec<(usize, f64)> = (0..input.rows())
            .filter(|&t| mask[t])
            .map(|t| (t, input.at2(t, c)))
            .collect();
        // stable sort by descending value keeps earliest positions first on ties
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        pairs.truncate(k);
        pairs.sort_by_key(|&(t, _)| t);
        for (slot, (t, v)) in pairs.into_iter().enumerate() {
            out.set2(slot, c, v);
            argpos[slot * channels + c] = t;
        }
    }
    (out, argpos)
}

#[test]
fn matches_reference_on_200_random_cases() {
    let mut rng = Rng::new(99);
    for case in 0..200 {
        let t_len = 1 + rng.below(12);
        let channels = 1 + rng.below(5);
        let k = 1 + rng.below(6);
        let mut input = Tensor::zeros(&[t_len, channels]);
        for x in input.data_mut() {
            // small discrete value set forces frequent ties
            *x = (rng.below(7) as f64) - 3.0;
        }
        let mut mask: Vec<bool> = (0..t_len).map(|_| rng.below(4) != 0).collect();
        if !mask.iter().any(|&m| m) {
            mask[rng.below(t_len)] = true;
        }
        let (got, got_pos) = kmax_pool_forward(&input, k, &mask).unwrap();
        let (want, want_pos) = kmax_reference(&input, k, &mask);
        assert_eq!(got.shape(), want.shape(), "case {case}");
        let dist = got.linf_distance(&want);
        assert!(dist <= 1e-12, "case {case}: L-inf {dist}");
        assert_eq!(got_pos, want_pos, "case {case}: positions differ");
    }
}

#[test]
fn selected_values_keep_sequence_order() {
    let input = Tensor::from_vec(&[5, 1], vec![3.0, 9.0, 1.0, 7.0, 5.0]).unwrap();
    let mask = vec![true; 5];
    let (out, pos) = kmax_pool_forward(&input, 3, &mask).unwrap();
    // top 3 are 9 (t=1), 7 (t=3), 5 (t=4) and must appear in that order
    assert_eq!(out.data(), &[9.0, 7.0, 5.0]);
    assert_eq!(pos, vec![1, 3, 4]);
}

#[test]
fn ties_go_to_earliest_position() {
    let input = Tensor::from_vec(&[4, 1], vec![5.0, 5.0, 5.0, 5.0]).unwrap();
    let mask = vec![true; 4];
    let (_, pos) = kmax_pool_forward(&input, 2, &mask).unwrap();
    assert_eq!(pos, vec![0, 1]);
}

#[test]
fn short_sequences_leave_zero_slots_with_sentinel() {
    let input = Tensor::from_vec(&[2, 1], vec![4.0, -1.0]).unwrap();
    let mask = vec![true, true];
    let (out, pos) = kmax_pool_forward(&input, 4, &mask).unwrap();
    assert_eq!(out.data(), &[4.0, -1.0, 0.0, 0.0]);
    assert_eq!(pos, vec![0, 1, usize::MAX, usize::MAX]);
}

#[test]
fn masked_positions_are_never_selected() {
    let input = Tensor::from_vec(&[4, 1], vec![100.0, 1.0, 2.0, 3.0]).unwrap();
    let mask = vec![false, true, true, true];
    let (out, pos) = kmax_pool_forward(&input, 2, &mask).unwrap();
    assert_eq!(out.data(), &[2.0, 3.0]);
    assert_eq!(pos, vec![2, 3]);
}

#[test]
fn backward_routes_gradients_to_selected_positions_only() {
    let input = Tensor::from_vec(&[5, 2], vec![
        3.0, 0.0, //
        9.0, 5.0, //
        1.0, 5.0, //
        7.0, 2.0, //
        5.0, 1.0,
    ])
    .unwrap();
    let mask = vec![true; 5];
    let (_, pos) = kmax_pool_forward(&input, 2, &mask).unwrap();
    let grad_out = Tensor::from_vec(&[2, 2], vec![1.0, 10.0, 2.0, 20.0]).unwrap();
    let grad_in = kmax_pool_backward(&grad_out, &pos, 5, 2).unwrap();
    // channel 0 selects t=1, t=3; channel 1 selects t=1, t=2 (tie to earliest)
    let mut want = Tensor::zeros(&[5, 2]);
    want.set2(1, 0, 1.0);
    want.set2(3, 0, 2.0);
    want.set2(1, 1, 10.0);
    want.set2(2, 1, 20.0);
    assert!(grad_in.linf_distance(&want) <= 1e-12);
}
