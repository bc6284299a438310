//! Structural properties of the extractors: trailing padding never changes
//! the representation, bag-of-words models ignore word order while
//! convolutional models see it, and a saturated gate passes its content
//! path through unchanged.

use convtext_core::extractor::{EncodedQuestion, Extractor};
use convtext_core::ops::{conv1d_forward, gated_conv_forward, tanh_map, ConvKernel, GateVariant};
use convtext_core::rng::Rng;
use convtext_core::tensor::Tensor;
use convtext_core::vocab::tokenize;
use convtext_core::{CharVocab, ExtractorConfig, Variant, WordVocab};
use proptest::prelude::*;

fn vocabs() -> (WordVocab, CharVocab) {
    let corpus: Vec<Vec<String>> = [
        "is the dog on the chair ?",
        "what color is the cat ?",
        "how many birds fly over the park ?",
    ]
    .iter()
    .map(|s| tokenize(s))
    .collect();
    (
        WordVocab::build(&corpus).unwrap(),
        CharVocab::default_config(),
    )
}

fn extract_padded(
    extractor: &Extractor<f64>,
    tokens: &[String],
    word_vocab: &WordVocab,
    char_vocab: &CharVocab,
    extra: usize,
) -> Tensor<f64> {
    let chars: usize =
        tokens.iter().map(|w| w.chars().count()).sum::<usize>() + tokens.len() - 1;
    let longest = tokens.iter().map(|w| w.chars().count()).max().unwrap();
    let q = EncodedQuestion::encode(
        tokens,
        extractor.config().variant,
        Some(word_vocab),
        Some(char_vocab),
        tokens.len() + extra,
        longest + extra,
        chars + 2 * extra,
    )
    .unwrap();
    extractor.extract(&q).unwrap()
}

#[test]
fn trailing_padding_never_changes_the_representation() {
    let (word_vocab, char_vocab) = vocabs();
    let tokens = tokenize("is the dog on the chair ?");
    for variant in Variant::ALL {
        let config =
            ExtractorConfig::tiny(variant, word_vocab.total_size(), char_vocab.total_size());
        let extractor = Extractor::<f64>::build(config, 17).unwrap();
        let tight = extract_padded(&extractor, &tokens, &word_vocab, &char_vocab, 0);
        for extra in [1, 3, 7] {
            let padded = extract_padded(&extractor, &tokens, &word_vocab, &char_vocab, extra);
            let dist = tight.linf_distance(&padded);
            assert!(
                dist <= 1e-12,
                "{} with {extra} extra pads: L-inf {dist}",
                variant.name()
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn padding_invariance_holds_for_random_sentences(
        word_ids in proptest::collection::vec(0usize..8, 1..9),
        extra in 1usize..6,
        variant_idx in 0usize..Variant::ALL.len(),
    ) {
        let (word_vocab, char_vocab) = vocabs();
        let lexicon = ["is", "the", "dog", "chair", "cat", "park", "color", "?"];
        let tokens: Vec<String> = word_ids.iter().map(|&i| lexicon[i].to_string()).collect();
        let variant = Variant::ALL[variant_idx];
        let config =
            ExtractorConfig::tiny(variant, word_vocab.total_size(), char_vocab.total_size());
        let extractor = Extractor::<f64>::build(config, 23).unwrap();
        let tight = extract_padded(&extractor, &tokens, &word_vocab, &char_vocab, 0);
        let padded = extract_padded(&extractor, &tokens, &word_vocab, &char_vocab, extra);
        prop_assert!(tight.linf_distance(&padded) <= 1e-12);
    }
}

#[test]
fn bag_of_words_models_ignore_order_and_conv_models_do_not() {
    let (word_vocab, char_vocab) = vocabs();
    let forward_tokens = tokenize("is the dog on the chair ?");
    let reversed_tokens = tokenize("is the chair on the dog ?");
    for variant in Variant::ALL {
        let config =
            ExtractorConfig::tiny(variant, word_vocab.total_size(), char_vocab.total_size());
        let extractor = Extractor::<f64>::build(config, 29).unwrap();
        let a = extract_padded(&extractor, &forward_tokens, &word_vocab, &char_vocab, 0);
        let b = extract_padded(&extractor, &reversed_tokens, &word_vocab, &char_vocab, 0);
        let dist = a.linf_distance(&b);
        if variant.is_fasttext() {
            // mean pooling over identical bags gives identical outputs
            assert!(dist <= 1e-12, "{}: L-inf {dist}", variant.name());
        } else if variant.uses_words() {
            // word-reading conv models must tell the two orders apart;
            // char-sequence models are excluded because word-swapped
            // sentences share nearly all character n-grams and global max
            // pooling can land on the shared ones
            assert!(dist > 1e-3, "{}: L-inf {dist}", variant.name());
        }
    }
}

#[test]
fn fasttext_char_word_ignores_any_word_permutation() {
    let (word_vocab, char_vocab) = vocabs();
    let tokens = tokenize("is the dog on the chair ?");
    let mut permuted = tokens.clone();
    permuted.swap(0, 4);
    permuted.swap(2, 5);
    let config = ExtractorConfig::tiny(
        Variant::FastTextCharWord,
        word_vocab.total_size(),
        char_vocab.total_size(),
    );
    let extractor = Extractor::<f64>::build(config, 31).unwrap();
    let a = extract_padded(&extractor, &tokens, &word_vocab, &char_vocab, 0);
    let b = extract_padded(&extractor, &permuted, &word_vocab, &char_vocab, 0);
    assert!(a.linf_distance(&b) <= 1e-12);
}

#[test]
fn saturated_gate_reduces_to_the_content_path() {
    let mut rng = Rng::new(41);
    let mut input = Tensor::zeros(&[6, 3]);
    for x in input.data_mut() {
        *x = rng.uniform(-1.0, 1.0);
    }
    let mut weights = Tensor::zeros(&[3, 3, 4]);
    for x in weights.data_mut() {
        *x = rng.uniform(-1.0, 1.0);
    }
    let mut bias = Tensor::zeros(&[4]);
    for x in bias.data_mut() {
        *x = rng.uniform(-1.0, 1.0);
    }
    let kernel = ConvKernel {
        weights: weights.clone(),
        bias: bias.clone(),
    };
    // zero gate weights and a +20 gate bias drive the sigmoid to 1
    let gate = ConvKernel {
        weights: Tensor::zeros(&[3, 3, 4]),
        bias: Tensor::from_vec(&[4], vec![20.0; 4]).unwrap(),
    };
    let content = conv1d_forward(&input, &weights, &bias).unwrap();

    let linear = gated_conv_forward(&input, &kernel, &gate, GateVariant::Linear).unwrap();
    assert!(linear.linf_distance(&content) <= 1e-6);

    let gated_tanh = gated_conv_forward(&input, &kernel, &gate, GateVariant::Tanh).unwrap();
    assert!(gated_tanh.linf_distance(&tanh_map(&content)) <= 1e-6);
}

#[test]
fn saturated_gate_extractor_matches_the_ungated_extractor() {
    let (word_vocab, char_vocab) = vocabs();
    let tokens = tokenize("is the dog on the chair ?");
    let config = ExtractorConfig::tiny(
        Variant::InceptionGate,
        word_vocab.total_size(),
        char_vocab.total_size(),
    );
    let mut gated = Extractor::<f64>::build(config, 43).unwrap();
    let plain_config = ExtractorConfig::tiny(
        Variant::InceptionWord,
        word_vocab.total_size(),
        char_vocab.total_size(),
    );
    let mut plain = Extractor::<f64>::build(plain_config, 44).unwrap();

    // saturate every gate; copy the shared parameters into the plain model
    for idx in 0..gated.params().len() {
        let name = gated.params().param(idx).name.clone();
        if name.ends_with(".gate_w") {
            gated.params_mut().get_mut(idx).fill(0.0);
        } else if name.ends_with(".gate_b") {
            gated.params_mut().get_mut(idx).fill(20.0);
        } else {
            let source = gated.params().get(idx).clone();
            let target = (0..plain.params().len())
                .find(|&j| plain.params().param(j).name == name)
                .expect("shared parameter name");
            *plain.params_mut().get_mut(target) = source;
        }
    }

    let q = EncodedQuestion::encode(
        &tokens,
        Variant::InceptionWord,
        Some(&word_vocab),
        Some(&char_vocab),
        tokens.len(),
        1,
        1,
    )
    .unwrap();
    let a = gated.extract(&q).unwrap();
    let b = plain.extract(&q).unwrap();
    assert!(a.linf_distance(&b) <= 1e-6);
}
