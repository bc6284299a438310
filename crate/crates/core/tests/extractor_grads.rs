//! End-to-end gradient verification: every extractor variant, with the
//! classifier head on top, against central finite differences at reduced
//! dimensions, plus a sign-flip negative control.

use convtext_core::extractor::{EncodedQuestion, Extractor};
use convtext_core::train::grad_check;
use convtext_core::vocab::tokenize;
use convtext_core::{CharVocab, Classifier, ExtractorConfig, Variant, WordVocab};

fn vocabs() -> (WordVocab, CharVocab) {
    let corpus: Vec<Vec<String>> = [
        "is the dog on the mat ?",
        "what color is the cat ?",
        "how many birds are there ?",
    ]
    .iter()
    .map(|s| tokenize(s))
    .collect();
    (
        WordVocab::build(&corpus).unwrap(),
        CharVocab::default_config(),
    )
}

fn encode(variant: Variant, word_vocab: &WordVocab, char_vocab: &CharVocab) -> EncodedQuestion {
    let tokens = tokenize("is the dog on the mat ?");
    // targets kept small so every tensor stays within the reduced dims
    EncodedQuestion::encode(
        &tokens,
        variant,
        Some(word_vocab),
        Some(char_vocab),
        6,
        5,
        24,
    )
    .unwrap()
}

#[test]
fn every_variant_passes_finite_difference_check_on_three_seeds() {
    let (word_vocab, char_vocab) = vocabs();
    for variant in Variant::ALL {
        let config = ExtractorConfig::tiny(
            variant,
            word_vocab.total_size(),
            char_vocab.total_size(),
        );
        let q = encode(variant, &word_vocab, &char_vocab);
        for seed in [11u64, 22, 33] {
            let mut extractor = Extractor::<f64>::build(config.clone(), seed).unwrap();
            let mut head = Classifier::<f64>::build(extractor.output_dim(), 3, seed + 1);
            let report =
                grad_check(&mut extractor, &mut head, &q, 1, 1e-5, 1e-4, false).unwrap();
            assert!(
                report.pass,
                "{} seed {seed}: max rel error {} in {:?}",
                variant.name(),
                report.max_rel_error,
                report
                    .groups
                    .iter()
                    .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
                    .map(|g| g.name.clone())
            );
        }
    }
}

#[test]
fn corrupted_gradients_fail_the_check() {
    let (word_vocab, char_vocab) = vocabs();
    let config = ExtractorConfig::tiny(
        Variant::InceptionWord,
        word_vocab.total_size(),
        char_vocab.total_size(),
    );
    let q = encode(Variant::InceptionWord, &word_vocab, &char_vocab);
    let mut extractor = Extractor::<f64>::build(config, 5).unwrap();
    let mut head = Classifier::<f64>::build(extractor.output_dim(), 3, 6);
    let report = grad_check(&mut extractor, &mut head, &q, 0, 1e-5, 1e-4, true).unwrap();
    assert!(!report.pass, "sign-flipped gradients must be rejected");
}

#[test]
fn counted_parameters_match_the_closed_form_for_every_variant() {
    let (word_vocab, char_vocab) = vocabs();
    for variant in Variant::ALL {
        for config in [
            ExtractorConfig::tiny(variant, word_vocab.total_size(), char_vocab.total_size()),
            ExtractorConfig::published(
                variant,
                word_vocab.total_size(),
                char_vocab.total_size(),
            ),
        ] {
            let extractor = Extractor::<f64>::build(config.clone(), 1).unwrap();
            assert_eq!(
                extractor.params().counted_len(),
                convtext_core::extractor::param_count(&config),
                "{}",
                variant.name()
            );
        }
    }
}
