//! Deterministic synthetic question corpus.
//!
//! Six classes keyed by question prefix ("what color", "how many", "is the",
//! "what animal", "what sport", "is there"), template-filled from a ~100 word
//! lexicon. With `order_sensitive` set, classes 2 and 5 become a confusable
//! pair: paired items share an identical bag of words and differ only in word
//! order ("is the dog on the chair" vs "is the chair on the dog"), so a
//! bag-of-words model cannot separate them while an order-aware one can.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::LabeledQuestion;
use crate::error::{Error, Result};
use crate::rng::Rng;

const COLORS: &[&str] = &[
    "red", "blue", "green", "yellow", "black", "white", "brown", "purple", "orange", "pink",
];
const ANIMALS: &[&str] = &[
    "dog", "cat", "horse", "bird", "elephant", "zebra", "giraffe", "sheep", "bear", "rabbit",
];
const FURNITURE: &[&str] = &[
    "chair", "table", "sofa", "bench", "bed", "desk", "shelf", "stool",
];
const OBJECTS: &[&str] = &[
    "ball", "book", "cup", "plate", "phone", "lamp", "clock", "bag", "hat", "shoe",
];
const PLACES: &[&str] = &[
    "kitchen", "park", "street", "beach", "room", "garden", "field", "yard",
];
const PREPS: &[&str] = &["on", "under", "near", "behind", "beside"];
const ADJECTIVES: &[&str] = &["big", "small", "tall", "old", "young", "shiny"];
const PEOPLE: &[&str] = &["man", "woman", "boy", "girl"];

pub const DEFAULT_NUM_CLASSES: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSpec {
    pub seed: u64,
    pub size: usize,
    pub num_classes: usize,
    pub order_sensitive: bool,
}

impl SynthSpec {
    pub fn new(seed: u64, size: usize) -> Self {
        SynthSpec {
            seed,
            size,
            num_classes: DEFAULT_NUM_CLASSES,
            order_sensitive: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.num_classes > DEFAULT_NUM_CLASSES {
            return Err(Error::InvalidConfig(format!(
                "num_classes {} outside 2..=6",
                self.num_classes
            )));
        }
        if self.size < self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "size {} smaller than num_classes {}",
                self.size, self.num_classes
            )));
        }
        if self.order_sensitive && self.num_classes != DEFAULT_NUM_CLASSES {
            return Err(Error::InvalidConfig(
                "order_sensitive corpora need all 6 classes".into(),
            ));
        }
        Ok(())
    }
}

/// The (animal, preposition, furniture) triple shared by one confusable pair.
type Triple = (&'static str, &'static str, &'static str);

/// Generate a labeled corpus; a pure function of the spec. Labels are
/// assigned round-robin so every class appears at least once.
pub fn generate_synth(spec: &SynthSpec) -> Result<Vec<LabeledQuestion>> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let mut pair_rng = rng.fork(1);
    let pair_count = spec.size / spec.num_classes + 1;
    let triples: Vec<Triple> = (0..pair_count)
        .map(|_| {
            (
                *pair_rng.choose(ANIMALS),
                *pair_rng.choose(PREPS),
                *pair_rng.choose(FURNITURE),
            )
        })
        .collect();
    let mut items = Vec::with_capacity(spec.size);
    for i in 0..spec.size {
        let label = i % spec.num_classes;
        let pair_index = i / spec.num_classes;
        let text = question_for(label, spec.order_sensitive, &triples, pair_index, &mut rng);
        items.push(LabeledQuestion::new(text, label));
    }
    Ok(items)
}

fn question_for(
    label: usize,
    order_sensitive: bool,
    triples: &[Triple],
    pair_index: usize,
    rng: &mut Rng,
) -> String {
    match label {
        0 => match rng.below(3) {
            0 => format!("what color is the {} ?", rng.choose(OBJECTS)),
            1 => format!("what color is the {} ?", rng.choose(ANIMALS)),
            _ => format!(
                "what color is the {} {} ?",
                rng.choose(ADJECTIVES),
                rng.choose(OBJECTS)
            ),
        },
        1 => match rng.below(2) {
            0 => format!(
                "how many {}s are in the {} ?",
                rng.choose(ANIMALS),
                rng.choose(PLACES)
            ),
            _ => format!(
                "how many {}s are on the {} ?",
                rng.choose(OBJECTS),
                rng.choose(FURNITURE)
            ),
        },
        2 => {
            if order_sensitive {
                let (animal, prep, furniture) = triples[pair_index];
                format!("is the {animal} {prep} the {furniture} ?")
            } else {
                match rng.below(2) {
                    0 => format!("is the {} {} ?", rng.choose(OBJECTS), rng.choose(COLORS)),
                    _ => format!(
                        "is the {} in the {} ?",
                        rng.choose(ANIMALS),
                        rng.choose(PLACES)
                    ),
                }
            }
        }
        3 => match rng.below(2) {
            0 => format!("what animal is in the {} ?", rng.choose(PLACES)),
            _ => format!(
                "what animal is {} the {} ?",
                rng.choose(PREPS),
                rng.choose(FURNITURE)
            ),
        },
        4 => match rng.below(2) {
            0 => format!("what sport is played in the {} ?", rng.choose(PLACES)),
            _ => format!(
                "what sport is the {} {} playing ?",
                rng.choose(ADJECTIVES),
                rng.choose(PEOPLE)
            ),
        },
        _ => {
            if order_sensitive {
                // word-order mirror of the paired class-2 item
                let (animal, prep, furniture) = triples[pair_index];
                format!("is the {furniture} {prep} the {animal} ?")
            } else {
                match rng.below(2) {
                    0 => format!(
                        "is there a {} in the {} ?",
                        rng.choose(OBJECTS),
                        rng.choose(PLACES)
                    ),
                    _ => format!(
                        "is there a {} near the {} ?",
                        rng.choose(ANIMALS),
                        rng.choose(FURNITURE)
                    ),
                }
            }
        }
    }
    .into()
}
