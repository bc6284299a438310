//! Labeled question records and deterministic dataset splitting.

#[allow(unused_imports)] // required in no_std builds, redundant when std is linked for tests
use num_traits::Float as _;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// One training/evaluation record. `ground_truths` carries the ten human
/// answers when the consensus metric is exercised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledQuestion {
    pub text: String,
    pub label: usize,
    pub ground_truths: Option<Vec<String>>,
}

impl LabeledQuestion {
    pub fn new(text: String, label: usize) -> Self {
        LabeledQuestion {
            text,
            label,
            ground_truths: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(gt) = &self.ground_truths {
            if gt.len() != 10 {
                return Err(Error::GroundTruthCount(gt.len()));
            }
        }
        Ok(())
    }
}

/// Deterministic shuffle followed by a split at `round(fraction * n)`.
/// The two halves are disjoint and together contain every record exactly once.
pub fn split(
    dataset: &[LabeledQuestion],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledQuestion>, Vec<LabeledQuestion>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidRate(alloc::format!(
            "split fraction {fraction} not in [0, 1]"
        )));
    }
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    Rng::new(seed).shuffle(&mut indices);
    let n_train = ((fraction * dataset.len() as f64) + 0.5).floor() as usize;
    let train = indices[..n_train].iter().map(|&i| dataset[i].clone()).collect();
    let val = indices[n_train..].iter().map(|&i| dataset[i].clone()).collect();
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn items(n: usize) -> Vec<LabeledQuestion> {
        (0..n)
            .map(|i| LabeledQuestion::new(alloc::format!("q{i}"), i % 3))
            .collect()
    }

    #[test]
    fn split_80_20() {
        let (train, val) = split(&items(100), 0.8, 1).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(val.len(), 20);
    }

    #[test]
    fn split_everything_into_train() {
        let (train, val) = split(&items(10), 1.0, 1).unwrap();
        assert_eq!(train.len(), 10);
        assert!(val.is_empty());
    }

    #[test]
    fn split_preserves_records_as_multiset() {
        let data = items(37);
        let (train, val) = split(&data, 0.6, 9).unwrap();
        let mut merged: Vec<String> = train.iter().chain(&val).map(|q| q.text.clone()).collect();
        merged.sort();
        let mut expected: Vec<String> = data.iter().map(|q| q.text.clone()).collect();
        expected.sort();
        assert_eq!(merged, expected);
    }

    #[test]
    fn ground_truth_count_enforced() {
        let mut q = LabeledQuestion::new("x".to_string(), 0);
        q.ground_truths = Some(vec!["a".to_string(); 9]);
        assert_eq!(q.validate(), Err(Error::GroundTruthCount(9)));
        q.ground_truths = Some(vec!["a".to_string(); 10]);
        assert!(q.validate().is_ok());
    }
}
