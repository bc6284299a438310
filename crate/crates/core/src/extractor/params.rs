//! Named parameter storage shared by every architecture.
//!
//! Architectures hold indices into a flat [`ParamSet`]; gradients are a
//! parallel vector of tensors in the same order. This keeps checkpointing,
//! optimizer updates and finite-difference checks uniform across variants.

use alloc::string::String;
use alloc::vec::Vec;

use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Param<F> {
    pub name: String,
    pub tensor: Tensor<F>,
    /// Whether the tensor counts toward the headline parameter figure
    /// (embedding tables do not).
    pub counted: bool,
    /// A row that is held constant at zero (the PAD embedding row), so
    /// trailing padding can never influence a representation.
    pub frozen_row: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ParamSet<F> {
    params: Vec<Param<F>>,
}

impl<F: Real> ParamSet<F> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    pub fn add(
        &mut self,
        name: String,
        tensor: Tensor<F>,
        counted: bool,
        frozen_row: Option<usize>,
    ) -> usize {
        self.params.push(Param {
            name,
            tensor,
            counted,
            frozen_row,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Tensor<F> {
        &self.params[idx].tensor
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Tensor<F> {
        &mut self.params[idx].tensor
    }

    pub fn param(&self, idx: usize) -> &Param<F> {
        &self.params[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<F>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<F>> {
        self.params.iter_mut()
    }

    /// Total element count of tensors flagged as counted.
    pub fn counted_len(&self) -> u64 {
        self.params
            .iter()
            .filter(|p| p.counted)
            .map(|p| p.tensor.numel() as u64)
            .sum()
    }

    /// Re-zero every frozen row (used after loading a checkpoint).
    pub fn enforce_frozen(&mut self) {
        for p in self.params.iter_mut() {
            if let Some(row) = p.frozen_row {
                let cols = p.tensor.cols();
                for c in 0..cols {
                    p.tensor.set2(row, c, F::zero());
                }
            }
        }
    }
}

impl<F: Real> Default for ParamSet<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients aligned index-for-index with a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Grads<F> {
    pub tensors: Vec<Tensor<F>>,
}

impl<F: Real> Grads<F> {
    pub fn zeros_like(params: &ParamSet<F>) -> Self {
        Grads {
            tensors: params
                .iter()
                .map(|p| Tensor::zeros(p.tensor.shape()))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Grads<F>, scale: F) {
        debug_assert_eq!(self.tensors.len(), other.tensors.len());
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.axpy(scale, b);
        }
    }

    /// Zero the gradient of every frozen row so updates keep it at zero.
    pub fn respect_frozen(&mut self, params: &ParamSet<F>) {
        for (g, p) in self.tensors.iter_mut().zip(params.iter()) {
            if let Some(row) = p.frozen_row {
                let cols = g.cols();
                for c in 0..cols {
                    g.set2(row, c, F::zero());
                }
            }
        }
    }
}
