//! Linear classifier head over a text representation.

#[allow(unused_imports)] // required in no_std builds, redundant when std is linked for tests
use num_traits::Float as _;

use crate::error::Result;
use crate::ops::{linear_backward, linear_forward};
use crate::real::Real;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Classifier<F> {
    weights: Tensor<F>,
    bias: Tensor<F>,
}

impl<F: Real> Classifier<F> {
    pub fn build(in_dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let bound = (6.0 / (in_dim + num_classes) as f64).sqrt();
        let mut weights = Tensor::zeros(&[in_dim, num_classes]);
        for w in weights.data_mut() {
            *w = rng.uniform(-bound, bound);
        }
        Classifier {
            weights,
            bias: Tensor::zeros(&[num_classes]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Tensor<F> {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor<F> {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut Tensor<F> {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut Tensor<F> {
        &mut self.bias
    }

    /// Both parameter tensors, mutably, for optimizer updates.
    pub fn params_mut(&mut self) -> (&mut Tensor<F>, &mut Tensor<F>) {
        (&mut self.weights, &mut self.bias)
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        linear_forward(x, &self.weights, &self.bias)
    }

    /// Returns `(grad_x, grad_weights, grad_bias)`.
    pub fn backward(
        &self,
        grad_logits: &Tensor<F>,
        x: &Tensor<F>,
    ) -> Result<(Tensor<F>, Tensor<F>, Tensor<F>)> {
        linear_backward(grad_logits, x, &self.weights)
    }
}
