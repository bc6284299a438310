//! Dense row-major tensors.
//!
//! Shapes used by this crate: 1-D `[channels]`, 2-D `[length, channels]` for
//! sentence "pseudo images", 3-D `[width, in_channels, out_channels]` for
//! convolution kernels.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::{to_f64, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![F::zero(); n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::ShapeMismatch(alloc::format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Number of rows of a 2-D tensor (sequence length).
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a 2-D tensor (channels).
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    #[inline]
    pub fn at2(&self, r: usize, c: usize) -> F {
        self.data[r * self.shape[1] + c]
    }

    #[inline]
    pub fn set2(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.shape[1] + c] = v;
    }

    #[inline]
    pub fn add2(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.shape[1] + c] = self.data[r * self.shape[1] + c] + v;
    }

    /// Index into a 3-D tensor `[d0, d1, d2]`.
    #[inline]
    pub fn at3(&self, i: usize, j: usize, k: usize) -> F {
        self.data[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    /// Borrow row `r` of a 2-D tensor.
    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        let c = self.shape[1];
        &self.data[r * c..(r + 1) * c]
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Tensor<F> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise sum; shapes must match exactly.
    pub fn add(&self, other: &Tensor<F>) -> Result<Tensor<F>> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(alloc::format!(
                "add {:?} vs {:?}",
                self.shape,
                other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// In-place `self += scale * other`.
    pub fn axpy(&mut self, scale: F, other: &Tensor<F>) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + scale * b;
        }
    }

    pub fn scale(&mut self, s: F) {
        for a in self.data.iter_mut() {
            *a = *a * s;
        }
    }

    pub fn fill(&mut self, v: F) {
        for a in self.data.iter_mut() {
            *a = v;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest absolute difference to another tensor of the same shape.
    pub fn linf_distance(&self, other: &Tensor<F>) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| to_f64((a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn shape_string(&self) -> String {
        let mut s = String::new();
        for (i, d) in self.shape.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&alloc::format!("{d}"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::<f64>::from_vec(&[2, 3], alloc::vec![0.0; 6]).is_ok());
        assert!(Tensor::<f64>::from_vec(&[2, 3], alloc::vec![0.0; 5]).is_err());
    }

    #[test]
    fn indexing_row_major() {
        let t = Tensor::from_vec(&[2, 3], alloc::vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(t.at2(0, 2), 2.0);
        assert_eq!(t.at2(1, 0), 3.0);
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn add_rejects_shape_mismatch() {
        let a = Tensor::<f64>::zeros(&[2, 2]);
        let b = Tensor::<f64>::zeros(&[2, 3]);
        assert!(a.add(&b).is_err());
    }
}
