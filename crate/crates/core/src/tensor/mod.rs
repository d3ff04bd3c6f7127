//! Dense row-major `f32` tensors, the forward-only layer kernels built on
//! them, and the `TNSR` binary container used for weights and caches.

mod container;
mod ops;

pub use container::{read_container, write_container, TensorContainer};
pub use ops::{bilinear_resize, conv2d, fully_connected, lrn, maxpool2d, relu, LrnParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape error: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("container format error at byte offset {offset}: {detail}")]
    Format { offset: usize, detail: String },
    #[error("duplicate container entry name {0:?}")]
    DuplicateName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> TensorError {
    TensorError::Shape {
        op,
        detail: detail.into(),
    }
}

/// Dense N-dimensional array of `f32`, last index fastest.
///
/// Every dimension is positive and `data.len()` always equals the product of
/// `dims`. Tensors are never mutated in place by the layer kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(shape_err(
                "tensor",
                format!("dims must be a non-empty list of positive sizes, got {dims:?}"),
            ));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(shape_err(
                "tensor",
                format!(
                    "dims {dims:?} need {expected} values, got {}",
                    data.len()
                ),
            ));
        }
        Ok(Self { dims, data })
    }

    /// Panics if any dimension is zero.
    pub fn filled(dims: Vec<usize>, value: f32) -> Self {
        let n = dims.iter().product();
        Self::new(dims, vec![value; n]).expect("filled: invalid dims")
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        Self::filled(dims, 0.0)
    }

    /// Rank-1 tensor wrapping `data`. Panics on an empty vector.
    pub fn vector(data: Vec<f32>) -> Self {
        Self::new(vec![data.len()], data).expect("vector: empty data")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self, TensorError> {
        Self::new(dims, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self - other`, elementwise; dims must match exactly.
    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.dims != other.dims {
            return Err(shape_err(
                "sub",
                format!("{:?} vs {:?}", self.dims, other.dims),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor {
            dims: self.dims.clone(),
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Interprets the tensor as `[C, H, W]`.
    pub(crate) fn chw(&self, op: &'static str) -> Result<(usize, usize, usize), TensorError> {
        match *self.dims.as_slice() {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(shape_err(
                op,
                format!("expected a [C, H, W] tensor, got dims {:?}", self.dims),
            )),
        }
    }
}
