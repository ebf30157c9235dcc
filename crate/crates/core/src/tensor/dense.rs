use rand::RngCore;

use super::Scalar;
use crate::error::{Error, Result};
use crate::nn::init::{init_params, InitScheme};

/// Dense row-major n-dimensional array.
///
/// Image batches are laid out channel-last, `[N, H, W, C]`, so the channel
/// vector of a pixel is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T: Scalar = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    grad: Option<Vec<T>>,
}

/// Initial contents for [`Tensor::create`].
pub enum Init<'a, T> {
    Zeros,
    Constant(T),
    Values(Vec<T>),
    Random(InitScheme, &'a mut dyn RngCore),
}

pub(crate) fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.iter().any(|&d| d < 1) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    pub fn create(shape: &[usize], init: Init<'_, T>) -> Result<Self> {
        let len = check_shape(shape)?;
        match init {
            Init::Zeros => Ok(Self::raw(shape.to_vec(), vec![T::zero(); len])),
            Init::Constant(c) => Ok(Self::raw(shape.to_vec(), vec![c; len])),
            Init::Values(v) => Self::from_vec(shape, v),
            Init::Random(scheme, rng) => init_params(shape, scheme, rng),
        }
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::create(shape, Init::Zeros)
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        Self::create(shape, Init::Constant(value))
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len = check_shape(shape)?;
        if data.len() != len {
            return Err(Error::shape(format!("{len} values for {shape:?}"), data.len()));
        }
        Ok(Self::raw(shape.to_vec(), data))
    }

    pub fn scalar(value: T) -> Self {
        Self::raw(vec![1], vec![value])
    }

    /// Caller guarantees `product(shape) == data.len()`.
    pub(crate) fn raw(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        self.requires_grad = on;
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub(crate) fn accumulate_grad(&mut self, g: &[T]) {
        debug_assert_eq!(g.len(), self.data.len());
        match &mut self.grad {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b),
            None => self.grad = Some(g.to_vec()),
        }
    }

    /// Element at a multi-index.
    pub fn at(&self, index: &[usize]) -> Result<T> {
        if index.len() != self.shape.len() {
            return Err(Error::shape(&self.shape, index));
        }
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            if i >= d {
                return Err(Error::IndexOutOfRange { index: i, limit: d });
            }
            flat = flat * d + i;
        }
        Ok(self.data[flat])
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return Err(Error::shape(&self.shape, shape));
        }
        self.shape = shape.to_vec();
        self.grad = None;
        Ok(self)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
            requires_grad: self.requires_grad,
            grad: self
                .grad
                .as_ref()
                .map(|g| g.iter().map(|v| U::of(v.as_f64())).collect()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Dimensions after the first one, e.g. `[H, W, C]` for a batch.
    pub fn sample_len(&self) -> usize {
        self.shape[1..].iter().product()
    }
}
