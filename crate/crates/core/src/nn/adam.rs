use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::tensor::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment estimates for bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T: Scalar = f32> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>) -> Self {
        let zeros = || params.tensors().iter().map(|p| vec![T::zero(); p.len()]).collect();
        AdamState {
            m: zeros(),
            v: zeros(),
            t: 0,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
        }
    }
}

pub fn adam_step<T: Scalar>(
    params: &mut ParamSet<T>,
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if lr.is_nan() || lr <= 0.0 || lr.is_infinite() {
        return Err(Error::InvalidLr(lr));
    }
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::shape(params.len(), grads.len()));
    }
    for ((p, g), (m, v)) in params.tensors().iter().zip(grads).zip(state.m.iter().zip(&state.v)) {
        if g.len() != p.len() || m.len() != p.len() || v.len() != p.len() {
            return Err(Error::shape(p.shape(), g.len()));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (T::of(state.beta1), T::of(state.beta2));
    let c1 = T::of(1.0 - state.beta1.powi(t));
    let c2 = T::of(1.0 - state.beta2.powi(t));
    let (lr, eps) = (T::of(lr), T::of(state.eps));
    let one = T::one();

    for (i, p) in params.tensors_mut().iter_mut().enumerate() {
        let (m, v, g) = (&mut state.m[i], &mut state.v[i], &grads[i]);
        for (j, w) in p.data_mut().iter_mut().enumerate() {
            m[j] = b1 * m[j] + (one - b1) * g[j];
            v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
