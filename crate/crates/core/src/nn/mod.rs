//! Layers, losses, initialisation, the Adam optimiser and the parameter
//! checkpoint container.

mod activation;
mod adam;
pub mod checkpoint;
mod conv;
mod dense;
pub mod init;
mod loss;
mod params;
mod pool;

pub use activation::Activation;
pub use adam::{adam_step, AdamState};
pub use conv::Padding;
pub use init::{init_params, InitScheme};
pub use loss::{cross_entropy, softmax_rows};
pub use params::{Bound, ParamId, ParamSet};
pub use pool::PoolKind;

use crate::error::Result;
use crate::tensor::Scalar;

/// Convolution layer: `weight [kh, kw, Cin, Cout]` and `bias [Cout]` in a
/// [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvKernel {
    pub weight: ParamId,
    pub bias: ParamId,
    pub kh: usize,
    pub kw: usize,
    pub cin: usize,
    pub cout: usize,
}

impl ConvKernel {
    /// Registers `{prefix}.weight` and `{prefix}.bias`. Bias starts at zero.
    pub fn register<T: Scalar>(
        params: &mut ParamSet<T>,
        prefix: &str,
        [kh, kw, cin, cout]: [usize; 4],
        scheme: InitScheme,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Self> {
        let weight = params.push(
            format!("{prefix}.weight"),
            init_params(&[kh, kw, cin, cout], scheme, rng)?,
        )?;
        let bias = params.push(format!("{prefix}.bias"), crate::tensor::Tensor::zeros(&[cout])?)?;
        Ok(ConvKernel {
            weight,
            bias,
            kh,
            kw,
            cin,
            cout,
        })
    }

    pub fn param_count(&self) -> usize {
        self.kh * self.kw * self.cin * self.cout + self.cout
    }
}

/// Fully connected layer: `weight [d, u]`, `bias [u]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub units: usize,
}

impl DenseLayer {
    pub fn register<T: Scalar>(
        params: &mut ParamSet<T>,
        prefix: &str,
        [inputs, units]: [usize; 2],
        scheme: InitScheme,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Self> {
        let weight = params.push(format!("{prefix}.weight"), init_params(&[inputs, units], scheme, rng)?)?;
        let bias = params.push(format!("{prefix}.bias"), crate::tensor::Tensor::zeros(&[units])?)?;
        Ok(DenseLayer {
            weight,
            bias,
            inputs,
            units,
        })
    }

    pub fn param_count(&self) -> usize {
        self.inputs * self.units + self.units
    }
}
