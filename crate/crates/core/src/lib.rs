//! InAmp: an input-amplification front-end that learns per-pixel spectral
//! patterns from multi-spectral imagery with stacked 1×1 convolutions,
//! followed by spatial and channel attention.
//!
//! The crate carries its own small reverse-mode differentiation engine
//! ([`tensor`]), the layers built on it ([`nn`]), the module itself
//! ([`inamp`]), a desk-scale baseline classifier ([`model`]), a synthetic
//! multi-spectral benchmark and raster formats ([`data`]), evaluation
//! ([`metrics`]) and the training/ablation harness ([`harness`]).

mod bytes;
pub mod cli;
pub mod data;
pub mod error;
pub mod harness;
pub mod inamp;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod tensor;

pub use error::{Error, Result};
