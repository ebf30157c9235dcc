//! The input-amplification module.
//!
//! Three stages run in order on a `[N, H, W, n]` multi-spectral batch:
//!
//! 1. **Band attention**: stacked 1×1 convolutions with relu map each
//!    pixel's band vector to `out_channels − n` deep-pseudo bands. Every
//!    output pixel depends only on the same input pixel.
//! 2. The pseudo bands are concatenated after the original bands, then
//!    **spatial attention** gates every pixel by a single mask computed from
//!    the channel-mean and channel-max maps (k×k conv, sigmoid).
//! 3. **Channel attention** gates every channel by a weight computed from
//!    global average and max pools through a shared two-layer MLP.
//!
//! Either attention can be switched off for ablation; with both off the
//! output is the raw concatenation.

mod export;

pub use export::export_pseudo_bands;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::nn::{Bound, ConvKernel, DenseLayer, InitScheme, Padding, ParamSet, PoolKind};
use crate::tensor::{Graph, ReduceKind, Scalar, Var};

/// Prefix of every InAmp parameter name in a checkpoint.
pub const PARAM_PREFIX: &str = "inamp/";

const GATE_INIT: InitScheme = InitScheme::Uniform(-0.05, 0.05);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InAmpConfig {
    pub in_bands: usize,
    pub out_channels: usize,
    pub n_one_by_one_layers: usize,
    pub use_spatial_attention: bool,
    pub use_channel_attention: bool,
    pub sa_kernel: usize,
    pub ca_reduction: usize,
    /// Filter count of each 1×1 layer. `None` gives every layer
    /// `out_channels − in_bands` filters.
    pub layer_widths: Option<Vec<usize>>,
    /// Take the pseudo bands from every 1×1 layer (concatenated) instead of
    /// only the last one. Widths must then sum to `out_channels − in_bands`.
    pub concat_all_layers: bool,
}

impl InAmpConfig {
    pub fn new(in_bands: usize) -> Self {
        InAmpConfig {
            in_bands,
            out_channels: 32,
            n_one_by_one_layers: 2,
            use_spatial_attention: true,
            use_channel_attention: true,
            sa_kernel: 7,
            ca_reduction: 8,
            layer_widths: None,
            concat_all_layers: false,
        }
    }

    pub fn pseudo_bands(&self) -> usize {
        self.out_channels.saturating_sub(self.in_bands)
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layer_widths
            .clone()
            .unwrap_or_else(|| vec![self.pseudo_bands(); self.n_one_by_one_layers])
    }

    /// Hidden width of the channel-attention MLP.
    pub fn ca_hidden(&self) -> usize {
        self.out_channels / self.ca_reduction.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_bands < 1 {
            return Err(Error::Config("InAmp needs at least one input band".into()));
        }
        if self.out_channels <= self.in_bands {
            return Err(Error::Config(format!(
                "out_channels ({}) must exceed in_bands ({})",
                self.out_channels, self.in_bands
            )));
        }
        if !(1..=4).contains(&self.n_one_by_one_layers) {
            return Err(Error::Config(format!(
                "n_one_by_one_layers must be 1..=4, got {}",
                self.n_one_by_one_layers
            )));
        }
        if self.sa_kernel == 0 || self.sa_kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("sa_kernel must be odd, got {}", self.sa_kernel)));
        }
        if self.ca_reduction == 0 {
            return Err(Error::Config("ca_reduction must be at least 1".into()));
        }
        if self.use_channel_attention && self.ca_hidden() < 1 {
            return Err(Error::ReductionUnderflow {
                channels: self.out_channels,
                reduction: self.ca_reduction,
            });
        }
        let widths = self.widths();
        if widths.len() != self.n_one_by_one_layers || widths.contains(&0) {
            return Err(Error::Config(format!(
                "need {} positive layer widths, got {widths:?}",
                self.n_one_by_one_layers
            )));
        }
        let produced = if self.concat_all_layers {
            widths.iter().sum()
        } else {
            widths[widths.len() - 1]
        };
        if produced != self.pseudo_bands() {
            return Err(Error::Config(format!(
                "layer widths {widths:?} yield {produced} pseudo bands, expected {}",
                self.pseudo_bands()
            )));
        }
        Ok(())
    }
}

/// Layer handles of one InAmp instance inside a [`ParamSet`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InAmpParams {
    pub one_by_one: Vec<ConvKernel>,
    pub sa_conv: Option<ConvKernel>,
    pub ca_mlp: Option<(DenseLayer, DenseLayer)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InAmp {
    cfg: InAmpConfig,
    params: InAmpParams,
}

impl InAmp {
    /// Registers the module's parameters under [`PARAM_PREFIX`]. 1×1 layers
    /// get He init; attention gates get small uniform weights so they start
    /// near 0.5.
    pub fn build<T: Scalar>(cfg: InAmpConfig, params: &mut ParamSet<T>, rng: &mut dyn RngCore) -> Result<Self> {
        cfg.validate()?;
        let mut one_by_one = Vec::new();
        let mut cin = cfg.in_bands;
        for (i, &w) in cfg.widths().iter().enumerate() {
            let k = ConvKernel::register(
                params,
                &format!("{PARAM_PREFIX}band.{i}"),
                [1, 1, cin, w],
                InitScheme::He,
                rng,
            )?;
            one_by_one.push(k);
            cin = w;
        }
        let sa_conv = cfg
            .use_spatial_attention
            .then(|| {
                let k = cfg.sa_kernel;
                ConvKernel::register(params, &format!("{PARAM_PREFIX}spatial"), [k, k, 2, 1], GATE_INIT, rng)
            })
            .transpose()?;
        let ca_mlp = cfg
            .use_channel_attention
            .then(|| -> Result<_> {
                let (c, h) = (cfg.out_channels, cfg.ca_hidden());
                let fc1 = DenseLayer::register(params, &format!("{PARAM_PREFIX}channel.fc1"), [c, h], GATE_INIT, rng)?;
                let fc2 = DenseLayer::register(params, &format!("{PARAM_PREFIX}channel.fc2"), [h, c], GATE_INIT, rng)?;
                Ok((fc1, fc2))
            })
            .transpose()?;
        Ok(InAmp {
            cfg,
            params: InAmpParams {
                one_by_one,
                sa_conv,
                ca_mlp,
            },
        })
    }

    pub fn config(&self) -> &InAmpConfig {
        &self.cfg
    }

    pub fn params(&self) -> &InAmpParams {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params
            .one_by_one
            .iter()
            .map(ConvKernel::param_count)
            .sum::<usize>()
            + self.params.sa_conv.map_or(0, |k| k.param_count())
            + self.params.ca_mlp.map_or(0, |(a, b)| a.param_count() + b.param_count())
    }

    /// `[N,H,W,n] → [N,H,W,out_channels − n]`, all values ≥ 0.
    pub fn band_attention<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Result<Var> {
        let c = *g.shape(x).last().unwrap_or(&0);
        if g.shape(x).len() != 4 || c != self.cfg.in_bands {
            return Err(Error::ChannelMismatch {
                expected: self.cfg.in_bands,
                got: c,
            });
        }
        let mut h = x;
        let mut outputs = Vec::with_capacity(self.params.one_by_one.len());
        for k in &self.params.one_by_one {
            let z = g.conv2d(h, p[k.weight], p[k.bias], 1, Padding::Same)?;
            h = g.relu(z)?;
            outputs.push(h);
        }
        if self.cfg.concat_all_layers && outputs.len() > 1 {
            g.concat_last(&outputs)
        } else {
            Ok(h)
        }
    }

    /// Pixel gate from channel-mean and channel-max maps, shared by every
    /// channel.
    pub fn spatial_attention<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Result<Var> {
        let k = self
            .params
            .sa_conv
            .ok_or_else(|| Error::Config("spatial attention is disabled".into()))?;
        let mask = spatial_mask(g, p, k, x)?;
        g.mul(x, mask)
    }

    /// Per-channel gate from global average and max pools through a shared
    /// MLP.
    pub fn channel_attention<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Result<Var> {
        let (fc1, fc2) = self
            .params
            .ca_mlp
            .ok_or_else(|| Error::Config("channel attention is disabled".into()))?;
        let w = channel_weights(g, p, (fc1, fc2), x)?;
        g.mul(x, w)
    }

    /// Full module: `[N,H,W,n] → [N,H,W,out_channels]`.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Result<Var> {
        let pseudo = self.band_attention(g, p, x)?;
        let mut h = concat_bands(g, x, pseudo)?;
        if self.params.sa_conv.is_some() {
            h = self.spatial_attention(g, p, h)?;
        }
        if self.params.ca_mlp.is_some() {
            h = self.channel_attention(g, p, h)?;
        }
        Ok(h)
    }
}

/// Original bands first, then the pseudo bands.
pub fn concat_bands<T: Scalar>(g: &mut Graph<T>, x: Var, pseudo: Var) -> Result<Var> {
    g.concat_last(&[x, pseudo])
}

/// `[N,H,W,C] → [N,H,W,1]` sigmoid mask.
pub fn spatial_mask<T: Scalar>(g: &mut Graph<T>, p: &Bound, k: ConvKernel, x: Var) -> Result<Var> {
    let mean = g.reduce(x, &[3], ReduceKind::Mean, true)?;
    let max = g.reduce(x, &[3], ReduceKind::Max, true)?;
    let stacked = g.concat_last(&[mean, max])?;
    let logits = g.conv2d(stacked, p[k.weight], p[k.bias], 1, Padding::Same)?;
    g.sigmoid(logits)
}

/// `[N,H,W,C] → [N,1,1,C]` sigmoid channel weights.
pub fn channel_weights<T: Scalar>(
    g: &mut Graph<T>,
    p: &Bound,
    (fc1, fc2): (DenseLayer, DenseLayer),
    x: Var,
) -> Result<Var> {
    let shape = g.shape(x).to_vec();
    let (n, c) = (shape[0], shape[3]);
    if c != fc1.inputs {
        return Err(Error::ChannelMismatch {
            expected: fc1.inputs,
            got: c,
        });
    }
    let mlp = |g: &mut Graph<T>, v: Var| -> Result<Var> {
        let h = g.dense(v, p[fc1.weight], p[fc1.bias])?;
        let h = g.relu(h)?;
        g.dense(h, p[fc2.weight], p[fc2.bias])
    };
    let avg = g.pool(x, PoolKind::GlobalAvg)?;
    let max = g.pool(x, PoolKind::GlobalMax)?;
    let a = mlp(g, avg)?;
    let m = mlp(g, max)?;
    let s = g.add(a, m)?;
    let w = g.sigmoid(s)?;
    g.reshape(w, &[n, 1, 1, c])
}
