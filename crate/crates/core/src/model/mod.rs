//! Baseline scene classifier: optional InAmp front-end, then per stage a
//! 3×3 conv → relu → 2×2 max pool, global average pool and a dense head.

mod checkpoint;

pub use checkpoint::{decode_model, encode_model, load_model, save_model, SavedModel};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::inamp::{InAmp, InAmpConfig};
use crate::nn::{softmax_rows, Bound, ConvKernel, DenseLayer, InitScheme, Padding, ParamSet, PoolKind};
use crate::tensor::{Graph, Scalar, Tensor, Var};

/// Samples per forward pass in [`Classifier::classify`].
const INFER_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassifierConfig {
    /// `Some` puts an InAmp module in front of the backbone.
    pub inamp: Option<InAmpConfig>,
    pub input_bands: usize,
    pub input_size: usize,
    pub n_classes: usize,
    pub block_widths: Vec<usize>,
}

impl ClassifierConfig {
    pub fn new(input_bands: usize, n_classes: usize, with_inamp: bool) -> Self {
        ClassifierConfig {
            inamp: with_inamp.then(|| InAmpConfig::new(input_bands)),
            input_bands,
            input_size: 64,
            n_classes,
            block_widths: vec![32, 64, 128],
        }
    }

    pub fn with_inamp(&self) -> bool {
        self.inamp.is_some()
    }

    /// Channels the first backbone conv consumes.
    pub fn backbone_input(&self) -> usize {
        self.inamp.as_ref().map_or(self.input_bands, |c| c.out_channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_bands == 0 {
            return Err(Error::Config("input_bands must be at least 1".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Config(format!(
                "n_classes must be at least 2, got {}",
                self.n_classes
            )));
        }
        if self.block_widths.is_empty() || self.block_widths.contains(&0) {
            return Err(Error::Config(format!("bad block widths {:?}", self.block_widths)));
        }
        let stride = 1usize << self.block_widths.len().min(usize::BITS as usize - 1);
        if self.input_size == 0 || !self.input_size.is_multiple_of(stride) {
            return Err(Error::Config(format!(
                "input_size {} is not divisible by 2^{}",
                self.input_size,
                self.block_widths.len()
            )));
        }
        if let Some(c) = &self.inamp {
            if c.in_bands != self.input_bands {
                return Err(Error::ChannelMismatch {
                    expected: self.input_bands,
                    got: c.in_bands,
                });
            }
            c.validate()?;
        }
        Ok(())
    }
}

/// Layer wiring; parameter values live in [`Classifier::params`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    pub inamp: Option<InAmp>,
    pub blocks: Vec<ConvKernel>,
    pub head: DenseLayer,
}

#[derive(Clone, Debug)]
pub struct Classifier<T: Scalar = f32> {
    pub cfg: ClassifierConfig,
    pub net: Network,
    pub params: ParamSet<T>,
}

pub fn build_classifier<T: Scalar>(cfg: ClassifierConfig, rng: &mut dyn RngCore) -> Result<Classifier<T>> {
    cfg.validate()?;
    let mut params = ParamSet::new();
    let inamp = cfg
        .inamp
        .clone()
        .map(|c| InAmp::build(c, &mut params, rng))
        .transpose()?;
    let mut cin = cfg.backbone_input();
    let mut blocks = Vec::with_capacity(cfg.block_widths.len());
    for (i, &w) in cfg.block_widths.iter().enumerate() {
        blocks.push(ConvKernel::register(
            &mut params,
            &format!("block.{i}"),
            [3, 3, cin, w],
            InitScheme::He,
            rng,
        )?);
        cin = w;
    }
    let head = DenseLayer::register(&mut params, "head", [cin, cfg.n_classes], InitScheme::He, rng)?;
    Ok(Classifier {
        cfg,
        net: Network { inamp, blocks, head },
        params,
    })
}

impl<T: Scalar> Classifier<T> {
    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn inamp_param_count(&self) -> usize {
        self.net.inamp.as_ref().map_or(0, InAmp::param_count)
    }

    /// Checks a `[N, size, size, bands]` batch shape.
    pub fn check_input(&self, shape: &[usize]) -> Result<()> {
        let s = self.cfg.input_size;
        if shape.len() != 4 || shape[1] != s || shape[2] != s || shape[3] != self.cfg.input_bands {
            return Err(Error::shape(format!("[N, {s}, {s}, {}]", self.cfg.input_bands), shape));
        }
        Ok(())
    }

    /// Output of the InAmp front-end (the input itself without one).
    pub fn front_end(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Result<Var> {
        match &self.net.inamp {
            Some(m) => m.forward(g, p, x),
            None => Ok(x),
        }
    }

    /// `[N, H, W, n] → [N, K]` logits.
    pub fn forward(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Result<Var> {
        let mut h = self.front_end(g, p, x)?;
        for k in &self.net.blocks {
            h = g.conv2d(h, p[k.weight], p[k.bias], 1, Padding::Same)?;
            h = g.relu(h)?;
            h = g.pool(h, PoolKind::Max2x2)?;
        }
        h = g.pool(h, PoolKind::GlobalAvg)?;
        g.dense(h, p[self.net.head.weight], p[self.net.head.bias])
    }

    /// Inference-only logits `[N, K]`, computed in chunks without gradient
    /// tracking.
    pub fn logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(batch.shape())?;
        let n = batch.shape()[0];
        let per = batch.sample_len();
        let mut out = Vec::with_capacity(n * self.cfg.n_classes);
        for start in (0..n).step_by(INFER_CHUNK) {
            let m = INFER_CHUNK.min(n - start);
            let mut shape = batch.shape().to_vec();
            shape[0] = m;
            let chunk = Tensor::from_vec(&shape, batch.data()[start * per..(start + m) * per].to_vec())?;
            let mut g = Graph::new();
            let p = self.params.bind(&mut g, false);
            let x = g.leaf(chunk);
            let logits = self.forward(&mut g, &p, x)?;
            out.extend_from_slice(g.value(logits).data());
        }
        Tensor::from_vec(&[n, self.cfg.n_classes], out)
    }

    /// Softmax probabilities `[N, K]` and argmax labels (lowest index on
    /// ties).
    pub fn classify(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let k = self.cfg.n_classes;
        let logits = self.logits(batch)?;
        let probs = softmax_rows(logits.data(), k);
        let predicted = probs.chunks_exact(k).map(argmax).collect();
        Ok((Tensor::from_vec(logits.shape(), probs)?, predicted))
    }
}

/// Index of the first maximal entry.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
