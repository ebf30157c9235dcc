//! Finite-difference checks of every differentiable operation, in f64 on
//! small random inputs.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inamp::{InAmp, InAmpConfig};
use crate::nn::{Bound, Padding, ParamSet, PoolKind};
use crate::tensor::{grad_check, Graph, ReduceKind, Tensor, Var};

/// Largest tolerated `|analytic − numeric| / max(1, |analytic|)`.
pub const TOLERANCE: f64 = 1e-4;
const EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradModule {
    All,
    Conv,
    Activation,
    Pool,
    Dense,
    Loss,
    InAmp,
}

impl FromStr for GradModule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => GradModule::All,
            "conv" => GradModule::Conv,
            "activation" => GradModule::Activation,
            "pool" => GradModule::Pool,
            "dense" => GradModule::Dense,
            "loss" => GradModule::Loss,
            "inamp" => GradModule::InAmp,
            _ => {
                return Err(Error::Config(format!(
                    "unknown module {s:?} (all|conv|activation|pool|dense|loss|inamp)"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCase {
    pub name: &'static str,
    pub max_error: f64,
}

impl GradCase {
    pub fn passed(&self) -> bool {
        self.max_error < TOLERANCE
    }
}

fn random(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Scalar `Σ y ⊙ r` for a fixed random `r`, so every output entry carries a
/// distinct weight.
fn project(g: &mut Graph<f64>, y: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = g.leaf(random(g.shape(y), -1.0, 1.0, &mut rng));
    let p = g.mul(y, r)?;
    let axes: Vec<usize> = (0..g.shape(p).len()).collect();
    g.reduce(p, &axes, ReduceKind::Sum, false)
}

fn check(
    name: &'static str,
    params: &[Tensor<f64>],
    f: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
) -> Result<GradCase> {
    let max_error = grad_check(
        |g, v| {
            let y = f(g, v)?;
            project(g, y, 99)
        },
        params,
        EPS,
    )?;
    Ok(GradCase { name, max_error })
}

fn inamp_cases(seed: u64) -> Result<Vec<GradCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::<f64>::new();
    let m = InAmp::build(InAmpConfig::new(3), &mut ps, &mut rng)?;
    let mut all = vec![random(&[2, 6, 6, 3], 0.0, 1.0, &mut rng)];
    all.extend(ps.tensors().iter().cloned());
    let split = |v: &[Var]| (v[0], Bound::from_vars(v[1..].to_vec()));
    // attention stages act on a 32-channel map
    let mut wide = vec![random(&[2, 6, 6, 32], 0.0, 1.0, &mut rng)];
    wide.extend(ps.tensors().iter().cloned());

    Ok(vec![
        check("band_attention", &all, |g, v| {
            let (x, p) = split(v);
            m.band_attention(g, &p, x)
        })?,
        check("spatial_attention", &wide, |g, v| {
            let (x, p) = split(v);
            m.spatial_attention(g, &p, x)
        })?,
        check("channel_attention", &wide, |g, v| {
            let (x, p) = split(v);
            m.channel_attention(g, &p, x)
        })?,
        check("inamp_forward", &all, |g, v| {
            let (x, p) = split(v);
            m.forward(g, &p, x)
        })?,
    ])
}

/// Runs the checks selected by `module`; inputs are seeded by `seed`.
pub fn run_gradcheck(module: GradModule, seed: u64) -> Result<Vec<GradCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let want = |m: GradModule| module == GradModule::All || module == m;
    let mut out = Vec::new();

    if want(GradModule::Conv) {
        let x = random(&[2, 5, 5, 3], -1.0, 1.0, &mut rng);
        let w = random(&[3, 3, 3, 4], -1.0, 1.0, &mut rng);
        let b = random(&[4], -1.0, 1.0, &mut rng);
        out.push(check("conv2d_same", &[x.clone(), w.clone(), b.clone()], |g, v| {
            g.conv2d(v[0], v[1], v[2], 1, Padding::Same)
        })?);
        out.push(check("conv2d_valid_stride2", &[x.clone(), w, b], |g, v| {
            g.conv2d(v[0], v[1], v[2], 2, Padding::Valid)
        })?);
        let w1 = random(&[1, 1, 3, 5], -1.0, 1.0, &mut rng);
        let b1 = random(&[5], -1.0, 1.0, &mut rng);
        out.push(check("conv2d_1x1", &[x, w1, b1], |g, v| {
            g.conv2d(v[0], v[1], v[2], 1, Padding::Same)
        })?);
    }
    if want(GradModule::Activation) {
        let x = random(&[2, 4, 4, 3], -2.0, 2.0, &mut rng);
        out.push(check("relu", std::slice::from_ref(&x), |g, v| g.relu(v[0]))?);
        out.push(check("sigmoid", &[x], |g, v| g.sigmoid(v[0]))?);
    }
    if want(GradModule::Pool) {
        let x = random(&[2, 6, 6, 3], -1.0, 1.0, &mut rng);
        for (name, kind) in [
            ("max_pool_2x2", PoolKind::Max2x2),
            ("global_avg_pool", PoolKind::GlobalAvg),
            ("global_max_pool", PoolKind::GlobalMax),
        ] {
            out.push(check(name, std::slice::from_ref(&x), |g, v| g.pool(v[0], kind))?);
        }
    }
    if want(GradModule::Dense) {
        let x = random(&[3, 5], -1.0, 1.0, &mut rng);
        let w = random(&[5, 4], -1.0, 1.0, &mut rng);
        let b = random(&[4], -1.0, 1.0, &mut rng);
        out.push(check("dense", &[x, w, b], |g, v| g.dense(v[0], v[1], v[2]))?);
    }
    if want(GradModule::Loss) {
        let logits = random(&[4, 3], -2.0, 2.0, &mut rng);
        let labels = [0, 2, 1, 2];
        let max_error = grad_check(|g, v| Ok(g.softmax_xent(v[0], &labels)?.0), &[logits], EPS)?;
        out.push(GradCase {
            name: "softmax_xent",
            max_error,
        });
    }
    if want(GradModule::InAmp) {
        out.extend(inamp_cases(rng.random())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_case_passes() {
        let cases = run_gradcheck(GradModule::All, 1).unwrap();
        assert_eq!(cases.len(), 14);
        for c in &cases {
            assert!(c.passed(), "{} max error {}", c.name, c.max_error);
        }
    }
}
