use crate::error::{Error, Result};
use crate::tensor::{Backward, Graph, ReduceKind, Scalar, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    /// 2×2 window, stride 2: `[N,H,W,C] → [N,H/2,W/2,C]`.
    Max2x2,
    /// `[N,H,W,C] → [N,C]`.
    GlobalAvg,
    /// `[N,H,W,C] → [N,C]`.
    GlobalMax,
}

struct MaxPoolOp {
    argmax: Vec<usize>,
}

impl<T: Scalar> Backward<T> for MaxPoolOp {
    fn name(&self) -> &'static str {
        "max_pool2x2"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _output: &Tensor<T>, grad: &[T], _needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let mut gx = vec![T::zero(); inputs[0].len()];
        for (&src, &g) in self.argmax.iter().zip(grad) {
            gx[src] = gx[src] + g;
        }
        vec![Some(gx)]
    }
}

impl<T: Scalar> Graph<T> {
    pub fn pool(&mut self, x: Var, kind: PoolKind) -> Result<Var> {
        if self.shape(x).len() != 4 {
            return Err(Error::shape("[N, H, W, C]", self.shape(x)));
        }
        match kind {
            PoolKind::Max2x2 => self.max_pool2x2(x),
            PoolKind::GlobalAvg => self.reduce(x, &[1, 2], ReduceKind::Mean, false),
            PoolKind::GlobalMax => self.reduce(x, &[1, 2], ReduceKind::Max, false),
        }
    }

    fn max_pool2x2(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let [n, h, w, c] = [t.shape()[0], t.shape()[1], t.shape()[2], t.shape()[3]];
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::OddSpatialDim { h, w });
        }
        let (oh, ow) = (h / 2, w / 2);
        let data = t.data();
        let mut out = Vec::with_capacity(n * oh * ow * c);
        let mut argmax = Vec::with_capacity(n * oh * ow * c);
        for s in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ch in 0..c {
                        let mut best = usize::MAX;
                        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            let i = ((s * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                            if best == usize::MAX || data[i] > data[best] {
                                best = i;
                            }
                        }
                        out.push(data[best]);
                        argmax.push(best);
                    }
                }
            }
        }
        let value = Tensor::raw(vec![n, oh, ow, c], out);
        self.push(value, &[x], MaxPoolOp { argmax })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_field_average() {
        let mut g = Graph::<f32>::new();
        let x = g.leaf(Tensor::full(&[2, 4, 4, 3], 7.0).unwrap());
        let p = g.pool(x, PoolKind::GlobalAvg).unwrap();
        assert_eq!(g.shape(p), &[2, 3]);
        assert!(g.value(p).data().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn max2x2_definition() {
        let mut g = Graph::<f32>::new();
        let x = g.leaf(Tensor::from_vec(&[1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let p = g.pool(x, PoolKind::Max2x2).unwrap();
        assert_eq!(g.value(p).data(), &[4.0]);
        let odd = g.leaf(Tensor::zeros(&[1, 3, 2, 1]).unwrap());
        assert!(matches!(
            g.pool(odd, PoolKind::Max2x2),
            Err(Error::OddSpatialDim { h: 3, w: 2 })
        ));
    }

    #[test]
    fn global_max_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, h, w, c) = (3, 5, 4, 6);
        let data: Vec<f32> = (0..n * h * w * c).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut expect = vec![f32::NEG_INFINITY; n * c];
        for s in 0..n {
            for p in 0..h * w {
                for ch in 0..c {
                    let v = data[(s * h * w + p) * c + ch];
                    expect[s * c + ch] = expect[s * c + ch].max(v);
                }
            }
        }
        let mut g = Graph::<f32>::new();
        let x = g.leaf(Tensor::from_vec(&[n, h, w, c], data).unwrap());
        let p = g.pool(x, PoolKind::GlobalMax).unwrap();
        assert_eq!(g.value(p).data(), expect.as_slice());
    }

    #[test]
    fn gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Tensor::from_vec(&[2, 4, 6, 3], (0..144).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        for kind in [PoolKind::Max2x2, PoolKind::GlobalAvg, PoolKind::GlobalMax] {
            let err = grad_check(
                |g, p| {
                    let y = g.pool(p[0], kind)?;
                    let y2 = g.mul(y, y)?;
                    let r = g.reshape(y2, &[g.value(y2).len()])?;
                    g.reduce(r, &[0], ReduceKind::Sum, false)
                },
                std::slice::from_ref(&x),
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-6, "{kind:?}: {err}");
        }
    }
}
