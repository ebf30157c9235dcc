use crate::error::{Error, Result};
use crate::tensor::{Backward, Graph, Scalar, Tensor, Var};

struct DenseOp {
    n: usize,
    d: usize,
    u: usize,
}

impl<T: Scalar> Backward<T> for DenseOp {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _output: &Tensor<T>, grad: &[T], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let (n, d, u) = (self.n, self.d, self.u);
        let gx = needs[0].then(|| {
            let mut gx = vec![T::zero(); n * d];
            T::gemm(n, u, d, grad, false, inputs[1].data(), true, T::zero(), &mut gx);
            gx
        });
        let gw = needs[1].then(|| {
            let mut gw = vec![T::zero(); d * u];
            T::gemm(d, n, u, inputs[0].data(), true, grad, false, T::zero(), &mut gw);
            gw
        });
        let gb = needs[2].then(|| {
            let mut gb = vec![T::zero(); u];
            for row in grad.chunks_exact(u) {
                gb.iter_mut().zip(row).for_each(|(a, &b)| *a = *a + b);
            }
            gb
        });
        vec![gx, gw, gb]
    }
}

impl<T: Scalar> Graph<T> {
    /// `x: [N,d] · weight: [d,u] + bias: [u]`.
    pub fn dense(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let (sx, sw, sb) = (self.shape(x), self.shape(weight), self.shape(bias));
        if sx.len() != 2 || sw.len() != 2 || sx[1] != sw[0] || sb != [sw[1]] {
            return Err(Error::shape(
                "x [N,d], weight [d,u], bias [u]",
                format!("{sx:?}, {sw:?}, {sb:?}"),
            ));
        }
        let (n, d, u) = (sx[0], sx[1], sw[1]);
        let mut out = Vec::with_capacity(n * u);
        for _ in 0..n {
            out.extend_from_slice(self.value(bias).data());
        }
        T::gemm(
            n,
            d,
            u,
            self.value(x).data(),
            false,
            self.value(weight).data(),
            false,
            T::one(),
            &mut out,
        );
        self.push(Tensor::raw(vec![n, u], out), &[x, weight, bias], DenseOp { n, d, u })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check, ReduceKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_and_zero_weights() {
        let mut g = Graph::<f32>::new();
        let x = g.leaf(Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let mut eye = vec![0.0; 9];
        (0..3).for_each(|i| eye[i * 4] = 1.0);
        let w = g.leaf(Tensor::from_vec(&[3, 3], eye).unwrap());
        let b = g.leaf(Tensor::zeros(&[3]).unwrap());
        let y = g.dense(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), g.value(x).data());

        let wz = g.leaf(Tensor::zeros(&[3, 2]).unwrap());
        let bb = g.leaf(Tensor::from_vec(&[2], vec![0.5, -1.5]).unwrap());
        let y = g.dense(x, wz, bb).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, -1.5, 0.5, -1.5]);
        assert!(matches!(g.dense(x, bb, b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn matches_matmul_plus_add() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut g = Graph::<f64>::new();
        let x = g.leaf(rand_tensor(&[4, 5], &mut rng));
        let w = g.leaf(rand_tensor(&[5, 3], &mut rng));
        let b = g.leaf(rand_tensor(&[3], &mut rng));
        let fused = g.dense(x, w, b).unwrap();
        let mm = g.matmul(x, w).unwrap();
        let composed = g.add(mm, b).unwrap();
        for (a, e) in g.value(fused).data().iter().zip(g.value(composed).data()) {
            assert!((a - e).abs() < 1e-6);
        }
    }

    #[test]
    fn gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let params = vec![
            rand_tensor(&[3, 4], &mut rng),
            rand_tensor(&[4, 2], &mut rng),
            rand_tensor(&[2], &mut rng),
        ];
        let err = grad_check(
            |g, p| {
                let y = g.dense(p[0], p[1], p[2])?;
                let y2 = g.mul(y, y)?;
                g.reduce(y2, &[0, 1], ReduceKind::Sum, false)
            },
            &params,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
