use crate::error::{Error, Result};
use crate::tensor::{Backward, Graph, Scalar, Tensor, Var};

/// Row-wise softmax of a `[N, K]` buffer, stabilised by subtracting each
/// row's maximum.
pub fn softmax_rows<T: Scalar>(logits: &[T], k: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(k) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        out.extend(row.iter().map(|&v| (v - m).exp()));
        let z: T = out[start..].iter().copied().sum();
        out[start..].iter_mut().for_each(|v| *v = *v / z);
    }
    out
}

struct SoftmaxXentOp {
    labels: Vec<usize>,
    probs: Vec<f64>,
    k: usize,
}

impl<T: Scalar> Backward<T> for SoftmaxXentOp {
    fn name(&self) -> &'static str {
        "softmax_xent"
    }

    fn backward(
        &self,
        _inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        grad: &[T],
        _needs: &[bool],
    ) -> Vec<Option<Vec<T>>> {
        let n = self.labels.len();
        let scale = grad[0].as_f64() / n as f64;
        let mut g: Vec<T> = self.probs.iter().map(|&p| T::of(p * scale)).collect();
        for (i, &l) in self.labels.iter().enumerate() {
            let j = i * self.k + l;
            g[j] = T::of((self.probs[j] - 1.0) * scale);
        }
        vec![Some(g)]
    }
}

/// Mean `−log softmax(logits)[label]` over rows, via log-sum-exp in f64.
pub fn cross_entropy<T: Scalar>(logits: &[T], labels: &[usize], k: usize) -> f64 {
    let mut loss = 0.0;
    for (row, &label) in logits.chunks_exact(k).zip(labels) {
        let m = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v.as_f64() - m).exp()).sum::<f64>().ln();
        loss += lse - row[label].as_f64();
    }
    loss / labels.len() as f64
}

impl<T: Scalar> Graph<T> {
    /// Mean softmax cross-entropy of `logits: [N, K]` against integer
    /// labels. Returns the scalar loss and the `[N, K]` probabilities.
    pub fn softmax_xent(&mut self, logits: Var, labels: &[usize]) -> Result<(Var, Tensor<T>)> {
        let t = self.value(logits);
        if t.rank() != 2 || t.shape()[1] < 2 || t.shape()[0] != labels.len() {
            return Err(Error::shape(format!("[{}, K >= 2] logits", labels.len()), t.shape()));
        }
        let k = t.shape()[1];
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label: bad, classes: k });
        }
        // log-sum-exp in f64 keeps the f32 loss accurate near saturation
        let data: Vec<f64> = t.data().iter().map(|v| v.as_f64()).collect();
        let probs = softmax_rows(&data, k);
        let loss = cross_entropy(&data, labels, k);

        let probs_t = Tensor::raw(t.shape().to_vec(), probs.iter().map(|&p| T::of(p)).collect());
        let op = SoftmaxXentOp {
            labels: labels.to_vec(),
            probs,
            k,
        };
        let var = self.push(Tensor::scalar(T::of(loss)), &[logits], op)?;
        Ok((var, probs_t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_ln_k() {
        let mut g = Graph::<f64>::new();
        let z = g.leaf(Tensor::zeros(&[2, 3]).unwrap());
        let (l, p) = g.softmax_xent(z, &[0, 2]).unwrap();
        assert!((g.value(l).data()[0] - 3f64.ln()).abs() < 1e-12);
        assert!(p.data().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn saturated_margin() {
        let mut g = Graph::<f32>::new();
        let z = g.leaf(Tensor::from_vec(&[1, 3], vec![50.0, 0.0, 0.0]).unwrap());
        let (l, _) = g.softmax_xent(z, &[0]).unwrap();
        assert!(g.value(l).data()[0] < 1e-6);
    }

    #[test]
    fn rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let data: Vec<f32> = (0..40).map(|_| rng.random_range(-20.0..20.0)).collect();
        let p = softmax_rows(&data, 5);
        for row in p.chunks_exact(5) {
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn label_out_of_range() {
        let mut g = Graph::<f32>::new();
        let z = g.leaf(Tensor::zeros(&[2, 3]).unwrap());
        assert!(matches!(
            g.softmax_xent(z, &[0, 3]),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn gradient_is_probs_minus_onehot() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let logits = Tensor::from_vec(&[4, 3], (0..12).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let labels = [0, 2, 1, 2];
        let err = grad_check(
            |g, p| Ok(g.softmax_xent(p[0], &labels)?.0),
            std::slice::from_ref(&logits),
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");

        let mut g = Graph::<f64>::new();
        let z = g.param(logits);
        let (l, probs) = g.softmax_xent(z, &labels).unwrap();
        g.backward(l).unwrap();
        for (i, (&gv, &p)) in g.grad(z).unwrap().iter().zip(probs.data()).enumerate() {
            let onehot = if labels[i / 3] == i % 3 { 1.0 } else { 0.0 };
            assert!((gv - (p - onehot) / 4.0).abs() < 1e-12);
        }
    }
}
