use crate::error::Result;
use crate::tensor::{Backward, Graph, Scalar, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

struct ActivationOp(Activation);

impl<T: Scalar> Backward<T> for ActivationOp {
    fn name(&self) -> &'static str {
        match self.0 {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    fn backward(&self, inputs: &[&Tensor<T>], output: &Tensor<T>, grad: &[T], _needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let gx = match self.0 {
            Activation::Relu => inputs[0]
                .data()
                .iter()
                .zip(grad)
                .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                .collect(),
            Activation::Sigmoid => output
                .data()
                .iter()
                .zip(grad)
                .map(|(&y, &g)| g * y * (T::one() - y))
                .collect(),
        };
        vec![Some(gx)]
    }
}

fn sigmoid<T: Scalar>(v: T) -> T {
    // Split on sign so exp never overflows.
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Graph<T> {
    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        let t = self.value(x);
        let data: Vec<T> = match kind {
            Activation::Relu => t.data().iter().map(|&v| v.max(T::zero())).collect(),
            Activation::Sigmoid => t.data().iter().map(|&v| sigmoid(v)).collect(),
        };
        let out = Tensor::raw(t.shape().to_vec(), data);
        self.push(out, &[x], ActivationOp(kind))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Relu)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Sigmoid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use crate::tensor::ReduceKind;

    #[test]
    fn definitions() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap());
        let r = g.relu(x).unwrap();
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
        let s = g.sigmoid(x).unwrap();
        assert_eq!(g.value(s).data()[1], 0.5);
        let big = g.leaf(Tensor::from_vec(&[2], vec![-800.0, 800.0]).unwrap());
        let s = g.sigmoid(big).unwrap();
        assert_eq!(g.value(s).data(), &[0.0, 1.0]);
    }

    #[test]
    fn relu_dead_region() {
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::scalar(-1.0));
        let y = g.relu(x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0]);
    }

    #[test]
    fn gradients() {
        // keep inputs away from the relu kink
        let x = Tensor::from_vec(&[2, 3], vec![-0.7, 0.4, 1.3, -2.0, 0.25, 0.9]).unwrap();
        for kind in [Activation::Relu, Activation::Sigmoid] {
            let err = grad_check(
                |g, p| {
                    let y = g.activation(p[0], kind)?;
                    let y2 = g.mul(y, y)?;
                    g.reduce(y2, &[0, 1], ReduceKind::Sum, false)
                },
                std::slice::from_ref(&x),
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-6, "{kind:?}: {err}");
        }
    }
}
