use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Local vector-Jacobian rule of one recorded operation.
pub(crate) trait Backward<T: Scalar> {
    fn name(&self) -> &'static str;

    /// Returns one entry per input; `needs[i]` is false for inputs that do
    /// not lead to any gradient-requiring leaf, and those entries may be
    /// `None`.
    fn backward(&self, inputs: &[&Tensor<T>], output: &Tensor<T>, grad: &[T], needs: &[bool]) -> Vec<Option<Vec<T>>>;
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    inputs: Vec<usize>,
    op: Option<Box<dyn Backward<T>>>,
    tracked: bool,
}

/// Tape of operations in evaluation order.
///
/// Nodes are appended as operations run, so every node's inputs precede it
/// and a single reverse sweep is a valid backward traversal. A graph is
/// built per forward pass and belongs to one thread.
pub struct Graph<T: Scalar = f32> {
    nodes: Vec<Node<T>>,
    check_finite: bool,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            check_finite: cfg!(debug_assertions),
        }
    }

    /// Turns the per-op finiteness check on or off. It defaults to on in
    /// debug builds only.
    pub fn set_check_finite(&mut self, on: bool) {
        self.check_finite = on;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input. Gradients are collected for it iff
    /// `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        let tracked = t.requires_grad();
        self.nodes.push(Node {
            value: t,
            inputs: Vec::new(),
            op: None,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf that requires a gradient.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t.with_grad())
    }

    pub(crate) fn push<B: Backward<T> + 'static>(&mut self, value: Tensor<T>, inputs: &[Var], op: B) -> Result<Var> {
        if self.check_finite && !value.all_finite() {
            return Err(Error::NonFinite(op.name()));
        }
        let tracked = inputs.iter().any(|v| self.nodes[v.0].tracked);
        let (inputs, op): (Vec<usize>, Option<Box<dyn Backward<T>>>) = if tracked {
            (inputs.iter().map(|v| v.0).collect(), Some(Box::new(op)))
        } else {
            (Vec::new(), None)
        };
        self.nodes.push(Node {
            value,
            inputs,
            op,
            tracked,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.value.zero_grad();
        }
    }

    /// Moves a recorded value out, leaving an empty placeholder.
    pub fn take(&mut self, v: Var) -> Tensor<T> {
        let placeholder = Tensor::raw(vec![0], Vec::new());
        std::mem::replace(&mut self.nodes[v.0].value, placeholder)
    }

    /// Reverse sweep from a scalar `loss`. Leaf gradients accumulate across
    /// calls until [`Graph::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = loss.0;
        let value = &self.nodes[root].value;
        if value.len() != 1 {
            return Err(Error::NotScalar(value.shape().to_vec()));
        }
        if !self.nodes[root].tracked {
            return Err(Error::DisconnectedGraph);
        }

        let mut grads: Vec<Option<Vec<T>>> = Vec::new();
        grads.resize_with(root + 1, || None);
        grads[root] = Some(vec![T::one()]);
        let mut leaf_grads = Vec::new();

        for i in (0..=root).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let Some(op) = &node.op else {
                if node.value.requires_grad() {
                    leaf_grads.push((i, g));
                }
                continue;
            };
            let inputs: Vec<&Tensor<T>> = node.inputs.iter().map(|&j| &self.nodes[j].value).collect();
            let needs: Vec<bool> = node.inputs.iter().map(|&j| self.nodes[j].tracked).collect();
            let input_grads = op.backward(&inputs, &node.value, &g, &needs);
            debug_assert_eq!(input_grads.len(), node.inputs.len());
            for ((&j, gi), need) in node.inputs.iter().zip(input_grads).zip(needs) {
                let Some(gi) = gi else { continue };
                if !need {
                    continue;
                }
                debug_assert_eq!(gi.len(), self.nodes[j].value.len());
                match &mut grads[j] {
                    Some(acc) => acc.iter_mut().zip(&gi).for_each(|(a, &b)| *a = *a + b),
                    slot => *slot = Some(gi),
                }
            }
        }

        for (i, g) in leaf_grads {
            self.nodes[i].value.accumulate_grad(&g);
        }
        Ok(())
    }
}
