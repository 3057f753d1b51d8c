use rand::Rng;

use super::tensor::{join, Module, Tensor};
use crate::scalar::{axpy, dot, Scalar};

/// Affine map `y = W x + b` with `W` stored `[out][in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Scalar> Dense<S> {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        let w = (0..inputs * outputs).map(|_| S::of(rng.gen_range(-a..a))).collect();
        Self {
            weight: Tensor::from_vec(&[outputs, inputs], w).unwrap().tracked(),
            bias: Tensor::zeros(&[outputs]).tracked(),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[outputs, inputs]).tracked(),
            bias: Tensor::zeros(&[outputs]).tracked(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward_into(&self, x: &[S], y: &mut [S]) {
        let n = self.inputs();
        debug_assert_eq!(x.len(), n);
        let w = self.weight.data();
        for ((yo, row), b) in y.iter_mut().zip(w.chunks_exact(n)).zip(self.bias.data()) {
            *yo = dot(row, x) + *b;
        }
    }

    pub fn forward(&self, x: &[S]) -> Vec<S> {
        let mut y = vec![S::zero(); self.outputs()];
        self.forward_into(x, &mut y);
        y
    }

    /// Accumulates parameter gradients for upstream gradient `dy`; adds `W^T dy` into `dx` when given.
    pub fn backward(&mut self, x: &[S], dy: &[S], dx: Option<&mut [S]>) {
        let n = self.inputs();
        let (w, dw) = self.weight.parts_mut();
        for (o, &g) in dy.iter().enumerate() {
            if g != S::zero() {
                axpy(g, x, &mut dw[o * n..(o + 1) * n]);
            }
        }
        for (db, &g) in self.bias.grad_mut().iter_mut().zip(dy) {
            *db += g;
        }
        if let Some(dx) = dx {
            for (o, &g) in dy.iter().enumerate() {
                if g != S::zero() {
                    axpy(g, &w[o * n..(o + 1) * n], dx);
                }
            }
        }
    }
}

impl<S: Scalar> Module<S> for Dense<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<S>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<S>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// Dense stack with ReLU between layers and a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<S> {
    pub layers: Vec<Dense<S>>,
}

/// Activations of one [`Mlp`] pass; `acts[0]` is the input, `acts[i]` the output of layer `i - 1`.
#[derive(Clone, Debug, Default)]
pub struct MlpTrace<S> {
    pub acts: Vec<Vec<S>>,
}

impl<S> MlpTrace<S> {
    pub fn output(&self) -> &[S] {
        self.acts.last().expect("empty trace")
    }
}

impl<S: Scalar> Mlp<S> {
    /// `sizes = [in, hidden..., out]`.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        Self { layers: sizes.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect() }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    /// `[in, hidden..., out]`, as passed to [`Mlp::new`].
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.inputs()];
        s.extend(self.layers.iter().map(|l| l.outputs()));
        s
    }

    pub fn forward_trace(&self, x: &[S]) -> MlpTrace<S> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(acts.last().unwrap());
            if i < last {
                super::relu_inplace(&mut y);
            }
            acts.push(y);
        }
        MlpTrace { acts }
    }

    pub fn forward(&self, x: &[S]) -> Vec<S> {
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if i < last {
                super::relu_inplace(&mut h);
            }
        }
        h
    }

    /// Back-propagates `dy` through the stack; returns the input gradient when `want_dx`.
    pub fn backward(&mut self, trace: &MlpTrace<S>, dy: &[S], want_dx: bool) -> Option<Vec<S>> {
        let mut grad = dy.to_vec();
        let n = self.layers.len();
        for i in (0..n).rev() {
            if i < n - 1 {
                super::relu_backward(&trace.acts[i + 1], &mut grad);
            }
            let need = i > 0 || want_dx;
            let mut dx = if need { vec![S::zero(); self.layers[i].inputs()] } else { Vec::new() };
            self.layers[i].backward(&trace.acts[i], &grad, need.then_some(dx.as_mut_slice()));
            if !need {
                return None;
            }
            grad = dx;
        }
        Some(grad)
    }
}

impl<S: Scalar> Module<S> for Mlp<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<S>)) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<S>)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}
