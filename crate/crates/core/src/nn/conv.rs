use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{join, Module, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Valid (unpadded) 1-D convolution. Input and output are channel-major
/// `[channels][length]`; weights are `[out][in][kernel]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    pub stride: usize,
}

impl<S: Scalar> Conv1d<S> {
    pub fn new<R: Rng>(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, rng: &mut R) -> Self {
        assert!(kernel >= 1 && stride >= 1);
        let fan_in = in_ch * kernel;
        let a = (6.0 / fan_in as f64).sqrt();
        let w = (0..out_ch * fan_in).map(|_| S::of(rng.gen_range(-a..a))).collect();
        Self {
            weight: Tensor::from_vec(&[out_ch, in_ch, kernel], w).unwrap().tracked(),
            bias: Tensor::zeros(&[out_ch]).tracked(),
            stride,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn output_len(&self, len: usize) -> Option<usize> {
        (len >= self.kernel()).then(|| (len - self.kernel()) / self.stride + 1)
    }

    pub fn forward(&self, x: &[S], len: usize) -> Vec<S> {
        let (ci, co, k) = (self.in_channels(), self.out_channels(), self.kernel());
        let out_len = self.output_len(len).expect("input shorter than kernel");
        let w = self.weight.data();
        let mut y = vec![S::zero(); co * out_len];
        for o in 0..co {
            let yo = &mut y[o * out_len..(o + 1) * out_len];
            yo.iter_mut().for_each(|v| *v = self.bias.data()[o]);
            for c in 0..ci {
                let wk = &w[(o * ci + c) * k..(o * ci + c + 1) * k];
                let xc = &x[c * len..(c + 1) * len];
                for (pos, v) in yo.iter_mut().enumerate() {
                    let start = pos * self.stride;
                    let mut acc = S::zero();
                    for (a, b) in wk.iter().zip(&xc[start..start + k]) {
                        acc += *a * *b;
                    }
                    *v += acc;
                }
            }
        }
        y
    }

    pub fn backward(&mut self, x: &[S], len: usize, dy: &[S], dx: Option<&mut [S]>) {
        let (ci, co, k) = (self.in_channels(), self.out_channels(), self.kernel());
        let out_len = dy.len() / co;
        let stride = self.stride;
        {
            let db = self.bias.grad_mut();
            for o in 0..co {
                db[o] += dy[o * out_len..(o + 1) * out_len].iter().copied().sum::<S>();
            }
        }
        let (w, dw) = self.weight.parts_mut();
        for o in 0..co {
            let dyo = &dy[o * out_len..(o + 1) * out_len];
            for c in 0..ci {
                let base = (o * ci + c) * k;
                let xc = &x[c * len..(c + 1) * len];
                for (pos, &g) in dyo.iter().enumerate() {
                    if g == S::zero() {
                        continue;
                    }
                    let start = pos * stride;
                    for j in 0..k {
                        dw[base + j] += g * xc[start + j];
                    }
                }
            }
        }
        if let Some(dx) = dx {
            for o in 0..co {
                let dyo = &dy[o * out_len..(o + 1) * out_len];
                for c in 0..ci {
                    let wk = &w[(o * ci + c) * k..(o * ci + c + 1) * k];
                    let dxc = &mut dx[c * len..(c + 1) * len];
                    for (pos, &g) in dyo.iter().enumerate() {
                        if g == S::zero() {
                            continue;
                        }
                        let start = pos * stride;
                        for j in 0..k {
                            dxc[start + j] += g * wk[j];
                        }
                    }
                }
            }
        }
    }
}

impl<S: Scalar> Module<S> for Conv1d<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<S>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<S>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// Shape of the convolution stack applied to every amplitude vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvConfig {
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
}

impl Default for ConvConfig {
    fn default() -> Self {
        Self { channels: vec![16, 32, 32], kernel: 5, stride: 2 }
    }
}

impl ConvConfig {
    /// Per-layer output lengths for an input of `len` samples.
    pub fn layer_lengths(&self, len: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.channels.len());
        let mut cur = len;
        for (i, _) in self.channels.iter().enumerate() {
            if cur < self.kernel {
                return Err(Error::Config(format!(
                    "conv layer {} needs at least {} samples, gets {cur} (input length {len})",
                    i + 1,
                    self.kernel
                )));
            }
            cur = (cur - self.kernel) / self.stride + 1;
            out.push(cur);
        }
        Ok(out)
    }

    /// Flattened feature length for an input of `len` samples.
    pub fn output_len(&self, len: usize) -> Result<usize> {
        let lens = self.layer_lengths(len)?;
        Ok(lens.last().copied().unwrap_or(len) * self.channels.last().copied().unwrap_or(1))
    }
}

/// Stacked convolutions with ReLU after each layer, over a single-channel input.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvStack<S> {
    pub layers: Vec<Conv1d<S>>,
    input_len: usize,
}

/// Post-activation outputs of each layer; `acts[0]` is the input.
#[derive(Clone, Debug, Default)]
pub struct ConvTrace<S> {
    pub acts: Vec<Vec<S>>,
}

impl<S: Scalar> ConvStack<S> {
    pub fn new<R: Rng>(cfg: &ConvConfig, input_len: usize, rng: &mut R) -> Result<Self> {
        cfg.layer_lengths(input_len)?;
        let mut in_ch = 1;
        let layers = cfg
            .channels
            .iter()
            .map(|&c| {
                let l = Conv1d::new(in_ch, c, cfg.kernel, cfg.stride, rng);
                in_ch = c;
                l
            })
            .collect();
        Ok(Self { layers, input_len })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    fn lengths(&self) -> Vec<usize> {
        let mut lens = vec![self.input_len];
        for l in &self.layers {
            let cur = *lens.last().unwrap();
            lens.push(l.output_len(cur).unwrap());
        }
        lens
    }

    pub fn output_len(&self) -> usize {
        match self.layers.last() {
            Some(l) => l.out_channels() * *self.lengths().last().unwrap(),
            None => self.input_len,
        }
    }

    pub fn forward_trace(&self, x: &[S]) -> Result<ConvTrace<S>> {
        if x.len() != self.input_len {
            return Err(Error::Shape { expected: self.input_len.to_string(), actual: x.len().to_string() });
        }
        let lens = self.lengths();
        let mut acts = vec![x.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(acts.last().unwrap(), lens[i]);
            super::relu_inplace(&mut y);
            acts.push(y);
        }
        Ok(ConvTrace { acts })
    }

    pub fn forward(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.forward_trace(x)?.acts.pop().unwrap())
    }

    pub fn backward(&mut self, trace: &ConvTrace<S>, dy: &[S], want_dx: bool) -> Option<Vec<S>> {
        let lens = self.lengths();
        let mut grad = dy.to_vec();
        for i in (0..self.layers.len()).rev() {
            super::relu_backward(&trace.acts[i + 1], &mut grad);
            let need = i > 0 || want_dx;
            let mut dx = if need { vec![S::zero(); trace.acts[i].len()] } else { Vec::new() };
            self.layers[i].backward(&trace.acts[i], lens[i], &grad, need.then_some(dx.as_mut_slice()));
            if !need {
                return None;
            }
            grad = dx;
        }
        Some(grad)
    }
}

impl<S: Scalar> Module<S> for ConvStack<S> {
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
