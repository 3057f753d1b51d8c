//! Standard LSTM cell (input, forget, cell-candidate, output gates) and a
//! stacked sequence encoder that returns the top layer's last hidden state.

use rand::Rng;

use super::tensor::{join, Module, Tensor};
use super::{sigmoid, tanh};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};

/// One LSTM layer. Gate rows are stacked `[i; f; g; o]`, each `hidden` long.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer<S> {
    /// `[4H][input]`
    pub w_input: Tensor<S>,
    /// `[4H][H]`
    pub w_hidden: Tensor<S>,
    /// `[4H]`
    pub bias: Tensor<S>,
}

/// Per-step activations kept for back-propagation through time.
#[derive(Clone, Debug, Default)]
pub struct LstmTrace<S> {
    pub steps: usize,
    /// Post-activation gates per step, `[steps][4H]`.
    pub gates: Vec<S>,
    /// Cell states per step, `[steps][H]`.
    pub cells: Vec<S>,
    /// Hidden states per step, `[steps][H]`.
    pub hidden: Vec<S>,
}

impl<S: Scalar> LstmLayer<S> {
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let a = 1.0 / (hidden as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| S::of(rng.gen_range(-a..a))).collect::<Vec<S>>();
        let wi = draw(4 * hidden * input);
        let wh = draw(4 * hidden * hidden);
        let mut b = vec![S::zero(); 4 * hidden];
        // forget-gate bias starts open
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = S::one());
        Self {
            w_input: Tensor::from_vec(&[4 * hidden, input], wi).unwrap().tracked(),
            w_hidden: Tensor::from_vec(&[4 * hidden, hidden], wh).unwrap().tracked(),
            bias: Tensor::from_vec(&[4 * hidden], b).unwrap().tracked(),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_input: Tensor::zeros(&[4 * hidden, input]).tracked(),
            w_hidden: Tensor::zeros(&[4 * hidden, hidden]).tracked(),
            bias: Tensor::zeros(&[4 * hidden]).tracked(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_input.shape()[1]
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hidden.shape()[1]
    }

    /// Runs the layer over `xs` (`[steps][input]`) from zero state.
    pub fn forward(&self, xs: &[S]) -> LstmTrace<S> {
        let (n_in, h) = (self.input_size(), self.hidden_size());
        let steps = xs.len() / n_in;
        let wi = self.w_input.data();
        let wh = self.w_hidden.data();
        let b = self.bias.data();
        let mut tr = LstmTrace {
            steps,
            gates: vec![S::zero(); steps * 4 * h],
            cells: vec![S::zero(); steps * h],
            hidden: vec![S::zero(); steps * h],
        };
        let zeros = vec![S::zero(); h];
        for t in 0..steps {
            let x = &xs[t * n_in..(t + 1) * n_in];
            let (h_prev, c_prev) = if t == 0 {
                (&zeros[..], &zeros[..])
            } else {
                (&tr.hidden[(t - 1) * h..t * h], &tr.cells[(t - 1) * h..t * h])
            };
            let mut g = vec![S::zero(); 4 * h];
            for r in 0..4 * h {
                g[r] = b[r] + dot(&wi[r * n_in..(r + 1) * n_in], x) + dot(&wh[r * h..(r + 1) * h], h_prev);
            }
            let mut c_new = vec![S::zero(); h];
            let mut h_new = vec![S::zero(); h];
            for j in 0..h {
                let i = sigmoid(g[j]);
                let f = sigmoid(g[h + j]);
                let gg = tanh(g[2 * h + j]);
                let o = sigmoid(g[3 * h + j]);
                g[j] = i;
                g[h + j] = f;
                g[2 * h + j] = gg;
                g[3 * h + j] = o;
                c_new[j] = f * c_prev[j] + i * gg;
                h_new[j] = o * tanh(c_new[j]);
            }
            tr.gates[t * 4 * h..(t + 1) * 4 * h].copy_from_slice(&g);
            tr.cells[t * h..(t + 1) * h].copy_from_slice(&c_new);
            tr.hidden[t * h..(t + 1) * h].copy_from_slice(&h_new);
        }
        tr
    }

    /// Back-propagation through time. `dh` holds external gradients for every
    /// step's hidden output (`[steps][H]`). Returns input gradients when `want_dx`.
    pub fn backward(&mut self, xs: &[S], tr: &LstmTrace<S>, dh: &[S], want_dx: bool) -> Option<Vec<S>> {
        let (n_in, h) = (self.input_size(), self.hidden_size());
        let steps = tr.steps;
        let mut dxs = if want_dx { vec![S::zero(); steps * n_in] } else { Vec::new() };
        let mut dh_next = vec![S::zero(); h];
        let mut dc_next = vec![S::zero(); h];
        let mut da = vec![S::zero(); 4 * h];
        let zeros = vec![S::zero(); h];
        let one = S::one();

        let (wi, dwi) = self.w_input.parts_mut();
        let (wh, dwh) = self.w_hidden.parts_mut();
        let dbias = self.bias.grad_mut();
        for t in (0..steps).rev() {
            let gates = &tr.gates[t * 4 * h..(t + 1) * 4 * h];
            let c = &tr.cells[t * h..(t + 1) * h];
            let (h_prev, c_prev) = if t == 0 {
                (&zeros[..], &zeros[..])
            } else {
                (&tr.hidden[(t - 1) * h..t * h], &tr.cells[(t - 1) * h..t * h])
            };
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let dhj = dh[t * h + j] + dh_next[j];
                let tc = tanh(c[j]);
                let dc = dc_next[j] + dhj * o * (one - tc * tc);
                da[j] = dc * g * i * (one - i);
                da[h + j] = dc * c_prev[j] * f * (one - f);
                da[2 * h + j] = dc * i * (one - g * g);
                da[3 * h + j] = dhj * tc * o * (one - o);
                dc_next[j] = dc * f;
            }
            let x = &xs[t * n_in..(t + 1) * n_in];
            for (r, &a) in da.iter().enumerate() {
                axpy(a, x, &mut dwi[r * n_in..(r + 1) * n_in]);
            }
            if t > 0 {
                for (r, &a) in da.iter().enumerate() {
                    axpy(a, h_prev, &mut dwh[r * h..(r + 1) * h]);
                }
            }
            for (db, &a) in dbias.iter_mut().zip(&da) {
                *db += a;
            }
            dh_next.iter_mut().for_each(|v| *v = S::zero());
            for (r, &a) in da.iter().enumerate() {
                axpy(a, &wh[r * h..(r + 1) * h], &mut dh_next);
            }
            if want_dx {
                let dx = &mut dxs[t * n_in..(t + 1) * n_in];
                for (r, &a) in da.iter().enumerate() {
                    axpy(a, &wi[r * n_in..(r + 1) * n_in], dx);
                }
            }
        }
        want_dx.then_some(dxs)
    }
}

impl<S: Scalar> Module<S> for LstmLayer<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<S>)) {
        f(&join(prefix, "w_input"), &self.w_input);
        f(&join(prefix, "w_hidden"), &self.w_hidden);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<S>)) {
        f(&join(prefix, "w_input"), &mut self.w_input);
        f(&join(prefix, "w_hidden"), &mut self.w_hidden);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// Stacked LSTM returning the last hidden state of the top layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm<S> {
    pub layers: Vec<LstmLayer<S>>,
}

#[derive(Clone, Debug, Default)]
pub struct StackTrace<S> {
    /// Layer inputs; `inputs[0]` is the sequence fed to the stack.
    pub inputs: Vec<Vec<S>>,
    pub layers: Vec<LstmTrace<S>>,
}

impl<S: Scalar> Lstm<S> {
    pub fn new<R: Rng>(input: usize, hidden: usize, num_layers: usize, rng: &mut R) -> Self {
        assert!(num_layers >= 1);
        let layers = (0..num_layers)
            .map(|i| LstmLayer::new(if i == 0 { input } else { hidden }, hidden, rng))
            .collect();
        Self { layers }
    }

    pub fn zeros(input: usize, hidden: usize, num_layers: usize) -> Self {
        let layers = (0..num_layers)
            .map(|i| LstmLayer::zeros(if i == 0 { input } else { hidden }, hidden))
            .collect();
        Self { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden_size()
    }

    pub fn forward_trace(&self, xs: &[S]) -> Result<StackTrace<S>> {
        let n_in = self.input_size();
        if xs.is_empty() {
            return Err(Error::Empty("LSTM input sequence".into()));
        }
        if xs.len() % n_in != 0 {
            return Err(Error::Shape {
                expected: format!("multiple of {n_in}"),
                actual: xs.len().to_string(),
            });
        }
        let mut st = StackTrace { inputs: vec![xs.to_vec()], layers: Vec::with_capacity(self.layers.len()) };
        for layer in &self.layers {
            let tr = layer.forward(st.inputs.last().unwrap());
            st.inputs.push(tr.hidden.clone());
            st.layers.push(tr);
        }
        st.inputs.pop();
        Ok(st)
    }

    /// Final hidden state of the top layer.
    pub fn forward(&self, xs: &[S]) -> Result<Vec<S>> {
        let st = self.forward_trace(xs)?;
        Ok(Self::last_hidden(&st).to_vec())
    }

    pub fn last_hidden(st: &StackTrace<S>) -> &[S] {
        let top = st.layers.last().unwrap();
        let h = top.hidden.len() / top.steps;
        &top.hidden[(top.steps - 1) * h..]
    }

    /// Back-propagates a gradient on the final top-layer hidden state.
    pub fn backward(&mut self, st: &StackTrace<S>, dh_last: &[S], want_dx: bool) -> Option<Vec<S>> {
        let steps = st.layers[0].steps;
        let h = self.hidden_size();
        let mut dh = vec![S::zero(); steps * h];
        dh[(steps - 1) * h..].copy_from_slice(dh_last);
        let n = self.layers.len();
        for i in (0..n).rev() {
            let need = i > 0 || want_dx;
            let dx = self.layers[i].backward(&st.inputs[i], &st.layers[i], &dh, need);
            match dx {
                Some(dx) if i > 0 => dh = dx,
                other => return other,
            }
        }
        None
    }
}

impl<S: Scalar> Module<S> for Lstm<S> {
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
