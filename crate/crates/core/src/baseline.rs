//! Comparison models that read a single transmission pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Classifier, Sample};
use crate::nn::tensor::join;
use crate::nn::{cross_entropy, softmax, softmax_cross_entropy_grad, Dense, Lstm, Mlp, Module, Tensor};
use crate::rng::{rng_for, TAG_INIT};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Dense stack on the current amplitude vector.
    Fcn,
    /// Stacked LSTM on the raw window matrix.
    LstmOnly,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fcn => "fcn",
            Self::LstmOnly => "lstm_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub pair: usize,
    pub vector_len: usize,
    pub lag: usize,
    pub fcn_hidden: Vec<usize>,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub class_count: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            pair: 0,
            vector_len: 16,
            lag: 20,
            fcn_hidden: vec![64, 32],
            lstm_hidden: 16,
            lstm_layers: 2,
            class_count: 4,
            seed: 0,
        }
    }
}

fn window<'a, S: Scalar>(x: &Sample<'a, S>, pair: usize, len: usize) -> Result<&'a [S]> {
    let w = x
        .pairs
        .get(pair)
        .ok_or_else(|| Error::Dimension { model: format!("pair {pair}"), dataset: format!("{} pairs", x.pairs.len()) })?
        .window;
    if w.len() != len {
        return Err(Error::Dimension { model: format!("{len} window values"), dataset: format!("{} values", w.len()) });
    }
    Ok(w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FcnBaseline<S> {
    pub cfg: BaselineConfig,
    pub mlp: Mlp<S>,
}

impl<S: Scalar> FcnBaseline<S> {
    pub fn new(cfg: BaselineConfig) -> Self {
        let mut rng = rng_for(&[cfg.seed, TAG_INIT, 2]);
        let mut sizes = vec![cfg.vector_len];
        sizes.extend(&cfg.fcn_hidden);
        sizes.push(cfg.class_count);
        Self { mlp: Mlp::new(&sizes, &mut rng), cfg }
    }

    fn current<'a>(&self, x: &Sample<'a, S>) -> Result<&'a [S]> {
        let w = window(x, self.cfg.pair, (self.cfg.lag + 1) * self.cfg.vector_len)?;
        Ok(&w[w.len() - self.cfg.vector_len..])
    }
}

impl<S: Scalar> Classifier<S> for FcnBaseline<S> {
    fn class_count(&self) -> usize {
        self.cfg.class_count
    }

    fn probs(&self, x: &Sample<S>) -> Result<Vec<S>> {
        Ok(softmax(&self.mlp.forward(self.current(x)?)))
    }

    fn backprop(&mut self, x: &Sample<S>, label: usize, scale: S) -> Result<(f64, Vec<S>)> {
        let tr = self.mlp.forward_trace(self.current(x)?);
        let probs = softmax(tr.output());
        self.mlp.backward(&tr, &softmax_cross_entropy_grad(&probs, label, scale), false);
        Ok((cross_entropy(&probs, label), probs))
    }
}

impl<S: Scalar> Module<S> for FcnBaseline<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<S>)) {
        self.mlp.visit(&join(prefix, "fcn"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<S>)) {
        self.mlp.visit_mut(&join(prefix, "fcn"), f);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmBaseline<S> {
    pub cfg: BaselineConfig,
    pub lstm: Lstm<S>,
    pub out: Dense<S>,
}

impl<S: Scalar> LstmBaseline<S> {
    pub fn new(cfg: BaselineConfig) -> Self {
        let mut rng = rng_for(&[cfg.seed, TAG_INIT, 3]);
        let lstm = Lstm::new(cfg.vector_len, cfg.lstm_hidden, cfg.lstm_layers, &mut rng);
        let out = Dense::new(cfg.lstm_hidden, cfg.class_count, &mut rng);
        Self { cfg, lstm, out }
    }

    fn seq<'a>(&self, x: &Sample<'a, S>) -> Result<&'a [S]> {
        window(x, self.cfg.pair, (self.cfg.lag + 1) * self.cfg.vector_len)
    }
}

impl<S: Scalar> Classifier<S> for LstmBaseline<S> {
    fn class_count(&self) -> usize {
        self.cfg.class_count
    }

    fn probs(&self, x: &Sample<S>) -> Result<Vec<S>> {
        Ok(softmax(&self.out.forward(&self.lstm.forward(self.seq(x)?)?)))
    }

    fn backprop(&mut self, x: &Sample<S>, label: usize, scale: S) -> Result<(f64, Vec<S>)> {
        let st = self.lstm.forward_trace(self.seq(x)?)?;
        let h = Lstm::last_hidden(&st).to_vec();
        let probs = softmax(&self.out.forward(&h));
        let dlogits = softmax_cross_entropy_grad(&probs, label, scale);
        let mut dh = vec![S::zero(); h.len()];
        self.out.backward(&h, &dlogits, Some(&mut dh));
        self.lstm.backward(&st, &dh, false);
        Ok((cross_entropy(&probs, label), probs))
    }
}

impl<S: Scalar> Module<S> for LstmBaseline<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<S>)) {
        self.lstm.visit(&join(prefix, "lstm"), f);
        self.out.visit(&join(prefix, "out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<S>)) {
        self.lstm.visit_mut(&join(prefix, "lstm"), f);
        self.out.visit_mut(&join(prefix, "out"), f);
    }
}
