//! The presence-detection network: attention over subcarrier latents for the
//! static feature, a per-timestep CNN feeding a stacked LSTM for the dynamic
//! feature, and a dense classifier on their concatenation.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::nn::tensor::join;
use crate::nn::{
    cross_entropy, softmax, softmax_backward, softmax_cross_entropy_grad, ConvConfig, ConvStack, ConvTrace, Dense,
    Lstm, Mlp, MlpTrace, Module, StackTrace, Tensor,
};
use crate::rng::{rng_for, TAG_INIT};
use crate::scae::ClusterEncoder;
use crate::scalar::Scalar;

/// Inputs of one transmission pair at one timestamp.
#[derive(Clone, Copy, Debug)]
pub struct PairInput<'a, S> {
    /// Normalised window matrix, row-major `[T + 1][K * L]`; the last row is the current vector.
    pub window: &'a [S],
    /// Precomputed latents `[K * L][D]`; computed from `window` when absent.
    pub latents: Option<&'a [S]>,
}

/// Inputs at one timestamp, indexed by transmission pair.
#[derive(Clone, Debug)]
pub struct Sample<'a, S> {
    pub pairs: Vec<PairInput<'a, S>>,
}

/// Anything trained with cross-entropy on [`Sample`]s.
pub trait Classifier<S: Scalar>: Module<S> {
    fn class_count(&self) -> usize;

    fn probs(&self, x: &Sample<S>) -> Result<Vec<S>>;

    /// Accumulates the gradient of `scale * cross_entropy`; returns the loss and the probabilities.
    fn backprop(&mut self, x: &Sample<S>, label: usize, scale: S) -> Result<(f64, Vec<S>)>;

    fn is_trainable(&self, _name: &str) -> bool {
        true
    }

    /// Whether [`PairInput::latents`] is read.
    fn uses_latents(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Transmission pairs present in the data.
    pub num_pairs: usize,
    /// Pairs the model reads, as indices into the data.
    pub pairs: Vec<usize>,
    /// `K * L`
    pub vector_len: usize,
    /// Lag depth T; windows hold `T + 1` samples.
    pub lag: usize,
    pub latent_len: usize,
    pub use_static: bool,
    pub use_dynamic: bool,
    pub conv: ConvConfig,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub classifier_hidden: Vec<usize>,
    pub class_count: usize,
    pub fine_tune_encoders: bool,
    /// Multiplier on the static feature at the classifier input. `None`
    /// means `K * L`, which maps uniform attention to unit scale.
    pub static_gain: Option<f64>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_pairs: 2,
            pairs: vec![0, 1],
            vector_len: 224,
            lag: 50,
            latent_len: 5,
            use_static: true,
            use_dynamic: true,
            conv: ConvConfig::default(),
            lstm_hidden: 64,
            lstm_layers: 2,
            classifier_hidden: vec![128, 64],
            class_count: 4,
            fine_tune_encoders: false,
            static_gain: None,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Small shapes for `K * L = 16` inputs on one CPU core.
    pub fn desk() -> Self {
        Self {
            vector_len: 16,
            lag: 20,
            conv: ConvConfig { channels: vec![4, 8, 8], kernel: 3, stride: 1 },
            lstm_hidden: 16,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.use_static && !self.use_dynamic {
            return Err(Error::Config("at least one of the static and dynamic branches must be enabled".into()));
        }
        if self.pairs.is_empty() {
            return Err(Error::Config("pair selection is empty".into()));
        }
        for (i, &p) in self.pairs.iter().enumerate() {
            if p >= self.num_pairs || self.pairs[..i].contains(&p) {
                return Err(Error::Config(format!("invalid pair selection {:?} for {} pairs", self.pairs, self.num_pairs)));
            }
        }
        if self.class_count < 2 {
            return Err(Error::Config(format!("class count {} must be at least 2", self.class_count)));
        }
        if self.vector_len == 0 || self.latent_len == 0 || self.lstm_hidden == 0 || self.lstm_layers == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.use_dynamic {
            self.conv.layer_lengths(self.vector_len)?;
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.lag + 1
    }

    pub fn static_len(&self) -> usize {
        if self.use_static { self.pairs.len() * self.vector_len } else { 0 }
    }

    pub fn static_gain(&self) -> f64 {
        self.static_gain.unwrap_or(self.vector_len as f64)
    }

    pub fn dynamic_len(&self) -> usize {
        if self.use_dynamic { self.pairs.len() * self.lstm_hidden } else { 0 }
    }
}

/// Softmax over the head's score of every latent: `latents` is `[K * L][D]`.
pub fn attention_weights<S: Scalar>(head: &Dense<S>, latents: &[S]) -> Result<Vec<S>> {
    let d = head.inputs();
    if head.outputs() != 1 || latents.len() % d != 0 {
        return Err(shape_err(format!("multiple of {d}"), latents.len()));
    }
    let scores: Vec<S> = latents.chunks_exact(d).map(|z| head.forward(z)[0]).collect();
    Ok(softmax(&scores))
}

/// Elementwise product of each pair's current vector with its weights, concatenated over pairs.
pub fn static_feature<S: Scalar>(current: &[&[S]], weights: &[&[S]]) -> Result<Vec<S>> {
    if current.len() != weights.len() {
        return Err(shape_err(current.len(), weights.len()));
    }
    let mut out = Vec::new();
    for (h, d) in current.iter().zip(weights) {
        if h.len() != d.len() {
            return Err(shape_err(h.len(), d.len()));
        }
        out.extend(h.iter().zip(d.iter()).map(|(a, b)| *a * *b));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default)]
struct PairTrace<S> {
    latents: Vec<S>,
    enc: Vec<MlpTrace<S>>,
    weights: Vec<S>,
    convs: Vec<ConvTrace<S>>,
    lstm: Option<StackTrace<S>>,
}

#[derive(Clone, Debug, Default)]
pub struct AlpdTrace<S> {
    pairs: Vec<PairTrace<S>>,
    cls: MlpTrace<S>,
    pub probs: Vec<S>,
}

impl<S> AlpdTrace<S> {
    pub fn features(&self) -> &[S] {
        &self.cls.acts[0]
    }

    /// Attention weights of the `slot`-th selected pair (empty without the static branch).
    pub fn weights(&self, slot: usize) -> &[S] {
        &self.pairs[slot].weights
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlpdModel<S> {
    pub cfg: ModelConfig,
    /// Cluster encoders of the selected pairs, in selection order.
    pub encoders: Vec<ClusterEncoder<S>>,
    pub heads: Vec<Dense<S>>,
    pub convs: Vec<ConvStack<S>>,
    pub lstms: Vec<Lstm<S>>,
    pub classifier: Mlp<S>,
}

impl<S: Scalar> AlpdModel<S> {
    /// `encoders` must hold one encoder per selected pair when the static
    /// branch is on (or when fine-tuning); it may be empty otherwise.
    pub fn new(cfg: ModelConfig, encoders: Vec<ClusterEncoder<S>>) -> Result<Self> {
        cfg.validate()?;
        if cfg.use_static || !encoders.is_empty() {
            if encoders.len() != cfg.pairs.len() {
                return Err(Error::Config(format!(
                    "{} cluster encoders for {} selected pairs",
                    encoders.len(),
                    cfg.pairs.len()
                )));
            }
            for (e, &p) in encoders.iter().zip(&cfg.pairs) {
                if e.pair != p || e.window_len() != cfg.window_len() || e.latent_len() != cfg.latent_len {
                    return Err(Error::Dimension {
                        model: format!("pair {p}, window {}, latent {}", cfg.window_len(), cfg.latent_len),
                        dataset: format!("encoder for pair {}, window {}, latent {}", e.pair, e.window_len(), e.latent_len()),
                    });
                }
            }
        }
        let mut rng = rng_for(&[cfg.seed, TAG_INIT, 1]);
        let n = cfg.pairs.len();
        let heads = if cfg.use_static { (0..n).map(|_| Dense::new(cfg.latent_len, 1, &mut rng)).collect() } else { Vec::new() };
        let (convs, lstms) = if cfg.use_dynamic {
            let mut convs = Vec::with_capacity(n);
            let mut lstms = Vec::with_capacity(n);
            for _ in 0..n {
                let c = ConvStack::new(&cfg.conv, cfg.vector_len, &mut rng)?;
                lstms.push(Lstm::new(c.output_len(), cfg.lstm_hidden, cfg.lstm_layers, &mut rng));
                convs.push(c);
            }
            (convs, lstms)
        } else {
            (Vec::new(), Vec::new())
        };
        let mut sizes = vec![cfg.static_len() + cfg.dynamic_len()];
        sizes.extend(&cfg.classifier_hidden);
        sizes.push(cfg.class_count);
        let classifier = Mlp::new(&sizes, &mut rng);
        Ok(Self { cfg, encoders, heads, convs, lstms, classifier })
    }

    fn pair_input<'s, 'a>(&self, x: &'s Sample<'a, S>, slot: usize) -> Result<&'s PairInput<'a, S>> {
        let p = self.cfg.pairs[slot];
        let input = x.pairs.get(p).ok_or_else(|| {
            Error::Dimension { model: format!("{} pairs", self.cfg.num_pairs), dataset: format!("{} pairs", x.pairs.len()) }
        })?;
        let want = self.cfg.window_len() * self.cfg.vector_len;
        if input.window.len() != want {
            return Err(Error::Dimension {
                model: format!("window {}x{}", self.cfg.window_len(), self.cfg.vector_len),
                dataset: format!("{} values", input.window.len()),
            });
        }
        Ok(input)
    }

    /// Latents of every subcarrier window of `slot`, taken from the sample when present.
    pub fn latents(&self, x: &Sample<S>, slot: usize) -> Result<Vec<S>> {
        let input = self.pair_input(x, slot)?;
        match input.latents {
            Some(z) if !self.cfg.fine_tune_encoders => {
                if z.len() != self.cfg.vector_len * self.cfg.latent_len {
                    return Err(shape_err(self.cfg.vector_len * self.cfg.latent_len, z.len()));
                }
                Ok(z.to_vec())
            }
            _ => self.encoders[slot].encode_matrix(input.window, self.cfg.vector_len),
        }
    }

    pub fn dynamic_feature(&self, x: &Sample<S>, slot: usize) -> Result<Vec<S>> {
        let w = self.pair_input(x, slot)?.window;
        let feats: Vec<S> = w
            .chunks_exact(self.cfg.vector_len)
            .map(|row| self.convs[slot].forward(row))
            .collect::<Result<Vec<_>>>()?
            .concat();
        self.lstms[slot].forward(&feats)
    }

    fn pair_forward(&self, x: &Sample<S>, slot: usize, keep_encoder: bool) -> Result<PairTrace<S>> {
        let input = self.pair_input(x, slot)?;
        let kl = self.cfg.vector_len;
        let mut tr = PairTrace::default();
        if self.cfg.use_static {
            if keep_encoder {
                let mut col = vec![S::zero(); self.cfg.window_len()];
                for c in 0..kl {
                    crate::preprocess::column_into(input.window, kl, c, &mut col);
                    let e = self.encoders[slot].mlp.forward_trace(&col);
                    tr.latents.extend_from_slice(e.output());
                    tr.enc.push(e);
                }
            } else {
                tr.latents = self.latents(x, slot)?;
            }
            tr.weights = attention_weights(&self.heads[slot], &tr.latents)?;
        }
        if self.cfg.use_dynamic {
            let mut feats = Vec::new();
            for row in input.window.chunks_exact(kl) {
                let c = self.convs[slot].forward_trace(row)?;
                feats.extend_from_slice(c.acts.last().unwrap());
                tr.convs.push(c);
            }
            tr.lstm = Some(self.lstms[slot].forward_trace(&feats)?);
        }
        Ok(tr)
    }

    fn forward_impl(&self, x: &Sample<S>, keep_encoder: bool) -> Result<AlpdTrace<S>> {
        let n = self.cfg.pairs.len();
        let pairs = (0..n).map(|s| self.pair_forward(x, s, keep_encoder)).collect::<Result<Vec<_>>>()?;
        let mut feature = Vec::with_capacity(self.cfg.static_len() + self.cfg.dynamic_len());
        if self.cfg.use_static {
            let cur: Vec<&[S]> = (0..n).map(|s| self.current(x, s)).collect::<Result<_>>()?;
            let ws: Vec<&[S]> = pairs.iter().map(|p| p.weights.as_slice()).collect();
            let g = S::of(self.cfg.static_gain());
            feature.extend(static_feature(&cur, &ws)?.into_iter().map(|v| v * g));
        }
        for p in &pairs {
            if let Some(st) = &p.lstm {
                feature.extend_from_slice(Lstm::last_hidden(st));
            }
        }
        let cls = self.classifier.forward_trace(&feature);
        let probs = softmax(cls.output());
        Ok(AlpdTrace { pairs, cls, probs })
    }

    fn current<'a>(&self, x: &Sample<'a, S>, slot: usize) -> Result<&'a [S]> {
        let w = self.pair_input(x, slot)?.window;
        Ok(&w[w.len() - self.cfg.vector_len..])
    }

    pub fn forward_trace(&self, x: &Sample<S>) -> Result<AlpdTrace<S>> {
        self.forward_impl(x, false)
    }

    /// Classifier input: static feature (times the static gain) then dynamic feature.
    pub fn features(&self, x: &Sample<S>) -> Result<Vec<S>> {
        Ok(self.forward_trace(x)?.cls.acts.swap_remove(0))
    }

    fn backward(&mut self, x: &Sample<S>, tr: &AlpdTrace<S>, label: usize, scale: S) -> Result<()> {
        let kl = self.cfg.vector_len;
        let dlogits = softmax_cross_entropy_grad(&tr.probs, label, scale);
        let dfeat = self.classifier.backward(&tr.cls, &dlogits, true).expect("input gradient");
        let n = self.cfg.pairs.len();
        let mut off = 0;
        if self.cfg.use_static {
            let g = S::of(self.cfg.static_gain());
            for slot in 0..n {
                let h = self.current(x, slot)?;
                let ptr = &tr.pairs[slot];
                let dd: Vec<S> = dfeat[off..off + kl].iter().zip(h).map(|(d, v)| *d * *v * g).collect();
                off += kl;
                let da = softmax_backward(&ptr.weights, &dd);
                let dl = self.cfg.latent_len;
                let tune = self.cfg.fine_tune_encoders && !ptr.enc.is_empty();
                for (j, z) in ptr.latents.chunks_exact(dl).enumerate() {
                    if tune {
                        let mut dz = vec![S::zero(); dl];
                        self.heads[slot].backward(z, &da[j..j + 1], Some(&mut dz));
                        self.encoders[slot].mlp.backward(&ptr.enc[j], &dz, false);
                    } else {
                        self.heads[slot].backward(z, &da[j..j + 1], None);
                    }
                }
            }
        }
        if self.cfg.use_dynamic {
            let h = self.cfg.lstm_hidden;
            for slot in 0..n {
                let ptr = &tr.pairs[slot];
                let st = ptr.lstm.as_ref().expect("dynamic trace");
                let dxs = self.lstms[slot].backward(st, &dfeat[off..off + h], true).expect("input gradient");
                off += h;
                let f = self.convs[slot].output_len();
                for (c, g) in ptr.convs.iter().zip(dxs.chunks_exact(f)) {
                    self.convs[slot].backward(c, g, false);
                }
            }
        }
        Ok(())
    }
}

impl<S: Scalar> Classifier<S> for AlpdModel<S> {
    fn class_count(&self) -> usize {
        self.cfg.class_count
    }

    fn probs(&self, x: &Sample<S>) -> Result<Vec<S>> {
        Ok(self.forward_trace(x)?.probs)
    }

    fn backprop(&mut self, x: &Sample<S>, label: usize, scale: S) -> Result<(f64, Vec<S>)> {
        if label >= self.cfg.class_count {
            return Err(Error::Data(format!("label {label} outside {} classes", self.cfg.class_count)));
        }
        let tr = self.forward_impl(x, self.cfg.fine_tune_encoders && self.cfg.use_static)?;
        self.backward(x, &tr, label, scale)?;
        Ok((cross_entropy(&tr.probs, label), tr.probs))
    }

    fn is_trainable(&self, name: &str) -> bool {
        self.cfg.fine_tune_encoders || !name.starts_with("encoders.")
    }

    fn uses_latents(&self) -> bool {
        self.cfg.use_static && !self.cfg.fine_tune_encoders
    }
}

impl<S: Scalar> Module<S> for AlpdModel<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<S>)) {
        for (i, e) in self.encoders.iter().enumerate() {
            e.visit(&join(prefix, &format!("encoders.{i}")), f);
        }
        for (i, h) in self.heads.iter().enumerate() {
            h.visit(&join(prefix, &format!("heads.{i}")), f);
        }
        for (i, c) in self.convs.iter().enumerate() {
            c.visit(&join(prefix, &format!("convs.{i}")), f);
        }
        for (i, l) in self.lstms.iter().enumerate() {
            l.visit(&join(prefix, &format!("lstms.{i}")), f);
        }
        self.classifier.visit(&join(prefix, "classifier"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<S>)) {
        for (i, e) in self.encoders.iter_mut().enumerate() {
            e.visit_mut(&join(prefix, &format!("encoders.{i}")), f);
        }
        for (i, h) in self.heads.iter_mut().enumerate() {
            h.visit_mut(&join(prefix, &format!("heads.{i}")), f);
        }
        for (i, c) in self.convs.iter_mut().enumerate() {
            c.visit_mut(&join(prefix, &format!("convs.{i}")), f);
        }
        for (i, l) in self.lstms.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &format!("lstms.{i}")), f);
        }
        self.classifier.visit_mut(&join(prefix, "classifier"), f);
    }
}

pub fn argmax<S: Scalar>(v: &[S]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
