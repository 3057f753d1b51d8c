//! Subcarrier cluster autoencoder.
//!
//! One autoencoder per transmission pair maps a single subcarrier's time
//! window to a short latent vector. Training combines reconstruction error
//! with a clustering term that pulls together the latents of windows whose
//! amplitudes are positively correlated, weighted by the inverse correlation.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::nn::tensor::join;
use crate::nn::{mse, mse_grad_into, Adam, AdamConfig, Mlp, MlpTrace, Module, Tensor};
use crate::preprocess::{column_into, AmplitudeTensor};
use crate::rng::{rng_for, TAG_INIT, TAG_PAIRS, TAG_SHUFFLE};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaeConfig {
    /// Latent length D.
    pub latent_len: usize,
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub lambda: f64,
    pub epochs: usize,
    /// Windows per minibatch, rounded to whole timestamps (all `K * L`
    /// windows of a timestamp stay together).
    pub batch_size: usize,
    /// Clustering pairs sampled per minibatch.
    pub pair_budget: usize,
    /// Correlations at or below this are left out of the clustering sum.
    pub cor_eps: f64,
    /// Allow clustering pairs whose windows end at different timestamps.
    pub cross_time: bool,
    /// Cap on training timestamps drawn per epoch.
    pub max_timestamps_per_epoch: Option<usize>,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ScaeConfig {
    fn default() -> Self {
        Self {
            latent_len: 5,
            hidden: vec![64, 32],
            lambda: 0.001,
            epochs: 5,
            batch_size: 64,
            pair_budget: 256,
            cor_eps: 1e-6,
            cross_time: false,
            max_timestamps_per_epoch: None,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl ScaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_len == 0 {
            return Err(Error::Config("latent length must be at least 1".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda {} must be non-negative", self.lambda)));
        }
        Ok(())
    }
}

/// Pearson correlation accumulated in `f64`. Zero when either side is constant.
pub fn correlation<S: Scalar>(a: &[S], b: &[S]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(shape_err(a.len(), b.len()));
    }
    let n = a.len() as f64;
    if a.is_empty() {
        return Ok(0.0);
    }
    let ma = a.iter().map(|v| v.f64()).sum::<f64>() / n;
    let mb = b.iter().map(|v| v.f64()).sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x.f64() - ma, y.f64() - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va <= 0.0 || vb <= 0.0 {
        return Ok(0.0);
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

pub fn euclidean<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.f64() - y.f64()).powi(2)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusteringLoss {
    pub value: f64,
    pub pairs_used: usize,
    /// Every pair was excluded (or none were given).
    pub empty: bool,
}

/// Sum over `pairs` of `d(z_i, z_j) / cor(w_i, w_j)`, skipping pairs whose
/// correlation is at most `cor_eps`.
pub fn clustering_loss<S: Scalar, L: AsRef<[S]>, W: AsRef<[S]>>(
    latents: &[L],
    windows: &[W],
    pairs: &[(usize, usize)],
    cor_eps: f64,
) -> Result<ClusteringLoss> {
    if latents.len() != windows.len() {
        return Err(shape_err(windows.len(), latents.len()));
    }
    let mut value = 0.0;
    let mut used = 0;
    for &(i, j) in pairs {
        if i == j || i >= latents.len() || j >= latents.len() {
            return Err(Error::Data(format!("invalid clustering pair ({i}, {j})")));
        }
        let cor = correlation(windows[i].as_ref(), windows[j].as_ref())?;
        if cor <= cor_eps {
            continue;
        }
        value += euclidean(latents[i].as_ref(), latents[j].as_ref()) / cor;
        used += 1;
    }
    Ok(ClusteringLoss { value, pairs_used: used, empty: used == 0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaeLossBreakdown {
    pub l_recst: f64,
    pub l_clst: f64,
    pub l_total: f64,
    pub lambda: f64,
    pub pairs_used: usize,
}

pub fn total_loss(l_recst: f64, l_clst: f64, lambda: f64, pairs_used: usize) -> ScaeLossBreakdown {
    ScaeLossBreakdown { l_recst, l_clst, l_total: l_recst + lambda * l_clst, lambda, pairs_used }
}

/// Identifies one subcarrier window: end timestamp, subcarrier, antenna pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WindowId {
    pub t: usize,
    pub k: usize,
    pub l: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaeModel<S> {
    pub pair: usize,
    pub encoder: Mlp<S>,
    pub decoder: Mlp<S>,
}

impl<S: Scalar> ScaeModel<S> {
    pub fn new(pair: usize, window_len: usize, cfg: &ScaeConfig) -> Result<Self> {
        cfg.validate()?;
        if window_len == 0 {
            return Err(Error::Config("window length must be positive".into()));
        }
        let mut rng = rng_for(&[cfg.seed, TAG_INIT, 100 + pair as u64]);
        let mut sizes = vec![window_len];
        sizes.extend(&cfg.hidden);
        sizes.push(cfg.latent_len);
        let encoder = Mlp::new(&sizes, &mut rng);
        sizes.reverse();
        let decoder = Mlp::new(&sizes, &mut rng);
        Ok(Self { pair, encoder, decoder })
    }

    pub fn window_len(&self) -> usize {
        self.encoder.inputs()
    }

    pub fn latent_len(&self) -> usize {
        self.encoder.outputs()
    }

    pub fn encode(&self, w: &[S]) -> Result<Vec<S>> {
        if w.len() != self.window_len() {
            return Err(shape_err(self.window_len(), w.len()));
        }
        Ok(self.encoder.forward(w))
    }

    pub fn decode(&self, z: &[S]) -> Result<Vec<S>> {
        if z.len() != self.latent_len() {
            return Err(shape_err(self.latent_len(), z.len()));
        }
        Ok(self.decoder.forward(z))
    }

    pub fn reconstruct(&self, w: &[S]) -> Result<Vec<S>> {
        self.decode(&self.encode(w)?)
    }

    fn check_windows<W: AsRef<[S]>>(&self, windows: &[W]) -> Result<()> {
        if windows.is_empty() {
            return Err(Error::Empty("no windows in batch".into()));
        }
        for w in windows {
            if w.as_ref().len() != self.window_len() {
                return Err(shape_err(self.window_len(), w.as_ref().len()));
            }
        }
        Ok(())
    }

    /// Minibatch objective: mean reconstruction error over `windows` plus
    /// `lambda` times the mean clustering contribution over the kept pairs.
    pub fn batch_loss<W: AsRef<[S]>>(
        &self,
        windows: &[W],
        pairs: &[(usize, usize)],
        lambda: f64,
        cor_eps: f64,
    ) -> Result<ScaeLossBreakdown> {
        self.check_windows(windows)?;
        let mut recst = 0.0;
        let mut latents = Vec::with_capacity(windows.len());
        for w in windows {
            let z = self.encoder.forward(w.as_ref());
            recst += mse(&self.decoder.forward(&z), w.as_ref())?;
            latents.push(z);
        }
        recst /= windows.len() as f64;
        let c = clustering_loss(&latents, windows, pairs, cor_eps)?;
        let clst = if c.empty { 0.0 } else { c.value / c.pairs_used as f64 };
        Ok(total_loss(recst, clst, lambda, c.pairs_used))
    }

    /// Accumulates the gradient of [`Self::batch_loss`] into the parameters.
    pub fn backprop_batch<W: AsRef<[S]>>(
        &mut self,
        windows: &[W],
        pairs: &[(usize, usize)],
        lambda: f64,
        cor_eps: f64,
    ) -> Result<ScaeLossBreakdown> {
        self.check_windows(windows)?;
        let n = windows.len();
        let enc: Vec<MlpTrace<S>> = windows.iter().map(|w| self.encoder.forward_trace(w.as_ref())).collect();
        let dec: Vec<MlpTrace<S>> = enc.iter().map(|e| self.decoder.forward_trace(e.output())).collect();

        let mut recst = 0.0;
        let mut dz: Vec<Vec<S>> = Vec::with_capacity(n);
        for ((w, d), _) in windows.iter().zip(&dec).zip(&enc) {
            let w = w.as_ref();
            recst += mse(d.output(), w)?;
            let mut dy = vec![S::zero(); w.len()];
            mse_grad_into(d.output(), w, 1.0 / n as f64, &mut dy);
            dz.push(self.decoder.backward(d, &dy, true).expect("input gradient"));
        }
        recst /= n as f64;

        let mut kept = Vec::new();
        let mut clst = 0.0;
        for &(i, j) in pairs {
            if i == j || i >= n || j >= n {
                return Err(Error::Data(format!("invalid clustering pair ({i}, {j})")));
            }
            let cor = correlation(windows[i].as_ref(), windows[j].as_ref())?;
            if cor <= cor_eps {
                continue;
            }
            let d = euclidean(enc[i].output(), enc[j].output());
            clst += d / cor;
            kept.push((i, j, cor, d));
        }
        if !kept.is_empty() {
            clst /= kept.len() as f64;
            let scale = lambda / kept.len() as f64;
            for &(i, j, cor, d) in &kept {
                if d == 0.0 {
                    continue;
                }
                let c = scale / (cor * d);
                for q in 0..self.latent_len() {
                    let diff = S::of(c * (enc[i].output()[q].f64() - enc[j].output()[q].f64()));
                    dz[i][q] += diff;
                    dz[j][q] -= diff;
                }
            }
        }
        for (e, g) in enc.iter().zip(&dz) {
            self.encoder.backward(e, g, false);
        }
        Ok(total_loss(recst, clst, lambda, kept.len()))
    }

    /// Eq.-style objective over an explicit set of windows of this model's
    /// pair: mean reconstruction error over every `(t, k, l)` with `t` in
    /// `ends`, plus `lambda` times the clustering sum over `pairs`.
    pub fn objective(
        &self,
        amps: &AmplitudeTensor<S>,
        ends: &[usize],
        lag: usize,
        pairs: &[(WindowId, WindowId)],
        lambda: f64,
        cor_eps: f64,
    ) -> Result<ScaeLossBreakdown> {
        let dims = amps.dims();
        let mut recst = 0.0;
        let mut count = 0usize;
        for &t in ends {
            for k in 0..dims.num_subcarriers {
                for l in 0..dims.num_antenna_pairs {
                    let w = amps.make_window(t, self.pair, k, l, lag)?.0;
                    recst += mse(&self.reconstruct(&w)?, &w)?;
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(Error::Empty("no windows to evaluate".into()));
        }
        recst /= count as f64;
        let mut windows = Vec::with_capacity(pairs.len() * 2);
        let mut latents = Vec::with_capacity(pairs.len() * 2);
        let mut idx = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            for id in [a, b] {
                let w = amps.make_window(id.t, self.pair, id.k, id.l, lag)?.0;
                latents.push(self.encode(&w)?);
                windows.push(w);
            }
            idx.push((windows.len() - 2, windows.len() - 1));
        }
        let c = clustering_loss(&latents, &windows, &idx, cor_eps)?;
        Ok(total_loss(recst, c.value, lambda, c.pairs_used))
    }
}

impl<S: Scalar> Module<S> for ScaeModel<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<S>)) {
        self.encoder.visit(&join(prefix, "encoder"), f);
        self.decoder.visit(&join(prefix, "decoder"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<S>)) {
        self.encoder.visit_mut(&join(prefix, "encoder"), f);
        self.decoder.visit_mut(&join(prefix, "decoder"), f);
    }
}

/// The encoder half of a trained autoencoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterEncoder<S> {
    pub pair: usize,
    pub mlp: Mlp<S>,
}

impl<S: Scalar> ClusterEncoder<S> {
    pub fn window_len(&self) -> usize {
        self.mlp.inputs()
    }

    pub fn latent_len(&self) -> usize {
        self.mlp.outputs()
    }

    pub fn encode(&self, w: &[S]) -> Result<Vec<S>> {
        if w.len() != self.window_len() {
            return Err(shape_err(self.window_len(), w.len()));
        }
        Ok(self.mlp.forward(w))
    }

    /// Latents for every column of a row-major `[T + 1][cols]` window matrix,
    /// concatenated as `[cols][D]`.
    pub fn encode_matrix(&self, matrix: &[S], cols: usize) -> Result<Vec<S>> {
        let rows = self.window_len();
        if matrix.len() != rows * cols {
            return Err(shape_err(rows * cols, matrix.len()));
        }
        let mut col = vec![S::zero(); rows];
        let mut out = Vec::with_capacity(cols * self.latent_len());
        for c in 0..cols {
            column_into(matrix, cols, c, &mut col);
            out.extend(self.mlp.forward(&col));
        }
        Ok(out)
    }
}

impl<S: Scalar> Module<S> for ClusterEncoder<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<S>)) {
        self.mlp.visit(prefix, f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<S>)) {
        self.mlp.visit_mut(prefix, f);
    }
}

pub fn export_cluster_encoder<S: Scalar>(model: &ScaeModel<S>) -> ClusterEncoder<S> {
    ClusterEncoder { pair: model.pair, mlp: model.encoder.clone() }
}

/// Per-epoch means of the minibatch objective.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaeHistory {
    pub pair: usize,
    pub epochs: Vec<ScaeLossBreakdown>,
}

impl ScaeHistory {
    pub fn initial(&self) -> Option<&ScaeLossBreakdown> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&ScaeLossBreakdown> {
        self.epochs.last()
    }
}

/// Samples up to `budget` ordered pairs `(i, j)`, `i != j`, among the
/// windows of a batch laid out as consecutive groups of `group` windows.
/// Without `cross_time`, both members come from the same group.
fn sample_pairs<R: Rng>(rng: &mut R, n: usize, group: usize, budget: usize, cross_time: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(budget);
    if n < 2 || (!cross_time && group < 2) {
        return out;
    }
    for _ in 0..budget {
        let i = rng.gen_range(0..n);
        let j = if cross_time {
            let j = rng.gen_range(0..n - 1);
            if j >= i { j + 1 } else { j }
        } else {
            let base = i - i % group;
            let j = rng.gen_range(0..group - 1);
            let j = base + j;
            if j >= i { j + 1 } else { j }
        };
        out.push((i, j));
    }
    out
}

/// Trains the autoencoder of pair `pair` on the windows ending at `ends`.
pub fn train_scae<S: Scalar>(
    amps: &AmplitudeTensor<S>,
    ends: &[usize],
    lag: usize,
    pair: usize,
    cfg: &ScaeConfig,
) -> Result<(ScaeModel<S>, ScaeHistory)> {
    cfg.validate()?;
    let dims = amps.dims();
    if pair >= dims.num_pairs {
        return Err(Error::Config(format!("pair {pair} out of range for {} pairs", dims.num_pairs)));
    }
    if ends.is_empty() {
        return Err(Error::Empty("no training windows".into()));
    }
    let mut model = ScaeModel::new(pair, lag + 1, cfg)?;
    let mut adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut shuffle_rng = rng_for(&[cfg.seed, TAG_SHUFFLE, 100 + pair as u64]);
    let mut pair_rng = rng_for(&[cfg.seed, TAG_PAIRS, pair as u64]);
    let cols = dims.vector_len();
    let per_batch = (cfg.batch_size / cols).max(1);
    let mut order = ends.to_vec();
    let mut history = ScaeHistory { pair, epochs: Vec::with_capacity(cfg.epochs) };
    let mut windows: Vec<Vec<S>> = Vec::new();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let take = cfg.max_timestamps_per_epoch.map_or(order.len(), |m| m.min(order.len()));
        let (mut sr, mut sc, mut st, mut np, mut nb) = (0.0, 0.0, 0.0, 0usize, 0usize);
        for batch in order[..take].chunks(per_batch) {
            windows.clear();
            for &t in batch {
                let m = amps.window_slice(t, pair, lag)?;
                for c in 0..cols {
                    let mut w = vec![S::zero(); lag + 1];
                    column_into(m, cols, c, &mut w);
                    windows.push(w);
                }
            }
            let pairs = sample_pairs(&mut pair_rng, windows.len(), cols, cfg.pair_budget, cfg.cross_time);
            model.zero_grad();
            let b = model.backprop_batch(&windows, &pairs, cfg.lambda, cfg.cor_eps)?;
            adam.step(&mut model, S::one(), &crate::nn::all_params);
            sr += b.l_recst;
            sc += b.l_clst;
            st += b.l_total;
            np += b.pairs_used;
            nb += 1;
        }
        let k = nb as f64;
        history.epochs.push(ScaeLossBreakdown {
            l_recst: sr / k,
            l_clst: sc / k,
            l_total: st / k,
            lambda: cfg.lambda,
            pairs_used: np,
        });
    }
    Ok((model, history))
}
