//! Streaming prediction over raw amplitude frames.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::model::{argmax, Classifier, PairInput, Sample};
use crate::preprocess::{normalize_vector, Dims};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub t: usize,
    pub label: usize,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    /// Fewer than `T + 1` frames seen so far.
    WarmingUp { have: usize, need: usize },
    Ready(PredictionRecord),
}

/// Keeps the last `T + 1` normalised vectors of every pair.
#[derive(Clone, Debug)]
pub struct OnlinePredictor<S> {
    dims: Dims,
    lag: usize,
    buffers: Vec<Vec<S>>,
    seen: usize,
}

impl<S: Scalar> OnlinePredictor<S> {
    pub fn new(dims: Dims, lag: usize) -> Self {
        let n = (lag + 1) * dims.vector_len();
        Self { dims, lag, buffers: vec![vec![S::zero(); n]; dims.num_pairs], seen: 0 }
    }

    pub fn frames_seen(&self) -> usize {
        self.seen
    }

    /// Feeds one frame of raw amplitudes, `[pair][K * L]`.
    pub fn push<C: Classifier<S> + ?Sized>(&mut self, model: &C, raw: &[&[S]]) -> Result<Prediction> {
        let n = self.dims.vector_len();
        if raw.len() != self.dims.num_pairs {
            return Err(shape_err(self.dims.num_pairs, raw.len()));
        }
        let mut normed = vec![S::zero(); n];
        for (buf, frame) in self.buffers.iter_mut().zip(raw) {
            if frame.len() != n {
                return Err(shape_err(n, frame.len()));
            }
            normalize_vector(frame, self.dims.num_antenna_pairs, &mut normed)?;
            buf.copy_within(n.., 0);
            let len = buf.len();
            buf[len - n..].copy_from_slice(&normed);
        }
        let t = self.seen;
        self.seen += 1;
        if self.seen <= self.lag {
            return Ok(Prediction::WarmingUp { have: self.seen, need: self.lag + 1 });
        }
        let sample = Sample { pairs: self.buffers.iter().map(|b| PairInput { window: b, latents: None }).collect() };
        let probs = model.probs(&sample)?;
        Ok(Prediction::Ready(PredictionRecord { t, label: argmax(&probs), probs: probs.iter().map(|p| p.f64()).collect() }))
    }
}
