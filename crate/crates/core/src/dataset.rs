//! Labelled window sets built from simulated sessions.

use crate::error::{shape_err, Error, Result};
use crate::model::{PairInput, Sample};
use crate::preprocess::{normalize, segment_ranges, window_ends, AmplitudeTensor, RawAmplitudes};
use crate::scae::ClusterEncoder;
use crate::scalar::Scalar;
use crate::sim::{CaseLabel, LabeledSession, RoomState, ScenarioScript, Segment, StateTag};

/// Every window of a normalised stream that fits inside one segment, with
/// the label and test condition of its final frame.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet<S> {
    pub amps: AmplitudeTensor<S>,
    pub lag: usize,
    pub ends: Vec<usize>,
    pub labels: Vec<usize>,
    pub tags: Vec<StateTag>,
}

impl<S: Scalar> WindowSet<S> {
    pub fn from_raw(
        raw: &RawAmplitudes<S>,
        labels: &[CaseLabel],
        tags: &[StateTag],
        segment_ids: &[usize],
        lag: usize,
    ) -> Result<Self> {
        if labels.len() != raw.len || tags.len() != raw.len || segment_ids.len() != raw.len {
            return Err(shape_err(raw.len, labels.len()));
        }
        let amps = normalize(raw)?;
        let ends = window_ends(&segment_ranges(segment_ids), lag);
        let labels = ends.iter().map(|&t| labels[t].index()).collect();
        let tags = ends.iter().map(|&t| tags[t]).collect();
        Ok(Self { amps, lag, ends, labels, tags })
    }

    pub fn from_session(session: &LabeledSession, lag: usize) -> Result<Self> {
        let raw = RawAmplitudes::from_session(session);
        Self::from_raw(&raw, &session.labels, &session.tags, &session.segment_ids, lag)
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    pub fn num_pairs(&self) -> usize {
        self.amps.dims().num_pairs
    }

    pub fn vector_len(&self) -> usize {
        self.amps.dims().vector_len()
    }

    /// Number of distinct labels present.
    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.class_count()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Indices of windows tagged `tag`.
    pub fn indices_with(&self, tag: StateTag) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.tags[i] == tag).collect()
    }

    pub fn sample<'a>(&'a self, i: usize, latents: Option<&'a LatentCache<S>>) -> Sample<'a, S> {
        let t = self.ends[i];
        let pairs = (0..self.num_pairs())
            .map(|p| PairInput {
                window: self.amps.window_slice(t, p, self.lag).expect("window end checked at construction"),
                latents: latents.and_then(|c| c.get(p, i)),
            })
            .collect();
        Sample { pairs }
    }
}

/// Encoder outputs for every window of a [`WindowSet`], per pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LatentCache<S> {
    stride: usize,
    pairs: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> LatentCache<S> {
    pub fn build(set: &WindowSet<S>, encoders: &[ClusterEncoder<S>]) -> Result<Self> {
        let kl = set.vector_len();
        let mut pairs = vec![None; set.num_pairs()];
        let mut stride = 0;
        for e in encoders {
            if e.pair >= set.num_pairs() {
                return Err(Error::Dimension {
                    model: format!("encoder for pair {}", e.pair),
                    dataset: format!("{} pairs", set.num_pairs()),
                });
            }
            stride = kl * e.latent_len();
            let mut out = Vec::with_capacity(set.len() * stride);
            for &t in &set.ends {
                out.extend(e.encode_matrix(set.amps.window_slice(t, e.pair, set.lag)?, kl)?);
            }
            pairs[e.pair] = Some(out);
        }
        Ok(Self { stride, pairs })
    }

    pub fn get(&self, pair: usize, i: usize) -> Option<&[S]> {
        self.pairs.get(pair)?.as_ref().map(|v| &v[i * self.stride..(i + 1) * self.stride])
    }
}

/// How much of each class and condition to record.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptPlan {
    pub windows_per_class: usize,
    pub lag: usize,
    pub states: Vec<StateTag>,
    pub interference_level: f64,
    pub sample_rate: f64,
    /// Longest segment, in windows.
    pub segment_windows: usize,
    pub class_count: usize,
    pub realization: u64,
}

fn variants(class: usize, state: StateTag) -> Vec<(RoomState, RoomState)> {
    use RoomState::*;
    let occupied: &[RoomState] = match state {
        StateTag::Static => &[StaticLos, StaticNlos],
        _ => &[Dynamic],
    };
    match class {
        0 => vec![(Empty, Empty)],
        1 => occupied.iter().map(|&r| (r, Empty)).collect(),
        2 => occupied.iter().map(|&r| (Empty, r)).collect(),
        _ => occupied.iter().flat_map(|&a| occupied.iter().map(move |&b| (a, b))).collect(),
    }
}

fn share(total: usize, parts: usize, i: usize) -> usize {
    total / parts + usize::from(i < total % parts)
}

/// Segments giving exactly `windows_per_class` windows of each class, spread
/// evenly over `states` and over occupant positions within each state.
pub fn build_script(plan: &ScriptPlan) -> Result<ScenarioScript> {
    if plan.states.is_empty() {
        return Err(Error::Config("no recording states selected".into()));
    }
    if plan.class_count != 4 {
        return Err(Error::Config(format!("the simulator produces 4 cases, not {}", plan.class_count)));
    }
    if plan.segment_windows == 0 || plan.sample_rate <= 0.0 {
        return Err(Error::Config("segment length and sample rate must be positive".into()));
    }
    let mut segments = Vec::new();
    for class in 0..plan.class_count {
        for (si, &state) in plan.states.iter().enumerate() {
            let quota = share(plan.windows_per_class, plan.states.len(), si);
            let vars = variants(class, state);
            let n = quota.div_ceil(plan.segment_windows).max(vars.len()).min(quota.max(1));
            for s in 0..n {
                let windows = share(quota, n, s);
                if windows == 0 {
                    continue;
                }
                let (r1, r2) = vars[s % vars.len()];
                let frames = windows + plan.lag;
                let mut seg = Segment::new(frames as f64 / plan.sample_rate, r1, r2).tagged(state);
                if state == StateTag::Interference {
                    seg = seg.with_interference(plan.interference_level);
                }
                segments.push(seg);
            }
        }
    }
    Ok(ScenarioScript::new(segments).with_realization(plan.realization))
}
