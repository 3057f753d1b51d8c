//! Amplitude normalisation and the three model input forms: the current
//! amplitude vector, per-subcarrier time windows and full window matrices.
//!
//! Flattening order is subcarrier-major: element `k * L + l` of a vector
//! holds subcarrier `k` of antenna pair `l`. A window ending at `t` with lag
//! depth `T` holds the `T + 1` samples `t - T ..= t`.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::rng::{rng_for, TAG_SPLIT};
use crate::scalar::Scalar;
use crate::sim::{CaseLabel, LabeledSession};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub num_pairs: usize,
    pub num_subcarriers: usize,
    pub num_antenna_pairs: usize,
}

impl Dims {
    pub fn new(num_pairs: usize, num_subcarriers: usize, num_antenna_pairs: usize) -> Self {
        Self { num_pairs, num_subcarriers, num_antenna_pairs }
    }

    pub fn vector_len(&self) -> usize {
        self.num_subcarriers * self.num_antenna_pairs
    }
}

/// Per-pair amplitude streams, each row-major `[N][K * L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairStreams<S> {
    pub dims: Dims,
    pub len: usize,
    pub pairs: Vec<Vec<S>>,
}

impl<S: Scalar> PairStreams<S> {
    pub fn new(dims: Dims, len: usize, pairs: Vec<Vec<S>>) -> Result<Self> {
        if pairs.len() != dims.num_pairs {
            return Err(shape_err(format!("{} pairs", dims.num_pairs), format!("{} pairs", pairs.len())));
        }
        let want = len * dims.vector_len();
        if let Some(bad) = pairs.iter().find(|p| p.len() != want) {
            return Err(shape_err(format!("{want} values per pair"), bad.len()));
        }
        Ok(Self { dims, len, pairs })
    }

    /// Row `t` of pair `p`.
    pub fn vector(&self, p: usize, t: usize) -> &[S] {
        let n = self.dims.vector_len();
        &self.pairs[p][t * n..(t + 1) * n]
    }

    pub fn get(&self, t: usize, p: usize, k: usize, l: usize) -> S {
        self.pairs[p][t * self.dims.vector_len() + k * self.dims.num_antenna_pairs + l]
    }
}

/// Raw CSI amplitudes `|h|`.
pub type RawAmplitudes<S> = PairStreams<S>;

impl<S: Scalar> PairStreams<S> {
    pub fn from_session(session: &LabeledSession) -> Self {
        let f0 = &session.frames[0];
        let dims = Dims::new(f0.num_pairs, f0.num_subcarriers, f0.num_antenna_pairs);
        let pairs = (0..dims.num_pairs)
            .map(|p| {
                session
                    .frames
                    .iter()
                    .flat_map(|f| f.pair_amplitudes(p).map(S::of))
                    .collect()
            })
            .collect();
        Self { dims, len: session.len(), pairs }
    }
}

/// Normalised amplitudes in `[0, 1]`, with a record of flat slices.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeTensor<S> {
    pub values: PairStreams<S>,
    /// `(t, p, l)` slices whose subcarriers were all equal; they map to zeros.
    pub degenerate: Vec<(usize, usize, usize)>,
}

/// Min-max normalises one flattened amplitude vector across subcarriers,
/// separately for each antenna pair. Returns the antenna pairs that were flat.
pub fn normalize_vector<S: Scalar>(raw: &[S], num_antenna_pairs: usize, out: &mut [S]) -> Result<Vec<usize>> {
    let nl = num_antenna_pairs;
    if raw.len() != out.len() || nl == 0 || raw.len() % nl != 0 {
        return Err(shape_err(format!("multiple of {nl}"), raw.len()));
    }
    let mut flat = Vec::new();
    for l in 0..nl {
        let mut lo = S::infinity();
        let mut hi = S::neg_infinity();
        for &v in raw.iter().skip(l).step_by(nl) {
            if v.is_nan() || v < S::zero() || v.is_infinite() {
                return Err(Error::Data(format!("amplitude {v} is not a finite non-negative number")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = hi - lo;
        if span > S::zero() {
            for (o, &v) in out.iter_mut().skip(l).step_by(nl).zip(raw.iter().skip(l).step_by(nl)) {
                *o = (v - lo) / span;
            }
        } else {
            flat.push(l);
            for o in out.iter_mut().skip(l).step_by(nl) {
                *o = S::zero();
            }
        }
    }
    Ok(flat)
}

pub fn normalize<S: Scalar>(raw: &RawAmplitudes<S>) -> Result<AmplitudeTensor<S>> {
    let n = raw.dims.vector_len();
    let nl = raw.dims.num_antenna_pairs;
    let mut degenerate = Vec::new();
    let mut pairs = Vec::with_capacity(raw.pairs.len());
    for (p, stream) in raw.pairs.iter().enumerate() {
        let mut out = vec![S::zero(); stream.len()];
        for t in 0..raw.len {
            let flat = normalize_vector(&stream[t * n..(t + 1) * n], nl, &mut out[t * n..(t + 1) * n])?;
            degenerate.extend(flat.into_iter().map(|l| (t, p, l)));
        }
        pairs.push(out);
    }
    Ok(AmplitudeTensor { values: PairStreams { dims: raw.dims, len: raw.len, pairs }, degenerate })
}

/// Time window of a single subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct SubcarrierWindow<S>(pub Vec<S>);

/// `T + 1` consecutive amplitude vectors, row-major `[(T + 1)][K * L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowMatrix<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> WindowMatrix<S> {
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

impl<S: Scalar> AmplitudeTensor<S> {
    pub fn dims(&self) -> Dims {
        self.values.dims
    }

    pub fn len(&self) -> usize {
        self.values.len
    }

    pub fn is_empty(&self) -> bool {
        self.values.len == 0
    }

    pub fn amplitude_vector(&self, t: usize, p: usize) -> &[S] {
        self.values.vector(p, t)
    }

    fn check_history(&self, t: usize, lag: usize) -> Result<()> {
        if t < lag {
            return Err(Error::InsufficientHistory { needed: lag, got: t });
        }
        if t >= self.len() {
            return Err(Error::Data(format!("timestamp {t} beyond stream length {}", self.len())));
        }
        Ok(())
    }

    pub fn make_window(&self, t: usize, p: usize, k: usize, l: usize, lag: usize) -> Result<SubcarrierWindow<S>> {
        self.check_history(t, lag)?;
        Ok(SubcarrierWindow((t - lag..=t).map(|s| self.values.get(s, p, k, l)).collect()))
    }

    /// Borrowed view of the window matrix ending at `t`.
    pub fn window_slice(&self, t: usize, p: usize, lag: usize) -> Result<&[S]> {
        self.check_history(t, lag)?;
        let n = self.dims().vector_len();
        Ok(&self.values.pairs[p][(t - lag) * n..(t + 1) * n])
    }

    pub fn make_window_matrix(&self, t: usize, p: usize, lag: usize) -> Result<WindowMatrix<S>> {
        let data = self.window_slice(t, p, lag)?.to_vec();
        Ok(WindowMatrix { rows: lag + 1, cols: self.dims().vector_len(), data })
    }
}

/// Extracts column `col` of a row-major `[rows][cols]` matrix into `out`.
pub fn column_into<S: Scalar>(matrix: &[S], cols: usize, col: usize, out: &mut [S]) {
    for (o, row) in out.iter_mut().zip(matrix.chunks_exact(cols)) {
        *o = row[col];
    }
}

/// Disjoint train/test frame ranges. No range crosses a segment boundary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameSplit {
    pub train: Vec<Range<usize>>,
    pub test: Vec<Range<usize>>,
}

/// Contiguous runs of equal segment id.
pub fn segment_ranges(segment_ids: &[usize]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=segment_ids.len() {
        if i == segment_ids.len() || segment_ids[i] != segment_ids[start] {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Label-stratified split: each class receives `round(fraction * frames)`
/// training frames. Within each segment the training part is a contiguous
/// head or tail (seeded), so no window can straddle the boundary.
pub fn split_frames(
    labels: &[CaseLabel],
    segment_ids: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<FrameSplit> {
    if labels.len() != segment_ids.len() {
        return Err(shape_err(labels.len(), segment_ids.len()));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Config(format!("train fraction {train_fraction} outside [0, 1]")));
    }
    let mut rng = rng_for(&[seed, TAG_SPLIT]);
    let mut runs = segment_ranges(segment_ids);
    for r in &runs {
        if labels[r.clone()].iter().any(|&l| l != labels[r.start]) {
            return Err(Error::Data(format!("segment at frame {} mixes labels", r.start)));
        }
    }
    runs.shuffle(&mut rng);
    let mut classes: Vec<CaseLabel> = runs.iter().map(|r| labels[r.start]).collect();
    classes.sort();
    classes.dedup();

    let mut split = FrameSplit::default();
    for class in classes {
        let mut seen = 0usize;
        let mut assigned = 0usize;
        for r in runs.iter().filter(|r| labels[r.start] == class) {
            seen += r.len();
            let target = (train_fraction * seen as f64).round() as usize;
            let take = target.saturating_sub(assigned).min(r.len());
            assigned += take;
            let (head, tail) = (r.start..r.start + take, r.start + take..r.end);
            let (train, test) = if rng.gen_bool(0.5) {
                (head, tail)
            } else {
                (r.end - take..r.end, r.start..r.end - take)
            };
            if !train.is_empty() {
                split.train.push(train);
            }
            if !test.is_empty() {
                split.test.push(test);
            }
        }
    }
    split.train.sort_by_key(|r| r.start);
    split.test.sort_by_key(|r| r.start);
    Ok(split)
}

pub fn split_dataset(session: &LabeledSession, train_fraction: f64, seed: u64) -> Result<FrameSplit> {
    split_frames(&session.labels, &session.segment_ids, train_fraction, seed)
}

/// Timestamps whose full window `t - lag ..= t` lies inside one of `ranges`.
pub fn window_ends(ranges: &[Range<usize>], lag: usize) -> Vec<usize> {
    ranges.iter().flat_map(|r| (r.start + lag).min(r.end)..r.end).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use crate::sim::{simulate_session, RoomState, ScenarioScript, SceneConfig, Segment};
    use proptest::prelude::*;
    use rand::Rng;

    fn tensor(len: usize, dims: Dims, f: impl Fn(usize) -> f64) -> RawAmplitudes<f64> {
        let n = len * dims.vector_len();
        PairStreams::new(dims, len, (0..dims.num_pairs).map(|p| (0..n).map(|i| f(i + p * n)).collect()).collect())
            .unwrap()
    }

    #[test]
    fn affine_example() {
        let mut out = [0.0; 3];
        assert!(normalize_vector(&[2.0, 4.0, 6.0], 1, &mut out).unwrap().is_empty());
        assert_eq!(out, [0.0, 0.5, 1.0]);
    }

    #[test]
    fn flat_slice_is_zero_and_flagged() {
        let mut out = [9.0; 3];
        assert_eq!(normalize_vector(&[5.0, 5.0, 5.0], 1, &mut out).unwrap(), vec![0]);
        assert_eq!(out, [0.0; 3]);
        let raw = tensor(2, Dims::new(1, 3, 1), |_| 5.0);
        let n = normalize(&raw).unwrap();
        assert_eq!(n.degenerate, vec![(0, 0, 0), (1, 0, 0)]);
    }

    #[test]
    fn antenna_pairs_normalised_separately() {
        // k-major layout: [k0l0, k0l1, k1l0, k1l1]
        let mut out = [0.0; 4];
        normalize_vector(&[1.0, 10.0, 3.0, 20.0], 2, &mut out).unwrap();
        assert_eq!(out, [0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn bad_values_rejected() {
        let mut out = [0.0; 2];
        assert!(matches!(normalize_vector(&[f64::NAN, 1.0], 1, &mut out), Err(Error::Data(_))));
        assert!(matches!(normalize_vector(&[-1.0, 1.0], 1, &mut out), Err(Error::Data(_))));
    }

    #[test]
    fn seeded_slices_hit_exact_bounds() {
        let mut rng = rng_for(&[77]);
        for _ in 0..100 {
            let raw: Vec<f32> = (0..16).map(|_| rng.gen_range(0.0..5.0)).collect();
            let mut out = vec![0.0f32; 16];
            normalize_vector(&raw, 2, &mut out).unwrap();
            for l in 0..2 {
                let s: Vec<f32> = out.iter().skip(l).step_by(2).copied().collect();
                assert_eq!(s.iter().copied().fold(f32::INFINITY, f32::min), 0.0);
                assert_eq!(s.iter().copied().fold(f32::NEG_INFINITY, f32::max), 1.0);
            }
        }
    }

    #[test]
    fn window_shapes() {
        let dims = Dims::new(1, 8, 2);
        let amps = normalize(&tensor(60, dims, |i| (i % 7) as f64)).unwrap();
        assert_eq!(amps.make_window(50, 0, 3, 1, 50).unwrap().0.len(), 51);
        assert_eq!(amps.make_window(7, 0, 3, 1, 0).unwrap().0, vec![amps.values.get(7, 0, 3, 1)]);
        assert!(matches!(
            amps.make_window(19, 0, 0, 0, 20),
            Err(Error::InsufficientHistory { needed: 20, got: 19 })
        ));
        let m = amps.make_window_matrix(30, 0, 20).unwrap();
        assert_eq!((m.rows, m.cols, m.data.len()), (21, 16, 21 * 16));
        assert_eq!(m.row(20), amps.amplitude_vector(30, 0));
        let w = amps.make_window(30, 0, 5, 1, 20).unwrap();
        assert_eq!(*w.0.last().unwrap(), amps.values.get(30, 0, 5, 1));
        let mut col = vec![0.0; 21];
        column_into(&m.data, 16, 5 * 2 + 1, &mut col);
        assert_eq!(col, w.0);
    }

    #[test]
    fn full_scale_window_matrix() {
        let dims = Dims::new(2, 56, 4);
        let amps = normalize(&tensor(51, dims, |i| (i % 13) as f64)).unwrap();
        let m = amps.make_window_matrix(50, 1, 50).unwrap();
        assert_eq!((m.rows, m.cols), (51, 224));
    }

    fn four_case_session() -> LabeledSession {
        use RoomState::*;
        let script = ScenarioScript::new(vec![
            Segment::new(10.0, Empty, Empty),
            Segment::new(10.0, Dynamic, Empty),
            Segment::new(10.0, Empty, Dynamic),
            Segment::new(10.0, StaticLos, Dynamic),
        ]);
        simulate_session(&SceneConfig::desk(), &script).unwrap()
    }

    #[test]
    fn stratified_split_two_to_one() {
        let s = four_case_session();
        let split = split_dataset(&s, 2.0 / 3.0, 1).unwrap();
        for c in 0..4 {
            let count = |rs: &[Range<usize>]| rs.iter().flat_map(|r| r.clone()).filter(|&i| s.labels[i].0 == c).count();
            let (tr, te) = (count(&split.train), count(&split.test));
            assert_eq!(tr + te, 100);
            assert!((tr as i64 - 2 * te as i64).abs() <= 2, "{tr} vs {te}");
        }
        let tr: Vec<usize> = window_ends(&split.train, 5);
        let te: Vec<usize> = window_ends(&split.test, 5);
        for t in &tr {
            for u in &te {
                assert!(t.abs_diff(*u) > 0);
            }
        }
    }

    #[test]
    fn windows_never_cross_ranges() {
        let ranges = vec![0..10, 10..13, 20..30];
        let ends = window_ends(&ranges, 4);
        assert_eq!(ends, vec![4, 5, 6, 7, 8, 9, 24, 25, 26, 27, 28, 29]);
    }

    proptest! {
        #[test]
        fn normalisation_idempotent(raw in proptest::collection::vec(0.0f64..100.0, 12)) {
            let mut once = vec![0.0; 12];
            let flat = normalize_vector(&raw, 3, &mut once).unwrap();
            let mut twice = vec![0.0; 12];
            normalize_vector(&once, 3, &mut twice).unwrap();
            if flat.is_empty() {
                prop_assert_eq!(once.clone(), twice);
            }
            prop_assert!(once.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn split_is_disjoint_partition(lens in proptest::collection::vec(1usize..40, 1..12), seed in 0u64..1000) {
            let mut labels = Vec::new();
            let mut segs = Vec::new();
            for (i, n) in lens.iter().enumerate() {
                labels.extend(std::iter::repeat(CaseLabel(i % 4)).take(*n));
                segs.extend(std::iter::repeat(i).take(*n));
            }
            let split = split_frames(&labels, &segs, 2.0 / 3.0, seed).unwrap();
            let mut all: Vec<usize> = split.train.iter().chain(&split.test).flat_map(|r| r.clone()).collect();
            all.sort();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for r in split.train.iter().chain(&split.test) {
                prop_assert!(segs[r.clone()].iter().all(|&s| s == segs[r.start]));
            }
        }
    }
}
