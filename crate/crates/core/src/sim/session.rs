use serde::{Deserialize, Serialize};

use super::channel::{ComplexCsiFrame, Scene};
use super::config::SceneConfig;
use super::occupancy::{CaseLabel, OccupancyState, RoomState, StateTag};
use crate::error::{Error, Result};

/// One stretch of constant occupancy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration_s: f64,
    pub room1: RoomState,
    pub room2: RoomState,
    /// Test condition recorded in the labels; defaults to `normal`.
    #[serde(default)]
    pub state: StateTag,
    /// Overrides the scene's interference level for this segment.
    #[serde(default)]
    pub interference_level: Option<f64>,
}

impl Segment {
    pub fn new(duration_s: f64, room1: RoomState, room2: RoomState) -> Self {
        Self { duration_s, room1, room2, state: StateTag::Normal, interference_level: None }
    }

    pub fn tagged(mut self, state: StateTag) -> Self {
        self.state = state;
        self
    }

    pub fn with_interference(mut self, level: f64) -> Self {
        self.interference_level = Some(level);
        self
    }

    pub fn occupancy(&self) -> OccupancyState {
        OccupancyState::new(self.room1, self.room2)
    }
}

/// Time-ordered list of segments. `realization` selects an independent draw of
/// walking trajectories and noise over the same room geometry, so a test
/// session can share the training scene without replaying its samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    #[serde(default)]
    pub realization: u64,
    #[serde(rename = "segment", default)]
    pub segments: Vec<Segment>,
}

impl ScenarioScript {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { realization: 0, segments }
    }

    pub fn with_realization(mut self, realization: u64) -> Self {
        self.realization = realization;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario script: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Simulated recording with per-frame ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSession {
    pub frames: Vec<ComplexCsiFrame>,
    pub labels: Vec<CaseLabel>,
    pub states: Vec<OccupancyState>,
    pub tags: Vec<StateTag>,
    /// Index of the script segment each frame belongs to.
    pub segment_ids: Vec<usize>,
    pub sample_rate: f64,
}

impl LabeledSession {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn frames_in(duration_s: f64, sample_rate: f64) -> usize {
    (duration_s * sample_rate).round().max(0.0) as usize
}

pub fn simulate_session(cfg: &SceneConfig, script: &ScenarioScript) -> Result<LabeledSession> {
    if script.segments.is_empty() {
        return Err(Error::Empty("scenario script has no segments".into()));
    }
    let scene = Scene::new(cfg)?;
    let mut out = LabeledSession {
        frames: Vec::new(),
        labels: Vec::new(),
        states: Vec::new(),
        tags: Vec::new(),
        segment_ids: Vec::new(),
        sample_rate: cfg.sample_rate,
    };
    let mut t = 0u64;
    for (sid, seg) in script.segments.iter().enumerate() {
        if !(seg.duration_s >= 0.0 && seg.duration_s.is_finite()) {
            return Err(Error::Config(format!("segment {sid}: invalid duration {}", seg.duration_s)));
        }
        let level = seg.interference_level.unwrap_or(cfg.interference_level);
        if !(level >= 0.0) {
            return Err(Error::Config(format!("segment {sid}: negative interference level")));
        }
        let occ = seg.occupancy();
        for _ in 0..frames_in(seg.duration_s, cfg.sample_rate) {
            out.frames.push(scene.frame(&occ, t, script.realization, level));
            out.labels.push(occ.case());
            out.states.push(occ);
            out.tags.push(seg.state);
            out.segment_ids.push(sid);
            t += 1;
        }
    }
    if out.frames.is_empty() {
        return Err(Error::Empty("scenario script produced no frames".into()));
    }
    Ok(out)
}
