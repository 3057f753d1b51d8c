//! Dataset directory: `metadata.json`, one little-endian `f32` blob per
//! transmission pair (row-major `[N][K * L]`, raw amplitudes) and
//! `labels.csv` with one record per frame.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{f32_bytes, f32_from_bytes, write_atomic};
use crate::dataset::WindowSet;
use crate::error::{Error, Result};
use crate::preprocess::{Dims, RawAmplitudes};
use crate::sim::{CaseLabel, LabeledSession, StateTag};

pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMetadata {
    pub format_version: u32,
    pub num_pairs: usize,
    pub num_subcarriers: usize,
    pub num_antenna_pairs: usize,
    pub sample_rate: f64,
    pub frames: usize,
    /// Display name of each label index.
    pub label_map: Vec<String>,
    pub state_tags: Vec<String>,
    pub pair_files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetArchive {
    pub meta: ArchiveMetadata,
    pub raw: RawAmplitudes<f32>,
    pub labels: Vec<CaseLabel>,
    pub tags: Vec<StateTag>,
    pub segment_ids: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRecord {
    index: usize,
    label: usize,
    state: String,
    segment: usize,
}

impl DatasetArchive {
    pub fn from_session(session: &LabeledSession, class_count: usize) -> Result<Self> {
        if session.is_empty() {
            return Err(Error::Empty("session has no frames".into()));
        }
        if let Some(bad) = session.labels.iter().find(|l| l.index() >= class_count) {
            return Err(Error::Config(format!("{bad} outside {class_count} classes")));
        }
        let raw = RawAmplitudes::<f32>::from_session(session);
        let d = raw.dims;
        let meta = ArchiveMetadata {
            format_version: ARCHIVE_VERSION,
            num_pairs: d.num_pairs,
            num_subcarriers: d.num_subcarriers,
            num_antenna_pairs: d.num_antenna_pairs,
            sample_rate: session.sample_rate,
            frames: session.len(),
            label_map: (0..class_count).map(|c| CaseLabel(c).to_string()).collect(),
            state_tags: StateTag::ALL.iter().map(|t| t.as_str().to_string()).collect(),
            pair_files: (0..d.num_pairs).map(|p| format!("pair_{}.f32", p + 1)).collect(),
        };
        Ok(Self {
            meta,
            raw,
            labels: session.labels.clone(),
            tags: session.tags.clone(),
            segment_ids: session.segment_ids.clone(),
        })
    }

    pub fn class_count(&self) -> usize {
        self.meta.label_map.len()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (p, name) in self.meta.pair_files.iter().enumerate() {
            write_atomic(&dir.join(name), &f32_bytes(&self.raw.pairs[p]))?;
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for i in 0..self.labels.len() {
            w.serialize(LabelRecord {
                index: i,
                label: self.labels[i].index(),
                state: self.tags[i].as_str().to_string(),
                segment: self.segment_ids[i],
            })
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        let labels = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        write_atomic(&dir.join("labels.csv"), &labels)?;
        let meta = serde_json::to_vec_pretty(&self.meta).map_err(|e| Error::Format(e.to_string()))?;
        write_atomic(&dir.join("metadata.json"), &meta)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("metadata.json");
        let text = std::fs::read(&meta_path)
            .map_err(|e| Error::Format(format!("cannot read {}: {e}", meta_path.display())))?;
        let version: serde_json::Value = serde_json::from_slice(&text).map_err(|e| Error::Format(e.to_string()))?;
        match version.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == ARCHIVE_VERSION as u64 => {}
            Some(v) => return Err(Error::Version { found: v as u32, supported: ARCHIVE_VERSION }),
            None => return Err(Error::Format("dataset metadata has no format_version".into())),
        }
        let meta: ArchiveMetadata = serde_json::from_value(version).map_err(|e| Error::Format(e.to_string()))?;
        let dims = Dims::new(meta.num_pairs, meta.num_subcarriers, meta.num_antenna_pairs);
        if meta.pair_files.len() != meta.num_pairs {
            return Err(Error::Format(format!("{} pair files for {} pairs", meta.pair_files.len(), meta.num_pairs)));
        }
        let want = meta.frames * dims.vector_len() * 4;
        let mut pairs = Vec::with_capacity(meta.num_pairs);
        for name in &meta.pair_files {
            let bytes = std::fs::read(dir.join(name))?;
            if bytes.len() != want {
                return Err(Error::Format(format!("{name}: {} bytes, expected {want}", bytes.len())));
            }
            pairs.push(f32_from_bytes(&bytes));
        }
        let raw = RawAmplitudes::new(dims, meta.frames, pairs)?;

        let mut rdr = csv::Reader::from_path(dir.join("labels.csv")).map_err(|e| Error::Format(e.to_string()))?;
        let (mut labels, mut tags, mut segment_ids) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.deserialize::<LabelRecord>().enumerate() {
            let rec = rec.map_err(|e| Error::Format(format!("labels.csv: {e}")))?;
            if rec.index != i {
                return Err(Error::Format(format!("labels.csv: record {i} has index {}", rec.index)));
            }
            if rec.label >= meta.label_map.len() {
                return Err(Error::Format(format!("labels.csv: label {} outside label map", rec.label)));
            }
            let tag = StateTag::parse(&rec.state)
                .ok_or_else(|| Error::Format(format!("labels.csv: unknown state {}", rec.state)))?;
            labels.push(CaseLabel(rec.label));
            tags.push(tag);
            segment_ids.push(rec.segment);
        }
        if labels.len() != meta.frames {
            return Err(Error::Format(format!("labels.csv has {} records for {} frames", labels.len(), meta.frames)));
        }
        Ok(Self { meta, raw, labels, tags, segment_ids })
    }

    pub fn window_set(&self, lag: usize) -> Result<WindowSet<f32>> {
        WindowSet::from_raw(&self.raw, &self.labels, &self.tags, &self.segment_ids, lag)
    }
}
