//! Binary model checkpoints.
//!
//! Layout: the 8-byte magic `ALPDCKPT`, a little-endian `u32` format
//! version, a `u32` header length, the JSON header, then every tensor as
//! little-endian `f32` in header order. Models are rebuilt from the stored
//! configuration and then overwritten tensor by tensor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{f32_bytes, f32_from_bytes, write_atomic};
use crate::baseline::{BaselineConfig, BaselineKind, FcnBaseline, LstmBaseline};
use crate::error::{Error, Result};
use crate::model::{AlpdModel, Classifier, ModelConfig, Sample};
use crate::nn::{Mlp, Module, ParamSet, Tensor};
use crate::rng::rng_for;
use crate::scae::ClusterEncoder;
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"ALPDCKPT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    /// Cluster encoders only, the output of autoencoder training.
    Encoders,
    Alpd,
    Fcn,
    LstmOnly,
}

/// Hyperparameters repeated in the header so a checkpoint can be checked
/// against a dataset without rebuilding the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub lag: usize,
    pub latent_len: usize,
    pub lambda: f64,
    pub class_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct EncoderSpec {
    pair: usize,
    sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: CheckpointKind,
    echo: ConfigEcho,
    model: Option<ModelConfig>,
    baseline: Option<BaselineConfig>,
    encoders: Vec<EncoderSpec>,
    tensors: Vec<TensorEntry>,
}

/// A parsed checkpoint: header plus `f32` parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    header: Header,
    params: ParamSet<f32>,
}

/// A classifier restored from a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadedClassifier<S> {
    Alpd(AlpdModel<S>),
    Fcn(FcnBaseline<S>),
    LstmOnly(LstmBaseline<S>),
}

impl<S: Scalar> LoadedClassifier<S> {
    pub fn as_classifier(&self) -> &dyn Classifier<S> {
        match self {
            Self::Alpd(m) => m,
            Self::Fcn(m) => m,
            Self::LstmOnly(m) => m,
        }
    }

    pub fn lag(&self) -> usize {
        match self {
            Self::Alpd(m) => m.cfg.lag,
            Self::Fcn(m) => m.cfg.lag,
            Self::LstmOnly(m) => m.cfg.lag,
        }
    }

    pub fn probs(&self, x: &Sample<S>) -> Result<Vec<S>> {
        self.as_classifier().probs(x)
    }
}

fn encoder_specs<S: Scalar>(encoders: &[ClusterEncoder<S>]) -> Vec<EncoderSpec> {
    encoders.iter().map(|e| EncoderSpec { pair: e.pair, sizes: e.mlp.sizes() }).collect()
}

fn rebuild_encoders<S: Scalar>(specs: &[EncoderSpec]) -> Result<Vec<ClusterEncoder<S>>> {
    specs
        .iter()
        .map(|s| {
            if s.sizes.len() < 2 || s.sizes.contains(&0) {
                return Err(Error::Format(format!("bad encoder sizes {:?}", s.sizes)));
            }
            Ok(ClusterEncoder { pair: s.pair, mlp: Mlp::new(&s.sizes, &mut rng_for(&[0])) })
        })
        .collect()
}

fn encoder_params<S: Scalar>(encoders: &[ClusterEncoder<S>]) -> Result<ParamSet<S>> {
    let mut ps = ParamSet::new();
    for (i, e) in encoders.iter().enumerate() {
        ps.extend(e.param_set().prefixed(&format!("encoders.{i}.")))?;
    }
    Ok(ps)
}

impl Checkpoint {
    fn build<S: Scalar>(
        kind: CheckpointKind,
        echo: ConfigEcho,
        model: Option<ModelConfig>,
        baseline: Option<BaselineConfig>,
        encoders: Vec<EncoderSpec>,
        params: ParamSet<S>,
    ) -> Self {
        let params = params.cast::<f32>();
        let tensors = params.iter().map(|(n, t)| TensorEntry { name: n.to_string(), shape: t.shape().to_vec() }).collect();
        Self { header: Header { kind, echo, model, baseline, encoders, tensors }, params }
    }

    /// `lag` and `lambda` are recorded for reference only.
    pub fn from_encoders<S: Scalar>(encoders: &[ClusterEncoder<S>], lag: usize, lambda: f64) -> Result<Self> {
        let latent_len = encoders.first().map_or(0, |e| e.latent_len());
        let echo = ConfigEcho { lag, latent_len, lambda, class_count: 0 };
        Ok(Self::build(CheckpointKind::Encoders, echo, None, None, encoder_specs(encoders), encoder_params(encoders)?))
    }

    pub fn from_alpd<S: Scalar>(model: &AlpdModel<S>, lambda: f64) -> Self {
        let c = &model.cfg;
        let echo = ConfigEcho { lag: c.lag, latent_len: c.latent_len, lambda, class_count: c.class_count };
        Self::build(CheckpointKind::Alpd, echo, Some(c.clone()), None, encoder_specs(&model.encoders), model.param_set())
    }

    pub fn from_fcn<S: Scalar>(model: &FcnBaseline<S>) -> Self {
        Self::from_baseline(CheckpointKind::Fcn, &model.cfg, model.param_set())
    }

    pub fn from_lstm<S: Scalar>(model: &LstmBaseline<S>) -> Self {
        Self::from_baseline(CheckpointKind::LstmOnly, &model.cfg, model.param_set())
    }

    fn from_baseline<S: Scalar>(kind: CheckpointKind, cfg: &BaselineConfig, params: ParamSet<S>) -> Self {
        let echo = ConfigEcho { lag: cfg.lag, latent_len: 0, lambda: 0.0, class_count: cfg.class_count };
        Self::build(kind, echo, None, Some(cfg.clone()), Vec::new(), params)
    }

    pub fn kind(&self) -> CheckpointKind {
        self.header.kind
    }

    pub fn echo(&self) -> ConfigEcho {
        self.header.echo
    }

    pub fn model_config(&self) -> Option<&ModelConfig> {
        self.header.model.as_ref()
    }

    pub fn baseline_config(&self) -> Option<&BaselineConfig> {
        self.header.baseline.as_ref()
    }

    pub fn params(&self) -> &ParamSet<f32> {
        &self.params
    }

    fn expect(&self, kind: CheckpointKind) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::Format(format!("checkpoint holds {:?}, expected {:?}", self.header.kind, kind)));
        }
        Ok(())
    }

    /// Cluster encoders stored in an encoder or full-model checkpoint.
    pub fn encoders<S: Scalar>(&self) -> Result<Vec<ClusterEncoder<S>>> {
        if !matches!(self.header.kind, CheckpointKind::Encoders | CheckpointKind::Alpd) {
            return Err(Error::Format(format!("checkpoint of kind {:?} holds no encoders", self.header.kind)));
        }
        let ps = self.params.cast::<S>();
        let mut encoders = rebuild_encoders::<S>(&self.header.encoders)?;
        for (i, e) in encoders.iter_mut().enumerate() {
            e.load_params(&ps.subset(&format!("encoders.{i}.")))?;
        }
        Ok(encoders)
    }

    pub fn alpd<S: Scalar>(&self) -> Result<AlpdModel<S>> {
        self.expect(CheckpointKind::Alpd)?;
        let cfg = self.header.model.clone().ok_or_else(|| Error::Format("model checkpoint without config".into()))?;
        let mut m = AlpdModel::new(cfg, rebuild_encoders(&self.header.encoders)?)?;
        m.load_params(&self.params.cast())?;
        Ok(m)
    }

    pub fn classifier<S: Scalar>(&self) -> Result<LoadedClassifier<S>> {
        let baseline = || self.header.baseline.clone().ok_or_else(|| Error::Format("baseline checkpoint without config".into()));
        Ok(match self.header.kind {
            CheckpointKind::Alpd => LoadedClassifier::Alpd(self.alpd()?),
            CheckpointKind::Fcn => {
                let mut m = FcnBaseline::new(baseline()?);
                m.load_params(&self.params.cast())?;
                LoadedClassifier::Fcn(m)
            }
            CheckpointKind::LstmOnly => {
                let mut m = LstmBaseline::new(baseline()?);
                m.load_params(&self.params.cast())?;
                LoadedClassifier::LstmOnly(m)
            }
            CheckpointKind::Encoders => {
                return Err(Error::Format("checkpoint holds cluster encoders only, not a classifier".into()))
            }
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + header.len() + 4 * self.params.num_values());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in self.params.iter() {
            out.extend(f32_bytes(t.data()));
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let word = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
        let version = word(8);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version { found: version, supported: CHECKPOINT_VERSION });
        }
        let hlen = word(12) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| Error::Format("truncated checkpoint header".into()))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        let mut data = &bytes[16 + hlen..];
        let mut params = ParamSet::new();
        for entry in &header.tensors {
            let n: usize = entry.shape.iter().product();
            if data.len() < 4 * n {
                return Err(Error::Format(format!("truncated tensor {}", entry.name)));
            }
            params.insert(entry.name.clone(), Tensor::from_vec(&entry.shape, f32_from_bytes(&data[..4 * n]))?)?;
            data = &data[4 * n..];
        }
        if !data.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after tensors", data.len())));
        }
        Ok(Self { header, params })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

/// Baseline kinds map one to one onto checkpoint kinds.
impl From<BaselineKind> for CheckpointKind {
    fn from(k: BaselineKind) -> Self {
        match k {
            BaselineKind::Fcn => Self::Fcn,
            BaselineKind::LstmOnly => Self::LstmOnly,
        }
    }
}

fn shape(pairs: usize, values: usize, classes: usize) -> String {
    format!("[{pairs} pairs x {values} values, {classes} classes]")
}

impl Checkpoint {
    /// Fails with a dimension error naming both shapes when the stored model
    /// cannot read the archive described by `meta`.
    pub fn check_dataset(&self, meta: &super::ArchiveMetadata) -> Result<()> {
        let values = meta.num_subcarriers * meta.num_antenna_pairs;
        let dataset = shape(meta.num_pairs, values, meta.label_map.len());
        let (fits, model) = match (&self.header.model, &self.header.baseline) {
            (Some(m), _) => (
                m.num_pairs == meta.num_pairs && m.vector_len == values && m.class_count == meta.label_map.len(),
                shape(m.num_pairs, m.vector_len, m.class_count),
            ),
            (None, Some(b)) => (
                b.pair < meta.num_pairs && b.vector_len == values && b.class_count == meta.label_map.len(),
                shape(b.pair + 1, b.vector_len, b.class_count),
            ),
            (None, None) => {
                let e = &self.header.encoders;
                let fits = e.iter().all(|s| s.pair < meta.num_pairs);
                let pairs: Vec<usize> = e.iter().map(|s| s.pair + 1).collect();
                (fits, format!("encoders for pairs {pairs:?}"))
            }
        };
        if fits {
            Ok(())
        } else {
            Err(Error::Dimension { model, dataset })
        }
    }
}
