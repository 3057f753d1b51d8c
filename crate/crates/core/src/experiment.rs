//! Two-stage training, evaluation, ablations, sweeps and baselines.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::baseline::{BaselineConfig, BaselineKind, FcnBaseline, LstmBaseline};
use crate::dataset::{build_script, LatentCache, ScriptPlan, WindowSet};
use crate::error::{Error, Result};
use crate::model::{argmax, AlpdModel, Classifier, ModelConfig};
use crate::nn::{Adam, AdamConfig, ConvConfig};
use crate::rng::{rng_for, TAG_SHUFFLE};
use crate::scae::{export_cluster_encoder, train_scae, ClusterEncoder, ScaeConfig, ScaeHistory};
use crate::scalar::Scalar;
use crate::sim::{simulate_session, LabeledSession, SceneConfig, StateTag};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairSelection {
    #[serde(rename = "1")]
    Pair1,
    #[serde(rename = "2")]
    Pair2,
    #[default]
    #[serde(rename = "both")]
    Both,
}

impl PairSelection {
    pub fn indices(self) -> Vec<usize> {
        match self {
            Self::Pair1 => vec![0],
            Self::Pair2 => vec![1],
            Self::Both => vec![0, 1],
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "1" => Some(Self::Pair1),
            "2" => Some(Self::Pair2),
            "both" => Some(Self::Both),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pair1 => "1",
            Self::Pair2 => "2",
            Self::Both => "both",
        }
    }
}

/// Every knob of one train-and-evaluate run. Defaults are the desk-scale grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Lag depth T (windows hold `T + 1` samples).
    pub lag: usize,
    pub lambda: f64,
    pub latent_len: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub train_states: Vec<StateTag>,
    pub test_states: Vec<StateTag>,
    pub interference_level: f64,
    pub segment_windows: usize,
    pub pairs: PairSelection,
    pub use_static: bool,
    pub use_dynamic: bool,
    pub class_count: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub scae_epochs: usize,
    pub scae_batch_size: usize,
    pub scae_lr: f64,
    pub pair_budget: usize,
    pub scae_timestamps_per_epoch: Option<usize>,
    pub encoder_hidden: Vec<usize>,
    pub conv_channels: Vec<usize>,
    pub conv_kernel: usize,
    pub conv_stride: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub classifier_hidden: Vec<usize>,
    pub fine_tune_encoders: bool,
    /// See [`ModelConfig::static_gain`].
    pub static_gain: Option<f64>,
    /// Transmission pair read by the baselines.
    pub baseline_pair: usize,
    pub scene: SceneConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let m = ModelConfig::desk();
        let s = ScaeConfig::default();
        Self {
            seed: 0,
            lag: 20,
            lambda: s.lambda,
            latent_len: s.latent_len,
            train_per_class: 2000,
            test_per_class: 400,
            train_states: vec![StateTag::Normal, StateTag::Static],
            test_states: vec![StateTag::Normal, StateTag::Static],
            interference_level: 1.0,
            segment_windows: 200,
            pairs: PairSelection::Both,
            use_static: true,
            use_dynamic: true,
            class_count: 4,
            epochs: 8,
            batch_size: 64,
            lr: 1e-3,
            scae_epochs: 3,
            scae_batch_size: s.batch_size,
            scae_lr: s.lr,
            pair_budget: s.pair_budget,
            scae_timestamps_per_epoch: Some(2000),
            encoder_hidden: s.hidden,
            conv_channels: m.conv.channels,
            conv_kernel: m.conv.kernel,
            conv_stride: m.conv.stride,
            lstm_hidden: m.lstm_hidden,
            lstm_layers: m.lstm_layers,
            classifier_hidden: m.classifier_hidden,
            fine_tune_encoders: false,
            static_gain: None,
            baseline_pair: 0,
            scene: SceneConfig::desk(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.model_config().validate()?;
        self.scae_config().validate()?;
        if self.pairs.indices().iter().any(|&p| p >= self.scene.num_pairs) {
            return Err(Error::Config(format!(
                "pair selection {} needs more than {} transmission pairs",
                self.pairs.as_str(),
                self.scene.num_pairs
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::Config("data amounts must be positive".into()));
        }
        Ok(())
    }

    pub fn scae_config(&self) -> ScaeConfig {
        ScaeConfig {
            latent_len: self.latent_len,
            hidden: self.encoder_hidden.clone(),
            lambda: self.lambda,
            epochs: self.scae_epochs,
            batch_size: self.scae_batch_size,
            pair_budget: self.pair_budget,
            max_timestamps_per_epoch: self.scae_timestamps_per_epoch,
            lr: self.scae_lr,
            seed: self.seed,
            ..ScaeConfig::default()
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            num_pairs: self.scene.num_pairs,
            pairs: self.pairs.indices(),
            vector_len: self.scene.vector_len(),
            lag: self.lag,
            latent_len: self.latent_len,
            use_static: self.use_static,
            use_dynamic: self.use_dynamic,
            conv: ConvConfig { channels: self.conv_channels.clone(), kernel: self.conv_kernel, stride: self.conv_stride },
            lstm_hidden: self.lstm_hidden,
            lstm_layers: self.lstm_layers,
            classifier_hidden: self.classifier_hidden.clone(),
            class_count: self.class_count,
            fine_tune_encoders: self.fine_tune_encoders,
            static_gain: self.static_gain,
            seed: self.seed,
        }
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            pair: self.baseline_pair,
            vector_len: self.scene.vector_len(),
            lag: self.lag,
            lstm_hidden: self.lstm_hidden,
            lstm_layers: self.lstm_layers,
            class_count: self.class_count,
            seed: self.seed,
            ..BaselineConfig::default()
        }
    }

    fn plan(&self, per_class: usize, states: &[StateTag], realization: u64) -> ScriptPlan {
        ScriptPlan {
            windows_per_class: per_class,
            lag: self.lag,
            states: states.to_vec(),
            interference_level: self.interference_level,
            sample_rate: self.scene.sample_rate,
            segment_windows: self.segment_windows,
            class_count: self.class_count,
            realization,
        }
    }

    pub fn train_plan(&self) -> ScriptPlan {
        self.plan(self.train_per_class, &self.train_states, 0)
    }

    pub fn test_plan(&self) -> ScriptPlan {
        self.plan(self.test_per_class, &self.test_states, 1)
    }
}

/// Raw training and test recordings for `cfg`, before windowing.
pub fn simulate_sessions(cfg: &ExperimentConfig) -> Result<(LabeledSession, LabeledSession)> {
    cfg.validate()?;
    let scene = cfg.scene.clone().with_seed(cfg.scene.seed ^ cfg.seed);
    let train = simulate_session(&scene, &build_script(&cfg.train_plan())?)?;
    let test = simulate_session(&scene, &build_script(&cfg.test_plan())?)?;
    Ok((train, test))
}

/// Training and test windows over one scene; the test session is an
/// independent realisation of walkers and noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<S> {
    pub train: WindowSet<S>,
    pub test: WindowSet<S>,
}

impl<S: Scalar> Dataset<S> {
    pub fn simulate(cfg: &ExperimentConfig) -> Result<Self> {
        let (train, test) = simulate_sessions(cfg)?;
        Ok(Self { train: WindowSet::from_session(&train, cfg.lag)?, test: WindowSet::from_session(&test, cfg.lag)? })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

/// Minibatch cross-entropy training; returns the mean loss of each epoch.
pub fn fit<S: Scalar, C: Classifier<S>>(
    model: &mut C,
    set: &WindowSet<S>,
    latents: Option<&LatentCache<S>>,
    cfg: &FitConfig,
) -> Result<Vec<f64>> {
    let counts = set.class_counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Data("training set needs at least two classes".into()));
    }
    if set.class_count() > model.class_count() {
        return Err(Error::Dimension {
            model: format!("{} classes", model.class_count()),
            dataset: format!("{} classes", set.class_count()),
        });
    }
    let mut adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut rng = rng_for(&[cfg.seed, TAG_SHUFFLE, 1]);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut frozen = Vec::new();
    model.visit("", &mut |name, _| frozen.push(name.to_string()));
    frozen.retain(|n| !model.is_trainable(n));
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            model.zero_grad();
            let scale = S::of(1.0 / batch.len() as f64);
            for &i in batch {
                total += model.backprop(&set.sample(i, latents), set.labels[i], scale)?.0;
            }
            adam.step(model, S::one(), &|name| !frozen.iter().any(|f| f == name));
        }
        history.push(total / set.len() as f64);
    }
    Ok(history)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateAccuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Fraction of test windows classified correctly.
    pub accuracy: f64,
    pub samples: usize,
    pub class_count: usize,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<usize>>,
    pub per_state: BTreeMap<String, StateAccuracy>,
    /// Mean cross-entropy per training epoch.
    pub train_loss: Vec<f64>,
    /// Autoencoder objective per epoch, one history per trained pair.
    pub scae_loss: Vec<ScaeHistory>,
    pub wall_clock_s: f64,
}

impl EvalReport {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], tags: &[StateTag], class_count: usize) -> Result<Self> {
        if truth.len() != predicted.len() || truth.len() != tags.len() {
            return Err(crate::error::shape_err(truth.len(), predicted.len()));
        }
        let mut confusion = vec![vec![0; class_count]; class_count];
        let mut per_state: BTreeMap<String, StateAccuracy> = BTreeMap::new();
        let mut correct = 0;
        for ((&t, &p), tag) in truth.iter().zip(predicted).zip(tags) {
            if t >= class_count || p >= class_count {
                return Err(Error::Dimension {
                    model: format!("{class_count} classes"),
                    dataset: format!("label {}", t.max(p)),
                });
            }
            confusion[t][p] += 1;
            let e = per_state.entry(tag.as_str().to_string()).or_default();
            e.total += 1;
            if t == p {
                correct += 1;
                e.correct += 1;
            }
        }
        for e in per_state.values_mut() {
            e.accuracy = e.correct as f64 / e.total as f64;
        }
        let n = truth.len();
        Ok(Self {
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            samples: n,
            class_count,
            confusion,
            per_state,
            ..Self::default()
        })
    }

    pub fn state_accuracy(&self, tag: StateTag) -> Option<f64> {
        self.per_state.get(tag.as_str()).map(|s| s.accuracy)
    }

    /// Metrics that must reproduce exactly for a fixed seed (everything but timing).
    pub fn metrics_match(&self, other: &Self, tol: f64) -> bool {
        let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol);
        let scae = |r: &Self| -> Vec<f64> {
            r.scae_loss.iter().flat_map(|h| h.epochs.iter().flat_map(|e| [e.l_recst, e.l_clst, e.l_total])).collect()
        };
        (self.accuracy - other.accuracy).abs() <= tol
            && self.confusion == other.confusion
            && self.per_state == other.per_state
            && close(&self.train_loss, &other.train_loss)
            && close(&scae(self), &scae(other))
    }
}

pub fn evaluate<S: Scalar, C: Classifier<S> + ?Sized>(
    model: &C,
    set: &WindowSet<S>,
    latents: Option<&LatentCache<S>>,
    state_filter: Option<StateTag>,
) -> Result<EvalReport> {
    if set.class_count() > model.class_count() {
        return Err(Error::Dimension {
            model: format!("{} classes", model.class_count()),
            dataset: format!("{} classes", set.class_count()),
        });
    }
    let idx: Vec<usize> = match state_filter {
        Some(tag) => set.indices_with(tag),
        None => (0..set.len()).collect(),
    };
    let mut pred = Vec::with_capacity(idx.len());
    for &i in &idx {
        pred.push(argmax(&model.probs(&set.sample(i, latents))?));
    }
    let truth: Vec<usize> = idx.iter().map(|&i| set.labels[i]).collect();
    let tags: Vec<StateTag> = idx.iter().map(|&i| set.tags[i]).collect();
    EvalReport::from_predictions(&truth, &pred, &tags, model.class_count())
}

/// Stage one: one autoencoder per pair in `pairs`, exported as cluster encoders.
pub fn train_encoders<S: Scalar>(
    set: &WindowSet<S>,
    pairs: &[usize],
    cfg: &ScaeConfig,
) -> Result<(Vec<ClusterEncoder<S>>, Vec<ScaeHistory>)> {
    let mut encoders = Vec::with_capacity(pairs.len());
    let mut histories = Vec::with_capacity(pairs.len());
    for &p in pairs {
        let (m, h) = train_scae(&set.amps, &set.ends, set.lag, p, cfg)?;
        encoders.push(export_cluster_encoder(&m));
        histories.push(h);
    }
    Ok((encoders, histories))
}

/// A trained network with its test report.
#[derive(Clone, Debug)]
pub struct TrainedRun<S> {
    pub model: AlpdModel<S>,
    pub report: EvalReport,
}

/// Stage two alone: builds the network from `cfg` around `encoders` and fits
/// it to `train`. Returns the model and the per-epoch training loss.
pub fn train_classifier<S: Scalar>(
    train: &WindowSet<S>,
    cfg: &ExperimentConfig,
    encoders: Vec<ClusterEncoder<S>>,
) -> Result<(AlpdModel<S>, Vec<f64>)> {
    let mcfg = cfg.model_config();
    let encoders = if mcfg.use_static || mcfg.fine_tune_encoders { encoders } else { Vec::new() };
    let mut model = AlpdModel::new(mcfg, encoders)?;
    let latents = if model.uses_latents() { Some(LatentCache::build(train, &model.encoders)?) } else { None };
    let fit_cfg = FitConfig { epochs: cfg.epochs, batch_size: cfg.batch_size, lr: cfg.lr, seed: cfg.seed };
    let loss = fit(&mut model, train, latents.as_ref(), &fit_cfg)?;
    Ok((model, loss))
}

/// Stage two on top of `encoders` (one per selected pair), then evaluation on the test set.
pub fn train_with_encoders<S: Scalar>(
    data: &Dataset<S>,
    cfg: &ExperimentConfig,
    encoders: Vec<ClusterEncoder<S>>,
    scae_loss: Vec<ScaeHistory>,
    started: Instant,
) -> Result<TrainedRun<S>> {
    let (model, train_loss) = train_classifier(&data.train, cfg, encoders)?;
    let test_lat = if model.uses_latents() { Some(LatentCache::build(&data.test, &model.encoders)?) } else { None };
    let mut report = evaluate(&model, &data.test, test_lat.as_ref(), None)?;
    report.train_loss = train_loss;
    report.scae_loss = scae_loss;
    report.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(TrainedRun { model, report })
}

/// Both stages: autoencoders for the selected pairs, then the full network.
pub fn train_full<S: Scalar>(data: &Dataset<S>, cfg: &ExperimentConfig) -> Result<TrainedRun<S>> {
    cfg.validate()?;
    let started = Instant::now();
    let (encoders, histories) = if cfg.use_static || cfg.fine_tune_encoders {
        train_encoders(&data.train, &cfg.pairs.indices(), &cfg.scae_config())?
    } else {
        (Vec::new(), Vec::new())
    };
    train_with_encoders(data, cfg, encoders, histories, started)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationArm {
    Full,
    NoStatic,
    NoDynamic,
    Pair1,
    Pair2,
}

impl AblationArm {
    pub const ALL: [AblationArm; 5] = [Self::Full, Self::NoStatic, Self::NoDynamic, Self::Pair1, Self::Pair2];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoStatic => "no_static",
            Self::NoDynamic => "no_dynamic",
            Self::Pair1 => "pair1",
            Self::Pair2 => "pair2",
        }
    }

    pub fn apply(self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = base.clone();
        match self {
            Self::Full => {}
            Self::NoStatic => cfg.use_static = false,
            Self::NoDynamic => cfg.use_dynamic = false,
            Self::Pair1 => cfg.pairs = PairSelection::Pair1,
            Self::Pair2 => cfg.pairs = PairSelection::Pair2,
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub accuracy: f64,
    pub per_state: BTreeMap<String, StateAccuracy>,
}

impl ComparisonRow {
    pub fn new(name: &str, r: &EvalReport) -> Self {
        Self { name: name.to_string(), accuracy: r.accuracy, per_state: r.per_state.clone() }
    }

    pub fn state_accuracy(&self, tag: StateTag) -> Option<f64> {
        self.per_state.get(tag.as_str()).map(|s| s.accuracy)
    }
}

/// Trains every arm on the same data and seeds. Autoencoders are trained once
/// per pair and shared, which equals per-arm training since each pair's
/// autoencoder depends only on its own data and the seed.
pub fn run_ablation<S: Scalar>(data: &Dataset<S>, base: &ExperimentConfig, arms: &[AblationArm]) -> Result<Vec<ComparisonRow>> {
    base.validate()?;
    let all_pairs: Vec<usize> = (0..base.scene.num_pairs.min(2)).collect();
    let (encoders, histories) = train_encoders(&data.train, &all_pairs, &base.scae_config())?;
    let mut rows = Vec::with_capacity(arms.len());
    for &arm in arms {
        let cfg = arm.apply(base);
        cfg.validate()?;
        let sel = cfg.pairs.indices();
        let enc: Vec<_> = sel.iter().map(|&p| encoders[p].clone()).collect();
        let hist: Vec<_> = sel.iter().map(|&p| histories[p].clone()).collect();
        let run = train_with_encoders(data, &cfg, enc, hist, Instant::now())?;
        rows.push(ComparisonRow::new(arm.as_str(), &run.report));
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lag,
    Lambda,
    Latent,
    DataAmount,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "t" | "lag" => Some(Self::Lag),
            "lambda" => Some(Self::Lambda),
            "d" | "latent" => Some(Self::Latent),
            "data" | "data_amount" => Some(Self::DataAmount),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lag => "lag",
            Self::Lambda => "lambda",
            Self::Latent => "latent",
            Self::DataAmount => "data_amount",
        }
    }

    fn changes_data(self) -> bool {
        matches!(self, Self::Lag | Self::DataAmount)
    }

    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let whole = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{} sweep needs whole numbers, got {v}", self.as_str())))
            }
        };
        match self {
            Self::Lag => cfg.lag = whole(value)?,
            Self::Lambda => cfg.lambda = value,
            Self::Latent => cfg.latent_len = whole(value)?,
            Self::DataAmount => cfg.train_per_class = whole(value)?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub accuracy: f64,
    pub per_state: BTreeMap<String, StateAccuracy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

/// One full train and evaluation per value with the base seed.
pub fn run_sweep<S: Scalar>(base: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepCurve> {
    let mut shared: Option<Dataset<S>> = None;
    let mut points = Vec::with_capacity(values.len());
    for &v in values {
        let cfg = axis.apply(base, v)?;
        let run = if axis.changes_data() {
            train_full(&Dataset::<S>::simulate(&cfg)?, &cfg)?
        } else {
            if shared.is_none() {
                shared = Some(Dataset::simulate(base)?);
            }
            train_full(shared.as_ref().unwrap(), &cfg)?
        };
        points.push(SweepPoint { value: v, accuracy: run.report.accuracy, per_state: run.report.per_state });
    }
    Ok(SweepCurve { axis, points })
}

pub fn run_baseline<S: Scalar>(data: &Dataset<S>, cfg: &ExperimentConfig, kind: BaselineKind) -> Result<EvalReport> {
    let started = Instant::now();
    let bcfg = cfg.baseline_config();
    if bcfg.pair >= data.train.num_pairs() {
        return Err(Error::Config(format!("baseline pair {} out of range", bcfg.pair)));
    }
    let fit_cfg = FitConfig { epochs: cfg.epochs, batch_size: cfg.batch_size, lr: cfg.lr, seed: cfg.seed };
    let (loss, mut report) = match kind {
        BaselineKind::Fcn => {
            let mut m = FcnBaseline::<S>::new(bcfg);
            let loss = fit(&mut m, &data.train, None, &fit_cfg)?;
            (loss, evaluate(&m, &data.test, None, None)?)
        }
        BaselineKind::LstmOnly => {
            let mut m = LstmBaseline::<S>::new(bcfg);
            let loss = fit(&mut m, &data.train, None, &fit_cfg)?;
            (loss, evaluate(&m, &data.test, None, None)?)
        }
    };
    report.train_loss = loss;
    report.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(report)
}
