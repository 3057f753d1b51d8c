mod common;

use std::sync::OnceLock;

use alpd_core::experiment::{train_encoders, train_full, Dataset, ExperimentConfig, PairSelection, TrainedRun};
use alpd_core::model::{argmax, attention_weights, static_feature, AlpdModel, Classifier, ModelConfig, PairInput, Sample};
use alpd_core::nn::{softmax, Dense, Lstm, Module};
use alpd_core::online::{OnlinePredictor, Prediction};
use alpd_core::preprocess::RawAmplitudes;
use alpd_core::dataset::{LatentCache, WindowSet};
use alpd_core::rng::rng_for;
use alpd_core::sim::{simulate_session, RoomState, ScenarioScript, Segment, StateTag};
use common::{tiny_config, untrained_model};
use proptest::prelude::*;
use rand::Rng;

fn trained_config() -> ExperimentConfig {
    ExperimentConfig { seed: 2, test_per_class: 100, ..ExperimentConfig::default() }
}

/// One desk-grid model shared by the tests that need learned weights.
fn trained() -> &'static (Dataset<f32>, TrainedRun<f32>) {
    static RUN: OnceLock<(Dataset<f32>, TrainedRun<f32>)> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = trained_config();
        let data = Dataset::simulate(&cfg).unwrap();
        let run = train_full(&data, &cfg).unwrap();
        (data, run)
    })
}

fn randv(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f32> {
    let mut rng = rng_for(&[seed, 61]);
    (0..n).map(|_| rng.gen_range(lo..hi) as f32).collect()
}

#[test]
fn zero_head_gives_uniform_weights() {
    let head = Dense::<f64>::zeros(5, 1);
    let latents: Vec<f64> = randv(224 * 5, 1, -3.0, 3.0).into_iter().map(f64::from).collect();
    let w = attention_weights(&head, &latents).unwrap();
    assert_eq!(w.len(), 224);
    assert!(w.iter().all(|v| (v - 1.0 / 224.0).abs() < 1e-15));
    assert!(attention_weights(&head, &latents[..7]).is_err());
}

#[test]
fn static_feature_examples() {
    let ones = vec![1.0f64; 8];
    let uniform = vec![1.0 / 8.0; 8];
    let f = static_feature(&[&ones, &ones], &[&uniform, &uniform]).unwrap();
    assert_eq!(f.len(), 16);
    assert!(f.iter().all(|&v| v == 1.0 / 8.0));

    let h = vec![0.5f64; 224];
    let d = vec![1.0 / 224.0; 224];
    assert_eq!(static_feature(&[&h, &h], &[&d, &d]).unwrap().len(), 448);
    let zeros = vec![0.0f64; 224];
    assert!(static_feature(&[&zeros], &[&d]).unwrap().iter().all(|&v| v == 0.0));
    assert!(static_feature(&[&h[..10]], &[&d]).is_err());
}

proptest! {
    #[test]
    fn attention_and_static_feature_contracts(
        d in 1usize..6,
        kl in 1usize..64,
        scale in 0.01f64..100.0,
        seed in 0u64..1000,
    ) {
        let mut rng = rng_for(&[seed, 62]);
        let mut head = Dense::<f32>::new(d, 1, &mut rng);
        head.visit_mut("", &mut |_, t| t.data_mut().iter_mut().for_each(|v| *v *= scale as f32));
        let latents = randv(kl * d, seed, -10.0, 10.0);
        let w = attention_weights(&head, &latents).unwrap();
        prop_assert_eq!(w.len(), kl);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        prop_assert!((w.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs() < 1e-6);

        let h = randv(kl, seed + 1, 0.0, 1.0);
        let f = static_feature(&[&h], &[&w]).unwrap();
        prop_assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
        for i in 0..kl {
            prop_assert_eq!(f[i], h[i] * w[i]);
        }
    }
}

#[test]
fn default_shapes() {
    let cfg = ModelConfig::default();
    assert_eq!(cfg.dynamic_len(), 128);
    assert_eq!(cfg.static_len(), 448);
    assert_eq!(cfg.class_count, 4);
    let model = AlpdModel::<f32>::new(ModelConfig { use_static: false, ..cfg.clone() }, Vec::new()).unwrap();
    let windows = [randv(51 * 224, 1, 0.0, 1.0), randv(51 * 224, 2, 0.0, 1.0)];
    let x = Sample { pairs: windows.iter().map(|w| PairInput { window: w, latents: None }).collect() };
    assert_eq!(model.dynamic_feature(&x, 0).unwrap().len(), 64);
    assert_eq!(model.features(&x).unwrap().len(), 128);
    let p = model.probs(&x).unwrap();
    assert_eq!(p.len(), 4);
    assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
}

#[test]
fn branches_can_be_switched_off() {
    let base = tiny_config(3);
    let set = Dataset::<f32>::simulate(&base).unwrap().test;
    let x = set.sample(0, None);
    let full = untrained_model(&base);
    let mcfg = base.model_config();
    assert_eq!(full.features(&x).unwrap().len(), mcfg.static_len() + mcfg.dynamic_len());
    let no_dyn = AlpdModel::new(ModelConfig { use_dynamic: false, ..mcfg.clone() }, full.encoders.clone()).unwrap();
    assert_eq!(no_dyn.features(&x).unwrap().len(), 32);
    assert!(no_dyn.convs.is_empty() && no_dyn.lstms.is_empty());
    let no_static = AlpdModel::<f32>::new(ModelConfig { use_static: false, ..mcfg.clone() }, Vec::new()).unwrap();
    assert_eq!(no_static.features(&x).unwrap().len(), 2 * mcfg.lstm_hidden);
    assert!(no_static.heads.is_empty());
    assert!(AlpdModel::<f32>::new(ModelConfig { use_static: false, use_dynamic: false, ..mcfg.clone() }, Vec::new()).is_err());
    assert!(AlpdModel::<f32>::new(ModelConfig { class_count: 1, ..mcfg.clone() }, full.encoders.clone()).is_err());
    assert!(AlpdModel::<f32>::new(mcfg, Vec::new()).is_err());
}

#[test]
fn time_constant_input_runs_the_lstm_on_repeated_features() {
    let cfg = tiny_config(4);
    let model = untrained_model(&cfg);
    let row = randv(16, 9, 0.0, 1.0);
    let window: Vec<f32> = row.iter().cycle().take(16 * 6).copied().collect();
    let x = Sample { pairs: vec![PairInput { window: &window, latents: None }; 2] };
    let feat = model.convs[0].forward(&row).unwrap();
    let repeated: Vec<f32> = feat.iter().cycle().take(feat.len() * 6).copied().collect();
    let want = model.lstms[0].forward(&repeated).unwrap();
    assert_eq!(model.dynamic_feature(&x, 0).unwrap(), want);
    assert_eq!(model.dynamic_feature(&x, 0).unwrap(), model.dynamic_feature(&x, 0).unwrap());
    assert!(model.dynamic_feature(&Sample { pairs: vec![] }, 0).is_err());
    let short = &window[..50];
    assert!(model.dynamic_feature(&Sample { pairs: vec![PairInput { window: short, latents: None }; 2] }, 0).is_err());
}

#[test]
fn timestep_order_matters_to_a_trained_model() {
    let (data, run) = trained();
    let set = &data.test;
    let kl = set.vector_len();
    let mut changed = 0;
    for i in (0..set.len()).step_by(37) {
        let x = set.sample(i, None);
        let reversed: Vec<Vec<f32>> = x
            .pairs
            .iter()
            .map(|p| p.window.chunks_exact(kl).rev().flatten().copied().collect())
            .collect();
        if reversed.iter().zip(&x.pairs).all(|(r, p)| r == p.window) {
            continue;
        }
        let y = Sample { pairs: reversed.iter().map(|w| PairInput { window: w, latents: None }).collect() };
        changed += usize::from(run.model.dynamic_feature(&x, 0).unwrap() != run.model.dynamic_feature(&y, 0).unwrap());
    }
    assert!(changed > 0);
}

#[test]
fn softmax_argmax_ignores_logit_shift() {
    let logits = [0.3f64, -1.2, 2.5, 0.9];
    let shifted: Vec<f64> = logits.iter().map(|v| v + 17.0).collect();
    let (a, b) = (softmax(&logits), softmax(&shifted));
    assert_eq!(argmax(&a), argmax(&b));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn gradients_reach_every_trainable_part_and_skip_encoders() {
    let cfg = tiny_config(5);
    let mut model = untrained_model(&cfg);
    let set = Dataset::<f32>::simulate(&cfg).unwrap().train;
    model.zero_grad();
    for i in [0, set.len() / 3, set.len() / 2, set.len() - 1] {
        model.backprop(&set.sample(i, None), set.labels[i], 1.0).unwrap();
    }
    model.visit("", &mut |name, t| {
        let norm: f64 = t.grad().map_or(0.0, |g| g.iter().map(|v| (*v as f64).abs()).sum());
        if name.starts_with("encoders.") {
            assert_eq!(norm, 0.0, "{name}");
        } else if name.starts_with("heads.") && name.ends_with("bias") {
            // softmax is shift invariant, so the score offset only sees rounding
            assert!(norm < 1e-5, "{name}: {norm}");
        } else {
            assert!(norm > 0.0, "{name} got no gradient");
        }
    });
}

#[test]
fn stage_two_leaves_encoders_bit_identical() {
    let cfg = tiny_config(6);
    let data = Dataset::<f32>::simulate(&cfg).unwrap();
    let (encoders, _) = train_encoders(&data.train, &[0, 1], &cfg.scae_config()).unwrap();
    let (model, loss) = alpd_core::experiment::train_classifier(&data.train, &cfg, encoders.clone()).unwrap();
    for (a, b) in model.encoders.iter().zip(&encoders) {
        assert_eq!(a.param_set(), b.param_set());
    }
    assert!(loss.last().unwrap() < loss.first().unwrap(), "{loss:?}");
}

#[test]
fn online_matches_offline_bit_for_bit() {
    let (_, run) = trained();
    let cfg = trained_config();
    let scene = cfg.scene.clone().with_seed(cfg.scene.seed ^ cfg.seed);
    let script = ScenarioScript::new(vec![
        Segment::new(4.0, RoomState::Dynamic, RoomState::Empty),
        Segment::new(3.0, RoomState::StaticLos, RoomState::Dynamic).tagged(StateTag::Static),
    ])
    .with_realization(9);
    let session = simulate_session(&scene, &script).unwrap();
    let raw = RawAmplitudes::<f32>::from_session(&session);
    let set = WindowSet::from_raw(&raw, &session.labels, &session.tags, &vec![0; session.len()], cfg.lag).unwrap();
    let cache = LatentCache::build(&set, &run.model.encoders).unwrap();
    let mut online = OnlinePredictor::new(raw.dims, cfg.lag);
    let mut first = None;
    for t in 0..raw.len {
        let frame: Vec<&[f32]> = (0..raw.dims.num_pairs).map(|p| raw.vector(p, t)).collect();
        match online.push(&run.model, &frame).unwrap() {
            Prediction::WarmingUp { need, .. } => assert_eq!(need, cfg.lag + 1),
            Prediction::Ready(rec) => {
                first.get_or_insert(rec.t);
                let i = set.ends.iter().position(|&e| e == t).unwrap();
                let offline = run.model.probs(&set.sample(i, None)).unwrap();
                let cached = run.model.probs(&set.sample(i, Some(&cache))).unwrap();
                assert_eq!(offline, cached);
                assert_eq!(rec.probs, offline.iter().map(|&p| p as f64).collect::<Vec<_>>());
                assert_eq!(rec.label, argmax(&offline));
            }
        }
    }
    assert_eq!(first, Some(cfg.lag));
}

#[test]
fn streaming_case_three_is_recognised() {
    let (_, run) = trained();
    let cfg = trained_config();
    let scene = cfg.scene.clone().with_seed(cfg.scene.seed ^ cfg.seed);
    let script = ScenarioScript::new(vec![Segment::new(20.0, RoomState::Dynamic, RoomState::Dynamic)]).with_realization(11);
    let session = simulate_session(&scene, &script).unwrap();
    assert!(session.labels.iter().all(|l| l.index() == 3));
    let raw = RawAmplitudes::<f32>::from_session(&session);
    let mut online = OnlinePredictor::new(raw.dims, cfg.lag);
    let mut votes = [0usize; 4];
    for t in 0..raw.len {
        let frame: Vec<&[f32]> = (0..2).map(|p| raw.vector(p, t)).collect();
        if let Prediction::Ready(rec) = online.push(&run.model, &frame).unwrap() {
            votes[rec.label] += 1;
        }
    }
    assert_eq!(argmax(&votes.map(|v| v as f64)), 3, "{votes:?}");
}

/// A standstill occupant dips subcarriers 20 to 40 only; the trained
/// attention should lean towards them.
#[test]
fn attention_favours_the_planted_notch() {
    let mut cfg = ExperimentConfig {
        seed: 1,
        lag: 5,
        train_per_class: 200,
        test_per_class: 50,
        train_states: vec![StateTag::Static],
        test_states: vec![StateTag::Static],
        segment_windows: 50,
        use_dynamic: false,
        epochs: 6,
        scae_epochs: 1,
        scae_timestamps_per_epoch: Some(100),
        encoder_hidden: vec![16],
        pairs: PairSelection::Pair1,
        ..ExperimentConfig::default()
    };
    cfg.scene.num_subcarriers = 56;
    cfg.scene.num_antenna_pairs = 1;
    cfg.scene.static_notch_center = Some(30.0);
    cfg.scene.static_notch_width = 20.0;
    let data = Dataset::<f32>::simulate(&cfg).unwrap();
    let run = train_full(&data, &cfg).unwrap();
    let (mut inside, mut outside, mut n) = (0.0, 0.0, 0);
    for i in 0..data.test.len() {
        if data.test.labels[i] == 0 {
            continue;
        }
        let x = data.test.sample(i, None);
        let w = attention_weights(&run.model.heads[0], &run.model.latents(&x, 0).unwrap()).unwrap();
        inside += w[20..=40].iter().sum::<f32>() as f64 / 21.0;
        outside += (w[..20].iter().sum::<f32>() + w[41..].iter().sum::<f32>()) as f64 / 35.0;
        n += 1;
    }
    let (inside, outside) = (inside / n as f64, outside / n as f64);
    assert!(inside > outside, "notch {inside} elsewhere {outside}");
}

#[test]
fn lstm_last_hidden_is_the_feature() {
    let lstm = Lstm::<f64>::new(3, 4, 2, &mut rng_for(&[3]));
    let xs: Vec<f64> = randv(12, 4, -1.0, 1.0).into_iter().map(f64::from).collect();
    let st = lstm.forward_trace(&xs).unwrap();
    assert_eq!(Lstm::last_hidden(&st), lstm.forward(&xs).unwrap().as_slice());
}
