//! Finite-difference gradient checks on small f64 instances of every
//! trainable component.

use alpd_core::model::{AlpdModel, Classifier, ModelConfig, PairInput, Sample};
use alpd_core::nn::{
    cross_entropy, grad_check, mse, mse_grad_into, ConvConfig, ConvStack, GradCheckConfig, GradCheckReport, Lstm, Mlp,
    Module,
};
use alpd_core::rng::rng_for;
use alpd_core::scae::{ClusterEncoder, ScaeConfig, ScaeModel};
use alpd_core::scalar::dot;
use rand::Rng;

pub fn randv(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(&[seed, 999]);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(&[seed, 998]);
    (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// Nudges every parameter, biases included. Zero-initialised biases put a
/// ReLU exactly on its kink whenever the input to a layer vanishes.
fn jitter<M: Module<f64>>(m: &mut M, seed: u64) {
    let mut rng = rng_for(&[seed, 997]);
    m.visit_mut("", &mut |_, t| {
        for v in t.data_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
    });
}

pub fn dense(seed: u64) -> GradCheckReport {
    let mut mlp = Mlp::<f64>::new(&[6, 8, 3], &mut rng_for(&[seed]));
    // keep inputs away from zero so no ReLU sits on its kink
    let x: Vec<f64> = randv(6, seed).into_iter().map(|v| v.signum() * (0.5 + v.abs() * 0.5)).collect();
    let target = randv(3, seed + 1);
    grad_check(
        &mut mlp,
        |m| {
            let tr = m.forward_trace(&x);
            let mut dy = vec![0.0; 3];
            mse_grad_into(tr.output(), &target, 1.0, &mut dy);
            m.backward(&tr, &dy, false);
            mse(tr.output(), &target).unwrap()
        },
        |m| mse(&m.forward(&x), &target).unwrap(),
        GradCheckConfig::default(),
    )
}

pub fn conv(seed: u64) -> GradCheckReport {
    let cfg = ConvConfig { channels: vec![3, 4, 2], kernel: 3, stride: 2 };
    let mut stack = ConvStack::<f64>::new(&cfg, 20, &mut rng_for(&[seed + 100])).unwrap();
    let x = randv(20, seed);
    let proj = randv(stack.output_len(), seed + 7);
    grad_check(
        &mut stack,
        |m| {
            let tr = m.forward_trace(&x).unwrap();
            m.backward(&tr, &proj, false);
            dot(tr.acts.last().unwrap(), &proj)
        },
        |m| dot(&m.forward(&x).unwrap(), &proj),
        GradCheckConfig::default(),
    )
}

pub fn lstm(seed: u64) -> GradCheckReport {
    let mut lstm = Lstm::<f64>::new(3, 4, 2, &mut rng_for(&[seed + 200]));
    let xs = randv(5 * 3, seed);
    let proj = randv(4, seed + 3);
    grad_check(
        &mut lstm,
        |m| {
            let st = m.forward_trace(&xs).unwrap();
            m.backward(&st, &proj, false);
            dot(Lstm::last_hidden(&st), &proj)
        },
        |m| dot(&m.forward(&xs).unwrap(), &proj),
        GradCheckConfig::default(),
    )
}

fn scae_batch(seed: u64, lambda: f64) -> GradCheckReport {
    let cfg = ScaeConfig { latent_len: 3, hidden: vec![5], ..ScaeConfig::default() };
    let mut model = ScaeModel::<f64>::new(0, 6, &ScaeConfig { seed: seed + 300, ..cfg }).unwrap();
    jitter(&mut model, seed);
    let base = unit(6, seed);
    // a mix of correlated, anti-correlated and unrelated windows
    let windows: Vec<Vec<f64>> = (0..6u64)
        .map(|i| {
            let noise = unit(6, seed * 10 + i + 50);
            match i % 3 {
                0 => base.iter().zip(&noise).map(|(b, n)| 0.8 * b + 0.2 * n).collect(),
                1 => base.iter().zip(&noise).map(|(b, n)| 1.0 - 0.8 * b - 0.2 * n).collect(),
                _ => noise,
            }
        })
        .collect();
    let pairs = [(0, 3), (1, 4), (0, 2), (5, 1), (3, 0), (2, 4)];
    grad_check(
        &mut model,
        |m| m.backprop_batch(&windows, &pairs, lambda, 1e-6).unwrap().l_total,
        |m| m.batch_loss(&windows, &pairs, lambda, 1e-6).unwrap().l_total,
        GradCheckConfig::default(),
    )
}

/// Reconstruction term alone.
pub fn scae_recon(seed: u64) -> GradCheckReport {
    scae_batch(seed, 0.0)
}

/// Reconstruction plus a unit-weight clustering term.
pub fn scae_cluster(seed: u64) -> GradCheckReport {
    scae_batch(seed, 1.0)
}

fn tiny_model(seed: u64, use_static: bool, use_dynamic: bool) -> AlpdModel<f64> {
    let cfg = ModelConfig {
        num_pairs: 2,
        pairs: vec![0, 1],
        vector_len: 6,
        lag: 3,
        latent_len: 3,
        use_static,
        use_dynamic,
        conv: ConvConfig { channels: vec![2, 2], kernel: 2, stride: 1 },
        lstm_hidden: 3,
        lstm_layers: 2,
        classifier_hidden: vec![5],
        class_count: 3,
        fine_tune_encoders: true,
        static_gain: None,
        seed: seed + 400,
    };
    let mut rng = rng_for(&[seed, 401]);
    let encoders = (0..2).map(|p| ClusterEncoder { pair: p, mlp: Mlp::new(&[4, 5, 3], &mut rng) }).collect();
    AlpdModel::new(cfg, encoders).unwrap()
}

fn model_ce(seed: u64, use_static: bool, use_dynamic: bool) -> GradCheckReport {
    let mut model = tiny_model(seed, use_static, use_dynamic);
    jitter(&mut model, seed);
    let windows = [unit(24, seed + 1), unit(24, seed + 2)];
    let label = (seed % 3) as usize;
    let sample = || Sample { pairs: windows.iter().map(|w| PairInput { window: w.as_slice(), latents: None }).collect() };
    grad_check(
        &mut model,
        |m| m.backprop(&sample(), label, 1.0).unwrap().0,
        |m| cross_entropy(&m.probs(&sample()).unwrap(), label),
        GradCheckConfig::default(),
    )
}

/// Static branch only: attention heads, encoders under fine-tuning and the classifier.
pub fn attention(seed: u64) -> GradCheckReport {
    model_ce(seed, true, false)
}

/// Both branches end to end through cross-entropy.
pub fn full_model(seed: u64) -> GradCheckReport {
    model_ce(seed, true, true)
}

pub type Probe = fn(u64) -> GradCheckReport;

pub const PROBES: [(&str, Probe); 7] = [
    ("dense", dense),
    ("conv", conv),
    ("lstm", lstm),
    ("scae_recon", scae_recon),
    ("scae_cluster", scae_cluster),
    ("attention", attention),
    ("full_model", full_model),
];
