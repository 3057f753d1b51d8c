#![allow(dead_code)]

pub mod grad;

use alpd_core::preprocess::{AmplitudeTensor, Dims, PairStreams};
use alpd_core::rng::rng_for;
use rand::Rng;

/// Single-pair amplitudes whose subcarriers split into two groups: the
/// first half follows a shared smooth signal, the second half its mirror
/// image. Each subcarrier gets its own level and scale.
pub fn planted_groups(len: usize, subcarriers: usize, seed: u64) -> (AmplitudeTensor<f32>, Vec<usize>) {
    let mut rng = rng_for(&[seed, 77]);
    let freqs: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(0.05..0.6), rng.gen_range(0.0..6.28))).collect();
    let signal: Vec<f64> = (0..len)
        .map(|t| freqs.iter().map(|(f, ph)| (f * t as f64 + ph).sin()).sum::<f64>() / 4.0)
        .collect();
    let group: Vec<usize> = (0..subcarriers).map(|k| usize::from(k >= subcarriers / 2)).collect();
    let params: Vec<(f64, f64)> = (0..subcarriers).map(|_| (rng.gen_range(0.3..0.7), rng.gen_range(0.1..0.3))).collect();
    let mut data = Vec::with_capacity(len * subcarriers);
    for s in &signal {
        for k in 0..subcarriers {
            let sign = if group[k] == 0 { 1.0 } else { -1.0 };
            let (level, scale) = params[k];
            let v = level + sign * scale * s + rng.gen_range(-0.01..0.01);
            data.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    let values = PairStreams::new(Dims::new(1, subcarriers, 1), len, vec![data]).unwrap();
    (AmplitudeTensor { values, degenerate: Vec::new() }, group)
}

/// Mean same-group over mean cross-group latent distance, over windows
/// sharing an end timestamp.
pub fn distance_ratio(latents_per_t: &[Vec<Vec<f32>>], group: &[usize]) -> f64 {
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for zs in latents_per_t {
        for i in 0..zs.len() {
            for j in i + 1..zs.len() {
                let d: f64 = zs[i].iter().zip(&zs[j]).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>().sqrt();
                if group[i] == group[j] {
                    intra += d;
                    ni += 1;
                } else {
                    inter += d;
                    nx += 1;
                }
            }
        }
    }
    (intra / ni as f64) / (inter / nx as f64)
}

/// Mean silhouette of the planted grouping over all latents of one timestamp set.
pub fn silhouette(points: &[Vec<f32>], group: &[usize]) -> f64 {
    let dist = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt();
    let mut total = 0.0;
    for i in 0..points.len() {
        let (mut a, mut na, mut b, mut nb) = (0.0, 0, 0.0, 0);
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let d = dist(&points[i], &points[j]);
            if group[i] == group[j] {
                a += d;
                na += 1;
            } else {
                b += d;
                nb += 1;
            }
        }
        let (a, b) = (a / na as f64, b / nb as f64);
        total += (b - a) / a.max(b);
    }
    total / points.len() as f64
}

/// A grid small enough to train in a second or two.
pub fn tiny_config(seed: u64) -> alpd_core::experiment::ExperimentConfig {
    alpd_core::experiment::ExperimentConfig {
        seed,
        lag: 5,
        train_per_class: 60,
        test_per_class: 30,
        segment_windows: 30,
        epochs: 2,
        scae_epochs: 1,
        scae_timestamps_per_epoch: Some(60),
        encoder_hidden: vec![8],
        classifier_hidden: vec![16],
        ..Default::default()
    }
}

/// An untrained network for `cfg`, with freshly initialised encoders.
pub fn untrained_model(cfg: &alpd_core::experiment::ExperimentConfig) -> alpd_core::model::AlpdModel<f32> {
    use alpd_core::scae::{export_cluster_encoder, ScaeModel};
    let mcfg = cfg.model_config();
    let encoders = mcfg
        .pairs
        .iter()
        .map(|&p| export_cluster_encoder(&ScaeModel::<f32>::new(p, mcfg.window_len(), &cfg.scae_config()).unwrap()))
        .collect();
    alpd_core::model::AlpdModel::new(mcfg, encoders).unwrap()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va.sqrt() * vb.sqrt())
    }
}

/// Largest gap between the autoencoder objective and explicit loops over
/// every window of two timestamps of a `k_n`-subcarrier, `l_n`-antenna-pair
/// stream, with every ordered window pair in the clustering sum.
pub fn loss_oracle_gap(k_n: usize, l_n: usize, seed: u64) -> f64 {
    use alpd_core::scae::{ScaeConfig, ScaeModel, WindowId};
    let lag = 4;
    let frames = lag + 2;
    {
        let mut rng = rng_for(&[seed, 31]);
        let data: Vec<f64> = (0..frames * k_n * l_n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let values = PairStreams::new(Dims::new(1, k_n, l_n), frames, vec![data]).unwrap();
        let amps = AmplitudeTensor { values, degenerate: Vec::new() };
        let cfg = ScaeConfig { latent_len: 2, hidden: vec![4], seed, ..ScaeConfig::default() };
        let model = ScaeModel::<f64>::new(0, lag + 1, &cfg).unwrap();
        let ends = [lag, lag + 1];

        let mut ids = Vec::new();
        let mut windows = Vec::new();
        for &t in &ends {
            for k in 0..k_n {
                for l in 0..l_n {
                    ids.push(WindowId { t, k, l });
                    windows.push((t - lag..=t).map(|s| amps.values.get(s, 0, k, l)).collect::<Vec<f64>>());
                }
            }
        }
        let mut recst = 0.0;
        for w in &windows {
            let r = model.reconstruct(w).unwrap();
            let mut e = 0.0;
            for s in 0..w.len() {
                e += (r[s] - w[s]) * (r[s] - w[s]);
            }
            recst += e / w.len() as f64;
        }
        recst /= windows.len() as f64;

        let mut pairs = Vec::new();
        let mut clst = 0.0;
        for i in 0..windows.len() {
            for j in 0..windows.len() {
                if i == j {
                    continue;
                }
                pairs.push((ids[i], ids[j]));
                let c = pearson(&windows[i], &windows[j]);
                if c > cfg.cor_eps {
                    let (zi, zj) = (model.encode(&windows[i]).unwrap(), model.encode(&windows[j]).unwrap());
                    let d: f64 = zi.iter().zip(&zj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    clst += d / c;
                }
            }
        }
        let got = model.objective(&amps, &ends, lag, &pairs, 0.5, cfg.cor_eps).unwrap();
        (got.l_recst - recst).abs().max((got.l_clst - clst).abs()).max((got.l_total - (recst + 0.5 * clst)).abs())
    }
}
