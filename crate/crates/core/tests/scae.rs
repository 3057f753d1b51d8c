mod common;

use alpd_core::experiment::{Dataset, ExperimentConfig};
use alpd_core::nn::Module;
use alpd_core::preprocess::column_into;
use alpd_core::scae::{clustering_loss, export_cluster_encoder, train_scae, ScaeConfig, ScaeModel};
use alpd_core::Error;
use common::{loss_oracle_gap, planted_groups, silhouette};
use proptest::prelude::*;

#[test]
fn losses_match_loop_oracle_on_two_by_two_by_three() {
    for seed in 0..5 {
        assert!(loss_oracle_gap(2, 3, seed) < 1e-6);
    }
}

#[test]
fn clustering_loss_zero_for_identical_latents() {
    let windows = [vec![0.1f64, 0.5, 0.9], vec![0.2, 0.4, 1.0], vec![0.0, 0.6, 0.7]];
    let z = vec![vec![0.3f64, -0.2]; 3];
    let c = clustering_loss(&z, &windows, &[(0, 1), (1, 2), (0, 2)], 1e-6).unwrap();
    assert_eq!(c.value, 0.0);
    assert_eq!(c.pairs_used, 3);
}

proptest! {
    #[test]
    fn clustering_loss_is_nonnegative(
        z in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 4),
        w in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 6), 4),
    ) {
        let pairs = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)];
        prop_assert!(clustering_loss(&z, &w, &pairs, 1e-6).unwrap().value >= 0.0);
    }

    /// Pulling one latent of a positively correlated pair towards the other
    /// never raises the loss.
    #[test]
    fn monotone_pressure(
        zi in prop::collection::vec(-5.0f64..5.0, 4),
        zj in prop::collection::vec(-5.0f64..5.0, 4),
        base in prop::collection::vec(0.0f64..1.0, 8),
        noise in prop::collection::vec(-0.2f64..0.2, 8),
        shrink in 0.0f64..1.0,
    ) {
        let wj: Vec<f64> = base.iter().zip(&noise).map(|(b, n)| b + n).collect();
        let windows = [base.clone(), wj];
        prop_assume!(alpd_core::scae::correlation(&windows[0], &windows[1]).unwrap() > 1e-6);
        let before = clustering_loss(&[zi.clone(), zj.clone()], &windows, &[(0, 1)], 1e-6).unwrap().value;
        let closer: Vec<f64> = zi.iter().zip(&zj).map(|(a, b)| a + shrink * (b - a)).collect();
        let after = clustering_loss(&[closer, zj], &windows, &[(0, 1)], 1e-6).unwrap().value;
        prop_assert!(after <= before + 1e-12);
    }
}

fn planted_latents(latent_len: usize, lambda: f64) -> (Vec<Vec<f32>>, Vec<usize>) {
    let lag = 20;
    let (amps, group) = planted_groups(1200, 8, 2);
    let train: Vec<usize> = (lag..900).collect();
    let cfg = ScaeConfig { latent_len, lambda, epochs: 8, seed: 4, ..ScaeConfig::default() };
    let (m, h) = train_scae(&amps, &train, lag, 0, &cfg).unwrap();
    assert!(h.last().unwrap().l_total < h.initial().unwrap().l_total);
    let e = export_cluster_encoder(&m);
    let mut points = Vec::new();
    let mut groups = Vec::new();
    for t in (900 + lag..1200).step_by(25) {
        let z = e.encode_matrix(amps.window_slice(t, 0, lag).unwrap(), 8).unwrap();
        points.extend(z.chunks(latent_len).map(|c| c.to_vec()));
        groups.extend_from_slice(&group);
    }
    (points, groups)
}

#[test]
fn planted_groups_separate_at_two_dimensions() {
    let (points, groups) = planted_latents(2, 0.001);
    let s = silhouette(&points, &groups);
    assert!(s > 0.0, "silhouette {s}");
}

#[test]
fn training_is_deterministic() {
    let (amps, _) = planted_groups(300, 8, 5);
    let ends: Vec<usize> = (10..300).collect();
    let cfg = ScaeConfig { epochs: 2, seed: 8, ..ScaeConfig::default() };
    let (a, ha) = train_scae(&amps, &ends, 10, 0, &cfg).unwrap();
    let (b, hb) = train_scae(&amps, &ends, 10, 0, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let (c, _) = train_scae(&amps, &ends, 10, 0, &ScaeConfig { seed: 9, ..cfg.clone() }).unwrap();
    assert_ne!(a, c);
    assert!(matches!(train_scae(&amps, &[], 10, 0, &cfg), Err(Error::Empty(_))));
}

/// Without the clustering term the autoencoder reconstructs about as well
/// as with the default weight, on the desk grid at its default budget.
#[test]
fn plain_autoencoder_reconstruction_close_to_default() {
    let base = ExperimentConfig { test_per_class: 10, ..ExperimentConfig::default() };
    let set = Dataset::<f32>::simulate(&base).unwrap().train;
    let kl = set.vector_len();
    let mut windows = Vec::new();
    for &t in set.ends.iter().step_by(7) {
        let m = set.amps.window_slice(t, 0, set.lag).unwrap();
        for c in 0..kl {
            let mut w = vec![0.0f32; set.lag + 1];
            column_into(m, kl, c, &mut w);
            windows.push(w);
        }
    }
    let recon = |lambda: f64| {
        let cfg = ExperimentConfig { lambda, ..base.clone() }.scae_config();
        let (m, _) = train_scae(&set.amps, &set.ends, set.lag, 0, &cfg).unwrap();
        m.batch_loss(&windows, &[], 0.0, cfg.cor_eps).unwrap().l_recst
    };
    let (plain, clustered) = (recon(0.0), recon(0.001));
    assert!((plain - clustered).abs() <= 0.1 * clustered, "lambda 0: {plain}, lambda 0.001: {clustered}");
}

fn numel<M: Module<f32>>(m: &M) -> usize {
    let mut n = 0;
    m.visit("", &mut |_, t| n += t.numel());
    n
}

#[test]
fn exported_encoder_keeps_encoder_parameters_only() {
    let m = ScaeModel::<f32>::new(1, 21, &ScaeConfig::default()).unwrap();
    let e = export_cluster_encoder(&m);
    assert_eq!(e.pair, 1);
    assert_eq!(e.param_set(), m.encoder.param_set());
    assert_eq!(numel(&e), numel(&m.encoder));
    assert_eq!(numel(&e), 21 * 64 + 64 + 64 * 32 + 32 + 32 * 5 + 5);
}
