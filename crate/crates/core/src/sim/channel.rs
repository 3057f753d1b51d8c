//! Sum-of-rays frequency response for every (pair, subcarrier, antenna pair).
//!
//! The empty-room channel is a direct path plus a handful of fixed
//! reflections. A walking occupant contributes body-reflected paths whose
//! delay and strength drift along a smooth pseudo-random trajectory; a
//! standstill occupant contributes one fixed scattering path whose gain is
//! concentrated in a narrow band, cutting a dip into the response there.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::SceneConfig;
use super::occupancy::{OccupancyState, RoomState};
use crate::error::{Error, Result};
use crate::rng::{rng_for, TAG_FRAME, TAG_GEOMETRY, TAG_NOTCH, TAG_WALK};

const CARRIER_HZ: f64 = 2.447e9;
const SUBCARRIER_SPACING_HZ: f64 = 312.5e3;
/// Occupied subcarriers of a 20 MHz HT channel; fewer configured subcarriers are spread over the same band.
const BAND_SUBCARRIERS: f64 = 56.0;
const BODY_PATHS: usize = 2;
const TRAJECTORY_TERMS: usize = 3;
const INTERFERENCE_PATHS: usize = 2;

/// One time instant of estimated channel gains.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexCsiFrame {
    pub num_pairs: usize,
    pub num_subcarriers: usize,
    pub num_antenna_pairs: usize,
    /// Indexed `((p * K) + k) * L + l`.
    pub gains: Vec<Complex64>,
}

impl ComplexCsiFrame {
    #[inline]
    pub fn index(&self, p: usize, k: usize, l: usize) -> usize {
        (p * self.num_subcarriers + k) * self.num_antenna_pairs + l
    }

    pub fn gain(&self, p: usize, k: usize, l: usize) -> Complex64 {
        self.gains[self.index(p, k, l)]
    }

    pub fn amplitude(&self, p: usize, k: usize, l: usize) -> f64 {
        self.gain(p, k, l).norm()
    }

    pub fn phase(&self, p: usize, k: usize, l: usize) -> f64 {
        self.gain(p, k, l).arg()
    }

    /// Amplitudes of pair `p`, flattened subcarrier-major (`k * L + l`).
    pub fn pair_amplitudes(&self, p: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.num_subcarriers * self.num_antenna_pairs;
        self.gains[p * n..(p + 1) * n].iter().map(|g| g.norm())
    }
}

#[derive(Clone, Copy, Debug)]
struct Ray {
    amplitude: f64,
    delay: f64,
    phase: f64,
}

#[derive(Clone, Debug)]
struct BodyPath {
    base_delay: f64,
    delay_swing: [f64; TRAJECTORY_TERMS],
    delay_rate: [f64; TRAJECTORY_TERMS],
    delay_phase: [f64; TRAJECTORY_TERMS],
    gain_rate: f64,
    gain_phase: f64,
    phase: f64,
}

impl BodyPath {
    fn draw<R: Rng>(rng: &mut R) -> Self {
        let mut p = BodyPath {
            base_delay: rng.gen_range(15e-9..120e-9),
            delay_swing: [0.0; TRAJECTORY_TERMS],
            delay_rate: [0.0; TRAJECTORY_TERMS],
            delay_phase: [0.0; TRAJECTORY_TERMS],
            gain_rate: rng.gen_range(0.05..0.4),
            gain_phase: rng.gen_range(0.0..2.0 * PI),
            phase: rng.gen_range(0.0..2.0 * PI),
        };
        for m in 0..TRAJECTORY_TERMS {
            p.delay_swing[m] = rng.gen_range(0.5e-9..2.0e-9);
            p.delay_rate[m] = rng.gen_range(0.1..0.6);
            p.delay_phase[m] = rng.gen_range(0.0..2.0 * PI);
        }
        p
    }

    fn at(&self, time_s: f64) -> (f64, f64) {
        let mut delay = self.base_delay;
        for m in 0..TRAJECTORY_TERMS {
            delay += self.delay_swing[m] * (2.0 * PI * self.delay_rate[m] * time_s + self.delay_phase[m]).sin();
        }
        let gain = 0.7 + 0.3 * (2.0 * PI * self.gain_rate * time_s + self.gain_phase).sin();
        (gain, delay)
    }
}

/// Realised geometry of a scene: everything that is fixed for a given seed.
#[derive(Clone, Debug)]
pub struct Scene {
    cfg: SceneConfig,
    freqs: Vec<f64>,
    /// Empty-room response per (p, k, l), same layout as a frame.
    base: Vec<Complex64>,
    /// Noise standard deviation per (p, l).
    noise_sigma: Vec<f64>,
    /// Dip centre per (room, position, p, l).
    notch_center: Vec<f64>,
}

impl Scene {
    pub fn new(cfg: &SceneConfig) -> Result<Self> {
        cfg.validate()?;
        let (np, nk, nl) = (cfg.num_pairs, cfg.num_subcarriers, cfg.num_antenna_pairs);
        let stride = BAND_SUBCARRIERS / nk as f64;
        let freqs: Vec<f64> = (0..nk)
            .map(|k| (k as f64 - (nk as f64 - 1.0) / 2.0) * stride * SUBCARRIER_SPACING_HZ)
            .collect();

        let mut base = vec![Complex64::new(0.0, 0.0); np * nk * nl];
        let mut noise_sigma = vec![0.0; np * nl];
        for p in 0..np {
            for l in 0..nl {
                let mut rng = rng_for(&[cfg.seed, TAG_GEOMETRY, p as u64, l as u64]);
                let direct = rng.gen_range(20e-9..30e-9);
                let mut rays = vec![Ray { amplitude: 1.0, delay: direct, phase: rng.gen_range(0.0..2.0 * PI) }];
                for i in 0..cfg.num_paths {
                    rays.push(Ray {
                        amplitude: rng.gen_range(0.2..0.8) * (-0.15 * i as f64).exp(),
                        delay: direct + rng.gen_range(10e-9..300e-9),
                        phase: rng.gen_range(0.0..2.0 * PI),
                    });
                }
                let mut power = 0.0;
                for (k, &f) in freqs.iter().enumerate() {
                    let h: Complex64 = rays
                        .iter()
                        .map(|r| Complex64::from_polar(r.amplitude, r.phase - 2.0 * PI * f * r.delay))
                        .sum();
                    power += h.norm_sqr();
                    base[(p * nk + k) * nl + l] = h;
                }
                power /= nk as f64;
                noise_sigma[p * nl + l] = if cfg.snr_db.is_infinite() && cfg.snr_db > 0.0 {
                    0.0
                } else {
                    (power / 10f64.powf(cfg.snr_db / 10.0)).sqrt()
                };
            }
        }

        let mut notch_center = vec![0.0; 2 * 2 * np * nl];
        for room in 0..2u64 {
            for pos in 0..2u64 {
                for p in 0..np {
                    for l in 0..nl {
                        let idx = ((room as usize * 2 + pos as usize) * np + p) * nl + l;
                        notch_center[idx] = match cfg.static_notch_center {
                            Some(c) => c,
                            None => {
                                let mut rng = rng_for(&[cfg.seed, TAG_NOTCH, room, pos, p as u64, l as u64]);
                                rng.gen_range(0.0..(nk - 1) as f64)
                            }
                        };
                    }
                }
            }
        }

        Ok(Self { cfg: cfg.clone(), freqs, base, noise_sigma, notch_center })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.cfg
    }

    /// Room holding the receiver of pair `p`. Pair 1 transmits from room 1 into room 2,
    /// pair 2 the reverse; further pairs alternate.
    pub fn rx_room(p: usize) -> usize {
        if p % 2 == 0 {
            1
        } else {
            0
        }
    }

    fn side_scale(&self, room: usize, p: usize) -> f64 {
        if room == Self::rx_room(p) {
            self.cfg.rx_side_gain.sqrt()
        } else {
            1.0
        }
    }

    /// Body paths for a walking occupant of `room`, seen by `(p, l)` in session `realization`.
    fn body_paths(&self, realization: u64, room: usize, p: usize, l: usize) -> [BodyPath; BODY_PATHS] {
        let mut rng = rng_for(&[self.cfg.seed, TAG_WALK, realization, room as u64, p as u64, l as u64]);
        std::array::from_fn(|_| BodyPath::draw(&mut rng))
    }

    /// Channel at frame index `t` of session `realization`.
    pub fn frame(&self, state: &OccupancyState, t: u64, realization: u64, interference_level: f64) -> ComplexCsiFrame {
        let cfg = &self.cfg;
        let (np, nk, nl) = (cfg.num_pairs, cfg.num_subcarriers, cfg.num_antenna_pairs);
        let time_s = t as f64 / cfg.sample_rate;
        let mut gains = self.base.clone();
        let mut rng = rng_for(&[cfg.seed, TAG_FRAME, realization, t]);
        let half_width = cfg.static_notch_width / 2.0;

        for p in 0..np {
            for l in 0..nl {
                for (room, rs) in state.rooms().into_iter().enumerate() {
                    let scale = self.side_scale(room, p);
                    match rs {
                        RoomState::Empty => {}
                        RoomState::StaticLos | RoomState::StaticNlos => {
                            let pos = rs.position_index() as usize;
                            let centre = self.notch_center[((room * 2 + pos) * np + p) * nl + l];
                            let depth = if rs == RoomState::StaticLos {
                                cfg.static_depth_los
                            } else {
                                cfg.static_depth_nlos
                            };
                            let depth = (depth * scale).min(0.95);
                            for k in 0..nk {
                                let u = (k as f64 - centre) / half_width;
                                let i = (p * nk + k) * nl + l;
                                gains[i] -= self.base[i] * (depth * (-0.5 * u * u).exp());
                            }
                        }
                        RoomState::Dynamic => {
                            for body in self.body_paths(realization, room, p, l).iter() {
                                let (g, delay) = body.at(time_s);
                                let amp = cfg.dynamic_amplitude * scale * g;
                                for (k, &f) in self.freqs.iter().enumerate() {
                                    let ph = body.phase - 2.0 * PI * (CARRIER_HZ + f) * delay;
                                    gains[(p * nk + k) * nl + l] += Complex64::from_polar(amp, ph);
                                }
                            }
                        }
                    }
                }

                if interference_level > 0.0 {
                    for _ in 0..INTERFERENCE_PATHS {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        let a = Complex64::new(re, im) * (interference_level / 2f64.sqrt());
                        let delay = rng.gen_range(0.0..400e-9);
                        for (k, &f) in self.freqs.iter().enumerate() {
                            gains[(p * nk + k) * nl + l] += a * Complex64::from_polar(1.0, -2.0 * PI * f * delay);
                        }
                    }
                }

                let sigma = self.noise_sigma[p * nl + l];
                if sigma > 0.0 {
                    for k in 0..nk {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        gains[(p * nk + k) * nl + l] += Complex64::new(re, im) * (sigma / 2f64.sqrt());
                    }
                }
            }
        }

        ComplexCsiFrame { num_pairs: np, num_subcarriers: nk, num_antenna_pairs: nl, gains }
    }
}

/// Simulates one frame at index `t`. The per-frame random stream is keyed by
/// `(cfg.seed, t)`, so the result is a pure function of its arguments.
pub fn simulate_frame(cfg: &SceneConfig, state: &OccupancyState, t: u64) -> Result<ComplexCsiFrame> {
    let scene = Scene::new(cfg)?;
    let frame = scene.frame(state, t, 0, cfg.interference_level);
    if frame.gains.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
        return Err(Error::Data("non-finite channel gain".into()));
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RoomState::*;

    fn quiet() -> SceneConfig {
        SceneConfig { snr_db: f64::INFINITY, ..SceneConfig::desk().with_seed(11) }
    }

    /// Mean over (k, l) of the temporal variance of |h| for pair `p`.
    fn mean_temporal_variance(cfg: &SceneConfig, state: OccupancyState, p: usize, frames: u64) -> f64 {
        let scene = Scene::new(cfg).unwrap();
        let n = cfg.vector_len();
        let mut sum = vec![0.0; n];
        let mut sq = vec![0.0; n];
        for t in 0..frames {
            let f = scene.frame(&state, t, 0, cfg.interference_level);
            for (i, a) in f.pair_amplitudes(p).enumerate() {
                sum[i] += a;
                sq[i] += a * a;
            }
        }
        let m = frames as f64;
        (0..n).map(|i| sq[i] / m - (sum[i] / m).powi(2)).sum::<f64>() / n as f64
    }

    #[test]
    fn empty_room_without_noise_is_constant() {
        let cfg = quiet();
        let s = OccupancyState::new(Empty, Empty);
        let a = simulate_frame(&cfg, &s, 0).unwrap();
        for t in [1, 17, 999] {
            assert_eq!(a, simulate_frame(&cfg, &s, t).unwrap());
        }
    }

    #[test]
    fn frame_is_pure_function_of_inputs() {
        let cfg = SceneConfig::desk().with_seed(5);
        let s = OccupancyState::new(Dynamic, StaticNlos);
        assert_eq!(simulate_frame(&cfg, &s, 42).unwrap(), simulate_frame(&cfg, &s, 42).unwrap());
        assert_ne!(simulate_frame(&cfg, &s, 42).unwrap(), simulate_frame(&cfg, &s, 43).unwrap());
    }

    #[test]
    fn amplitude_is_modulus() {
        let f = simulate_frame(&SceneConfig::desk(), &OccupancyState::new(Dynamic, Empty), 3).unwrap();
        let g = f.gain(1, 2, 1);
        assert!((f.amplitude(1, 2, 1) - (g.re * g.re + g.im * g.im).sqrt()).abs() < 1e-12);
        assert!(f.gains.iter().all(|g| g.re.is_finite() && g.im.is_finite()));
    }

    #[test]
    fn invalid_dims_are_config_errors() {
        let cfg = SceneConfig { num_subcarriers: 1, ..SceneConfig::desk() };
        assert!(matches!(
            simulate_frame(&cfg, &OccupancyState::new(Empty, Empty), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn receiver_side_walker_fluctuates_more() {
        // Pair 1 receives in room 2.
        let cfg = quiet();
        let tx_side = mean_temporal_variance(&cfg, OccupancyState::new(Dynamic, Empty), 0, 1000);
        let rx_side = mean_temporal_variance(&cfg, OccupancyState::new(Empty, Dynamic), 0, 1000);
        let ratio = rx_side / tx_side;
        assert!((1.5..=3.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn standstill_varies_less_than_walking() {
        let cfg = SceneConfig::desk().with_seed(2);
        for p in 0..2 {
            let st = mean_temporal_variance(&cfg, OccupancyState::new(StaticLos, Empty), p, 300);
            let dy = mean_temporal_variance(&cfg, OccupancyState::new(Dynamic, Empty), p, 300);
            assert!(st < dy, "pair {p}: static {st} dynamic {dy}");
        }
    }

    #[test]
    fn standstill_dip_is_local() {
        let cfg = SceneConfig {
            num_subcarriers: 56,
            static_notch_center: Some(30.0),
            static_notch_width: 6.0,
            ..quiet()
        };
        let empty = simulate_frame(&cfg, &OccupancyState::new(Empty, Empty), 0).unwrap();
        let still = simulate_frame(&cfg, &OccupancyState::new(StaticLos, Empty), 0).unwrap();
        let ratio = |k| still.amplitude(0, k, 0) / empty.amplitude(0, k, 0);
        assert!(ratio(30) < 0.6);
        assert!(ratio(5) > 0.999 && ratio(55) > 0.999);
    }
}
