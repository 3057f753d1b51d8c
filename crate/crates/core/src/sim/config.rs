use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs of the synthetic two-room scene.
///
/// Dimensions default to the hardware setup (56 subcarriers, 2x2 antennas,
/// bidirectional link, 10 Hz); [`SceneConfig::desk`] shrinks them for fast
/// experiments. Fluctuation magnitudes are calibration values, not
/// measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub num_pairs: usize,
    pub num_subcarriers: usize,
    pub num_antenna_pairs: usize,
    /// Frames per second.
    pub sample_rate: f64,
    /// Reflected paths of the empty-room channel, in addition to the direct path.
    pub num_paths: usize,
    /// Per-subcarrier SNR against the mean empty-room channel power. `inf` disables noise.
    pub snr_db: f64,
    /// Variance multiplier for perturbations caused by an occupant on the receiver side.
    pub rx_side_gain: f64,
    /// Width of the standstill-occupant dip, in subcarriers.
    pub static_notch_width: f64,
    /// Pins the dip centre (subcarrier index) for every room and position.
    pub static_notch_center: Option<f64>,
    /// Fractional dip depth for a standstill occupant in line of sight.
    pub static_depth_los: f64,
    /// Fractional dip depth for a standstill occupant out of line of sight.
    pub static_depth_nlos: f64,
    /// Amplitude of each body-reflected path of a walking occupant, relative to the direct path.
    pub dynamic_amplitude: f64,
    /// Strength of random per-frame paths caused by people outside the two rooms.
    pub interference_level: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            num_pairs: 2,
            num_subcarriers: 56,
            num_antenna_pairs: 4,
            sample_rate: 10.0,
            num_paths: 6,
            snr_db: 20.0,
            rx_side_gain: 2.0,
            static_notch_width: 8.0,
            static_notch_center: None,
            static_depth_los: 0.5,
            static_depth_nlos: 0.3,
            dynamic_amplitude: 0.25,
            interference_level: 0.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    /// Desk-scale dimensions: 8 subcarriers, 2 antenna pairs.
    pub fn desk() -> Self {
        Self {
            num_subcarriers: 8,
            num_antenna_pairs: 2,
            static_notch_width: 2.0,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Length of one flattened amplitude vector (`K * L`).
    pub fn vector_len(&self) -> usize {
        self.num_subcarriers * self.num_antenna_pairs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_pairs < 1 {
            return bad("num_pairs must be >= 1");
        }
        if self.num_subcarriers < 2 {
            return bad("num_subcarriers must be >= 2");
        }
        if self.num_antenna_pairs < 1 {
            return bad("num_antenna_pairs must be >= 1");
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad("sample_rate must be positive and finite");
        }
        if !(self.rx_side_gain >= 1.0) {
            return bad("rx_side_gain must be >= 1");
        }
        if self.snr_db.is_nan() {
            return bad("snr_db must not be NaN");
        }
        if !(self.static_notch_width > 0.0) {
            return bad("static_notch_width must be positive");
        }
        for (name, d) in [
            ("static_depth_los", self.static_depth_los),
            ("static_depth_nlos", self.static_depth_nlos),
        ] {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.dynamic_amplitude >= 0.0) || !(self.interference_level >= 0.0) {
            return bad("dynamic_amplitude and interference_level must be >= 0");
        }
        Ok(())
    }
}
