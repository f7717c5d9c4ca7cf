//! System configuration: radio parameters, cluster sizes, solver knobs.
//!
//! Configs load from TOML. Unknown keys are a hard error so a typo cannot
//! silently fall back to a default. Every field has a default mirroring the
//! reference deployment (8 transmitters, 16 antennas each, 4 users, serving
//! sets of 4), so a config file only needs to list what it overrides.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Validation(String),
}

/// Full description of one experiment setup.
///
/// Powers are dBm, the noise level is a power spectral density in dBm/Hz,
/// distances are meters, and `blockage_density` is the blocker rate per meter
/// of link length.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of coordinated transmitters (B).
    #[serde(default = "d_num_rrus")]
    pub num_rrus: usize,
    /// Antennas per transmitter (Nt).
    #[serde(default = "d_antennas")]
    pub antennas_per_rru: usize,
    /// Number of single-antenna users (K).
    #[serde(default = "d_num_users")]
    pub num_users: usize,
    /// Serving-set cardinality per user (|B_k|).
    #[serde(default = "d_serving_set_size")]
    pub serving_set_size: usize,
    /// Minimum number of serving links that must survive (L).
    #[serde(default = "d_subset_floor")]
    pub subset_floor: usize,
    /// Per-transmitter power budget, dBm.
    #[serde(default = "d_tx_power_dbm")]
    pub tx_power_dbm: f64,
    /// Noise power spectral density, dBm/Hz.
    #[serde(default = "d_noise_psd")]
    pub noise_psd_dbm_hz: f64,
    /// System bandwidth, Hz.
    #[serde(default = "d_bandwidth")]
    pub bandwidth_hz: f64,
    /// Carrier frequency, Hz (antenna spacing is half a wavelength, so this
    /// is informational for the array response).
    #[serde(default = "d_carrier")]
    pub carrier_freq_hz: f64,
    /// Line-of-sight path-loss exponent.
    #[serde(default = "d_los_exp")]
    pub los_pathloss_exp: f64,
    /// Non-line-of-sight path-loss exponent.
    #[serde(default = "d_nlos_exp")]
    pub nlos_pathloss_exp: f64,
    /// Multipath components per link (1 line-of-sight + the rest scattered).
    #[serde(default = "d_num_paths")]
    pub num_paths: usize,
    /// Blocker density per meter; a link of length d keeps line of sight
    /// with probability exp(-density * d).
    #[serde(default = "d_blockage")]
    pub blockage_density: f64,
    /// Per-user rate weights. Empty means all ones.
    #[serde(default)]
    pub user_weights: Vec<f64>,
    /// Outer-loop iteration cap for the successive-approximation solver.
    #[serde(default = "d_sca_iters")]
    pub sca_max_iters: usize,
    /// Iteration cap for the low-complexity iterative solver.
    #[serde(default = "d_kkt_iters")]
    pub kkt_max_iters: usize,
    /// Relative tolerance on the per-transmitter power when searching the
    /// power price.
    #[serde(default = "d_bisection_tol")]
    pub bisection_tol: f64,
    /// Relative objective-stagnation tolerance used by the stopping rules.
    #[serde(default = "d_convergence_tol")]
    pub convergence_tol: f64,
    /// Dual (subgradient) step size.
    #[serde(default = "d_subgrad_step")]
    pub subgrad_step: f64,
    /// Best-response damping factor in (0, 1].
    #[serde(default = "d_best_response")]
    pub best_response_step: f64,
    /// Service area width, meters.
    #[serde(default = "d_area_w")]
    pub area_width_m: f64,
    /// Service area height, meters.
    #[serde(default = "d_area_h")]
    pub area_height_m: f64,
    /// Master seed for all randomness.
    #[serde(default = "d_seed")]
    pub rng_seed: u64,
    /// Explicit transmitter coordinates; omit to place them equally spaced
    /// on the area perimeter.
    #[serde(default)]
    pub rru_positions: Option<Vec<[f64; 2]>>,
    /// Explicit user coordinates; omit to drop users uniformly at random.
    #[serde(default)]
    pub user_positions: Option<Vec<[f64; 2]>>,
    /// Explicit serving sets (0-based transmitter indices); omit to assign
    /// each user its nearest transmitters.
    #[serde(default)]
    pub serving_sets: Option<Vec<Vec<usize>>>,
}

fn d_num_rrus() -> usize { 8 }
fn d_antennas() -> usize { 16 }
fn d_num_users() -> usize { 4 }
fn d_serving_set_size() -> usize { 4 }
fn d_subset_floor() -> usize { 3 }
fn d_tx_power_dbm() -> f64 { 33.0 }
fn d_noise_psd() -> f64 { -72.0 }
fn d_bandwidth() -> f64 { 20e6 }
fn d_carrier() -> f64 { 28e9 }
fn d_los_exp() -> f64 { 2.0 }
fn d_nlos_exp() -> f64 { 4.0 }
fn d_num_paths() -> usize { 4 }
fn d_blockage() -> f64 { 0.005 }
fn d_sca_iters() -> usize { 50 }
fn d_kkt_iters() -> usize { 2000 }
fn d_bisection_tol() -> f64 { 1e-6 }
fn d_convergence_tol() -> f64 { 1e-3 }
fn d_subgrad_step() -> f64 { 0.005 }
fn d_best_response() -> f64 { 0.05 }
fn d_area_w() -> f64 { 100.0 }
fn d_area_h() -> f64 { 50.0 }
fn d_seed() -> u64 { 1 }

impl Default for SystemConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config must deserialize")
    }
}

impl SystemConfig {
    /// Load and validate a TOML config file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Parse and validate a TOML string.
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let mut cfg: SystemConfig = toml::from_str(text)?;
        cfg.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fill derived defaults (weights) in place.
    pub fn normalize(&mut self) {
        if self.user_weights.is_empty() {
            self.user_weights = vec![1.0; self.num_users];
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Validation(msg));
        if self.num_rrus == 0 || self.num_users == 0 || self.antennas_per_rru == 0 {
            return fail("counts must be positive".into());
        }
        if self.serving_set_size == 0 || self.serving_set_size > self.num_rrus {
            return fail(format!(
                "serving_set_size {} must be in 1..={}",
                self.serving_set_size, self.num_rrus
            ));
        }
        if self.subset_floor == 0 || self.subset_floor > self.serving_set_size {
            return fail(format!(
                "subset_floor {} must be in 1..={}",
                self.subset_floor, self.serving_set_size
            ));
        }
        if self.num_paths == 0 {
            return fail("num_paths must be at least 1".into());
        }
        if !(self.bandwidth_hz > 0.0) || !(self.carrier_freq_hz > 0.0) {
            return fail("bandwidth_hz and carrier_freq_hz must be positive".into());
        }
        if !self.tx_power_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return fail("power levels must be finite".into());
        }
        if !(self.blockage_density >= 0.0) {
            return fail("blockage_density must be nonnegative".into());
        }
        if !(self.los_pathloss_exp >= 0.0) || !(self.nlos_pathloss_exp >= 0.0) {
            return fail("path-loss exponents must be nonnegative".into());
        }
        if self.user_weights.len() != self.num_users {
            return fail(format!(
                "user_weights has {} entries for {} users",
                self.user_weights.len(),
                self.num_users
            ));
        }
        if self.user_weights.iter().any(|w| !(*w >= 0.0)) {
            return fail("user_weights must be nonnegative".into());
        }
        if !(self.area_width_m > 0.0) || !(self.area_height_m > 0.0) {
            return fail("area dimensions must be positive".into());
        }
        if self.sca_max_iters == 0 || self.kkt_max_iters == 0 {
            return fail("iteration caps must be positive".into());
        }
        if !(self.bisection_tol > 0.0) || !(self.convergence_tol > 0.0) {
            return fail("tolerances must be positive".into());
        }
        if !(self.subgrad_step > 0.0) {
            return fail("subgrad_step must be positive".into());
        }
        if !(self.best_response_step > 0.0 && self.best_response_step <= 1.0) {
            return fail("best_response_step must be in (0, 1]".into());
        }
        if let Some(pos) = &self.rru_positions {
            if pos.len() != self.num_rrus {
                return fail(format!(
                    "rru_positions has {} entries for {} transmitters",
                    pos.len(),
                    self.num_rrus
                ));
            }
        }
        if let Some(pos) = &self.user_positions {
            if pos.len() != self.num_users {
                return fail(format!(
                    "user_positions has {} entries for {} users",
                    pos.len(),
                    self.num_users
                ));
            }
        }
        if let Some(sets) = &self.serving_sets {
            if sets.len() != self.num_users {
                return fail(format!(
                    "serving_sets has {} entries for {} users",
                    sets.len(),
                    self.num_users
                ));
            }
            for (k, set) in sets.iter().enumerate() {
                if set.len() != self.serving_set_size {
                    return fail(format!(
                        "serving set for user {k} has {} entries, expected {}",
                        set.len(),
                        self.serving_set_size
                    ));
                }
                let mut seen = vec![false; self.num_rrus];
                for &b in set {
                    if b >= self.num_rrus {
                        return fail(format!("serving set for user {k} references transmitter {b}"));
                    }
                    if seen[b] {
                        return fail(format!("serving set for user {k} repeats transmitter {b}"));
                    }
                    seen[b] = true;
                }
            }
        }
        Ok(())
    }

    /// Per-transmitter power budget in watts.
    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Receiver noise power in watts over the full bandwidth.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10())
    }
}

/// 10^((dBm - 30) / 10)
pub(crate) fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let mut cfg = SystemConfig::default();
        cfg.normalize();
        cfg.validate().unwrap();
        assert_eq!(cfg.num_rrus, 8);
        assert_eq!(cfg.antennas_per_rru, 16);
        assert_eq!(cfg.user_weights, vec![1.0; 4]);
    }

    #[test]
    fn unit_conversions() {
        // 33 dBm is 2 W to within rounding of 10^0.3
        assert!((dbm_to_watts(33.0) - 1.995262).abs() < 1e-6);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        // -72 dBm/Hz over 20 MHz: -72 + 73.0103 dBm = 1.0103 dBm
        let cfg = SystemConfig::default();
        let sigma2 = cfg.noise_power_w();
        assert!((sigma2 - dbm_to_watts(-72.0 + 10.0 * 20e6f64.log10())).abs() < 1e-15);
        assert!((sigma2 - 1.2619e-3).abs() < 1e-6, "sigma2 = {sigma2}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = SystemConfig::from_toml_str("num_rrus = 4\nnum_rrsu = 4\n");
        assert!(matches!(err, Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn partial_override_keeps_defaults() {
        let cfg = SystemConfig::from_toml_str("num_users = 2\nsubset_floor = 2\n").unwrap();
        assert_eq!(cfg.num_users, 2);
        assert_eq!(cfg.num_rrus, 8);
        assert_eq!(cfg.user_weights.len(), 2);
    }

    #[test]
    fn floor_above_set_size_is_invalid() {
        let err = SystemConfig::from_toml_str("serving_set_size = 3\nsubset_floor = 4\n");
        assert!(matches!(err, Err(ScenarioError::Validation(_))));
    }

    #[test]
    fn bad_serving_set_is_invalid() {
        let text = "num_rrus = 4\nnum_users = 1\nserving_set_size = 2\nsubset_floor = 1\nserving_sets = [[0, 7]]\n";
        assert!(SystemConfig::from_toml_str(text).is_err());
        let text = "num_rrus = 4\nnum_users = 1\nserving_set_size = 2\nsubset_floor = 1\nserving_sets = [[3, 3]]\n";
        assert!(SystemConfig::from_toml_str(text).is_err());
    }
}
