//! TOML run configuration.
//!
//! Every section is optional and falls back to the reference setup; unknown
//! keys are rejected so typos fail loudly. `RunConfig::scenario()` resolves
//! the file into the harness types.

use crate::channel::{db_to_linear, dbm_to_watts, ChannelParams};
use crate::detectors::{MatchingConfig, SolverChoice};
use crate::geometry::RegionBounds;
use crate::harness::{Aggregation, DetectorKind, Scenario};
use crate::matcher::BalanceMode;
use crate::mobility::MobilityConfig;
use crate::adversary::AttackConfig;
use crate::sensing::{ErrorModel, NoiseParams};
use crate::similarity::MixtureMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("invalid value at {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionSection {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for RegionSection {
    fn default() -> Self {
        RegionSection {
            length: 600.0,
            width: 600.0,
            height: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub alpha: f64,
    pub tx_power_dbm: f64,
    /// Thermal noise; give exactly one of the two forms.
    pub noise_dbm: Option<f64>,
    pub noise_watts: Option<f64>,
    pub sinr_threshold_db: f64,
    pub outage_constraint: f64,
    pub safe_distance: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            alpha: 2.0,
            tx_power_dbm: 56.0,
            noise_dbm: None,
            noise_watts: None,
            sinr_threshold_db: -7.0,
            outage_constraint: 0.8,
            safe_distance: 5.0,
        }
    }
}

impl ChannelSection {
    fn noise(&self) -> Result<f64, ConfigError> {
        match (self.noise_dbm, self.noise_watts) {
            (Some(_), Some(_)) => Err(invalid(
                "channel.noise_dbm",
                "give either noise_dbm or noise_watts, not both",
            )),
            (Some(dbm), None) => Ok(dbm_to_watts(dbm)),
            (None, Some(w)) => Ok(w),
            (None, None) => Ok(5e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilitySection {
    pub v_min: f64,
    pub v_max: f64,
    pub dt: f64,
    pub waypoint_pause: f64,
}

impl Default for MobilitySection {
    fn default() -> Self {
        MobilitySection {
            v_min: 5.0,
            v_max: 10.0,
            dt: 1.0,
            waypoint_pause: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub malicious_fraction: f64,
    pub sybils_per_malicious: usize,
    pub attack_epoch: usize,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            malicious_fraction: 0.2,
            sybils_per_malicious: 10,
            attack_epoch: 0,
        }
    }
}

/// RSSI ranging error spec: bias plus spread given as a standard deviation
/// or a variance (exactly one).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangingNoiseSection {
    pub bias: Option<f64>,
    pub std_dev: Option<f64>,
    pub variance: Option<f64>,
}

impl RangingNoiseSection {
    fn resolve(&self, default: NoiseParams) -> Result<NoiseParams, ConfigError> {
        let std_dev = match (self.std_dev, self.variance) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "error_model.rssi_ranging",
                    "give either std_dev or variance, not both",
                ))
            }
            (Some(s), None) => s,
            (None, Some(v)) if v >= 0.0 => v.sqrt(),
            (None, Some(v)) => {
                return Err(invalid(
                    "error_model.rssi_ranging.variance",
                    format!("must be >= 0, got {v}"),
                ))
            }
            (None, None) => default.std_dev,
        };
        Ok(NoiseParams {
            bias: self.bias.unwrap_or(default.bias),
            std_dev,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorModelSection {
    pub ad_distance: Option<NoiseParams>,
    pub ad_speed: Option<NoiseParams>,
    pub vd_distance: Option<NoiseParams>,
    pub vd_speed: Option<NoiseParams>,
    pub rssi_ranging: RangingNoiseSection,
    /// Zeroes every error source; individual overrides still apply on top.
    pub noiseless: bool,
}

impl ErrorModelSection {
    fn resolve(&self) -> Result<ErrorModel, ConfigError> {
        let base = if self.noiseless {
            ErrorModel::noiseless()
        } else {
            ErrorModel::default()
        };
        Ok(ErrorModel {
            ad_distance: self.ad_distance.unwrap_or(base.ad_distance),
            ad_speed: self.ad_speed.unwrap_or(base.ad_speed),
            vd_distance: self.vd_distance.unwrap_or(base.vd_distance),
            vd_speed: self.vd_speed.unwrap_or(base.vd_speed),
            rssi_ranging: self.rssi_ranging.resolve(base.rssi_ranging)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_nodes: usize,
    pub epochs: usize,
    pub replicates: usize,
    pub seed: u64,
    pub detectors: Vec<DetectorKind>,
    pub solver: SolverChoice,
    pub solver_budget: usize,
    pub balance_mode: BalanceMode,
    pub mixture_mode: MixtureMode,
    /// Visual sensing range in meters; defaults to the radio range.
    pub vd_range: Option<f64>,
    pub aggregation: Aggregation,
    pub rssi_epsilon: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let m = MatchingConfig::default();
        SimSection {
            n_nodes: 50,
            epochs: 20,
            replicates: 5,
            seed: 42,
            detectors: DetectorKind::ALL.to_vec(),
            solver: m.solver,
            solver_budget: m.solver_budget,
            balance_mode: m.balance_mode,
            mixture_mode: m.mixture_mode,
            vd_range: None,
            aggregation: Aggregation::Micro,
            rssi_epsilon: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub region: RegionSection,
    pub channel: ChannelSection,
    pub mobility: MobilitySection,
    pub attack: AttackSection,
    pub error_model: ErrorModelSection,
    pub sim: SimSection,
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        RunConfig::from_toml(&text, &path.display().to_string())
    }

    pub fn from_toml(text: &str, path: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.region;
        if !(r.length > 0.0 && r.width > 0.0 && r.height > 0.0) {
            return Err(invalid("region", "all dimensions must be positive"));
        }
        let c = &self.channel;
        if c.alpha <= 0.0 {
            return Err(invalid("channel.alpha", "must be positive"));
        }
        c.noise()?;
        if !(c.outage_constraint > 0.0 && c.outage_constraint < 1.0) {
            return Err(invalid("channel.outage_constraint", "must lie in (0, 1)"));
        }
        if c.safe_distance < 0.0 {
            return Err(invalid("channel.safe_distance", "must be >= 0"));
        }
        self.error_model.resolve()?;
        let m = &self.mobility;
        if !(m.v_min >= 0.0 && m.v_max >= m.v_min && m.v_max > 0.0) {
            return Err(invalid("mobility", "need 0 <= v_min <= v_max, v_max > 0"));
        }
        if m.dt <= 0.0 {
            return Err(invalid("mobility.dt", "must be positive"));
        }
        if m.waypoint_pause < 0.0 {
            return Err(invalid("mobility.waypoint_pause", "must be >= 0"));
        }
        let a = &self.attack;
        if !(0.0..1.0).contains(&a.malicious_fraction) {
            return Err(invalid("attack.malicious_fraction", "must lie in [0, 1)"));
        }
        if a.sybils_per_malicious == 0 {
            return Err(invalid("attack.sybils_per_malicious", "must be >= 1"));
        }
        let s = &self.sim;
        if s.n_nodes < 2 {
            return Err(invalid("sim.n_nodes", "need at least two nodes"));
        }
        if s.epochs == 0 {
            return Err(invalid("sim.epochs", "must be >= 1"));
        }
        if s.replicates == 0 {
            return Err(invalid("sim.replicates", "must be >= 1"));
        }
        if s.detectors.is_empty() {
            return Err(invalid("sim.detectors", "need at least one detector"));
        }
        if let Some(v) = s.vd_range {
            if v <= 0.0 {
                return Err(invalid("sim.vd_range", "must be positive"));
            }
        }
        if s.rssi_epsilon < 0.0 {
            return Err(invalid("sim.rssi_epsilon", "must be >= 0"));
        }
        Ok(())
    }

    /// Resolves into the harness scenario (all units linear / SI).
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        self.validate()?;
        let region = RegionBounds::new(self.region.length, self.region.width, self.region.height);
        Ok(Scenario {
            channel: ChannelParams {
                alpha: self.channel.alpha,
                tx_power: dbm_to_watts(self.channel.tx_power_dbm),
                noise: self.channel.noise()?,
                sinr_threshold: db_to_linear(self.channel.sinr_threshold_db),
                outage_constraint: self.channel.outage_constraint,
                safe_distance: self.channel.safe_distance,
                region,
                n_nodes: self.sim.n_nodes,
            },
            mobility: MobilityConfig {
                v_min: self.mobility.v_min,
                v_max: self.mobility.v_max,
                region,
                dt: self.mobility.dt,
                waypoint_pause: self.mobility.waypoint_pause,
            },
            attack: AttackConfig {
                malicious_fraction: self.attack.malicious_fraction,
                sybils_per_malicious: self.attack.sybils_per_malicious,
                attack_epoch: self.attack.attack_epoch,
            },
            error_model: self.error_model.resolve()?,
            epochs: self.sim.epochs,
            vd_range: self.sim.vd_range,
            detectors: self.sim.detectors.clone(),
            matching: MatchingConfig {
                solver: self.sim.solver,
                solver_budget: self.sim.solver_budget,
                balance_mode: self.sim.balance_mode,
                mixture_mode: self.sim.mixture_mode,
            },
            rssi_epsilon: self.sim.rssi_epsilon,
            aggregation: self.sim.aggregation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_resolves_to_reference_scenario() {
        let cfg = RunConfig::from_toml("", "test").unwrap();
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc, Scenario::reference());
        assert_eq!(cfg.sim.seed, 42);
    }

    #[test]
    fn full_file_round_trips() {
        let text = r#"
            [region]
            length = 500.0
            width = 400.0
            height = 200.0

            [channel]
            alpha = 2.5
            tx_power_dbm = 40.0
            noise_dbm = 0.0
            sinr_threshold_db = -5.0
            outage_constraint = 0.9
            safe_distance = 10.0

            [mobility]
            v_min = 2.0
            v_max = 15.0
            dt = 0.5
            waypoint_pause = 1.0

            [attack]
            malicious_fraction = 0.1
            sybils_per_malicious = 5
            attack_epoch = 3

            [error_model]
            noiseless = true

            [error_model.ad_distance]
            bias = 0.5
            std_dev = 2.0

            [error_model.rssi_ranging]
            bias = 1.0
            variance = 4.0

            [sim]
            n_nodes = 30
            epochs = 10
            replicates = 3
            seed = 7
            detectors = ["va", "rssi"]
            solver = "hungarian"
            solver_budget = 50
            balance_mode = "raw_sum"
            mixture_mode = "exact_mixture"
            vd_range = 250.0
            aggregation = "macro"
            rssi_epsilon = 2.0
        "#;
        let cfg = RunConfig::from_toml(text, "test").unwrap();
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc.channel.n_nodes, 30);
        assert!((sc.channel.noise - 1e-3).abs() < 1e-12);
        assert_eq!(sc.attack.attack_epoch, 3);
        assert_eq!(sc.error_model.ad_distance.bias, 0.5);
        // noiseless zeroes everything not explicitly overridden
        assert_eq!(sc.error_model.vd_distance.std_dev, 0.0);
        assert_eq!(sc.error_model.rssi_ranging.std_dev, 2.0);
        assert_eq!(sc.detectors, vec![DetectorKind::Va, DetectorKind::Rssi]);
        assert_eq!(sc.matching.solver, SolverChoice::Hungarian);
        assert_eq!(sc.matching.balance_mode, BalanceMode::RawSum);
        assert_eq!(sc.matching.mixture_mode, MixtureMode::ExactMixture);
        assert_eq!(sc.vd_range, Some(250.0));
        assert_eq!(sc.aggregation, Aggregation::Macro);
        assert_eq!(cfg.sim.seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("[sim]\nn_node = 10\n", "test").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }), "{err}");
    }

    #[test]
    fn conflicting_noise_forms_are_rejected() {
        let text = "[channel]\nnoise_dbm = 0.0\nnoise_watts = 1e-3\n";
        let err = RunConfig::from_toml(text, "test").unwrap_err();
        assert!(err.to_string().contains("noise_dbm"), "{err}");
    }

    #[test]
    fn rssi_std_dev_and_variance_conflict() {
        let text = "[error_model.rssi_ranging]\nstd_dev = 1.0\nvariance = 1.0\n";
        let err = RunConfig::from_toml(text, "test").unwrap_err();
        assert!(err.to_string().contains("rssi_ranging"), "{err}");
    }

    #[test]
    fn validation_reports_field_paths() {
        let err = RunConfig::from_toml("[sim]\nepochs = 0\n", "test").unwrap_err();
        assert!(err.to_string().contains("sim.epochs"), "{err}");
        let err = RunConfig::from_toml("[attack]\nmalicious_fraction = 1.5\n", "test").unwrap_err();
        assert!(err.to_string().contains("attack.malicious_fraction"), "{err}");
    }
}
