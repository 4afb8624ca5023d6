//! Noisy per-neighbor observations in both domains plus RSSI ranging.
//!
//! Observations are modeled as Gaussians: the measured value is the true
//! value plus a configured (bias, std_dev) error, and the stored variance is
//! the sensor spec's variance (the detector knows its sensors, it does not
//! estimate variances online). Sybil identities appear only in AD; their
//! radio physically originates at the owner, so RSSI ranging for a Sybil
//! identity is centered on the owner's distance, not the claimed one.

use crate::geometry::{distance, relative_kinematics, NodeId, UavState, Vec3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Characteristic indices within a [`CharacteristicVector`].
pub const CHAR_DISTANCE: usize = 0;
pub const CHAR_SPEED: usize = 1;
/// Number of observed characteristics per neighbor (relative distance,
/// relative speed).
pub const K_F: usize = 2;

/// Variance floor so a zero-noise sensor still yields a valid Gaussian.
pub const MIN_VARIANCE: f64 = 1e-12;

/// A scalar measurement with its sensor error variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianObservation {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianObservation {
    pub fn new(mean: f64, variance: f64) -> Self {
        GaussianObservation {
            mean,
            variance: variance.max(MIN_VARIANCE),
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// The per-neighbor observation vector, length `K_F`.
pub type CharacteristicVector = Vec<GaussianObservation>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Ad,
    Vd,
}

/// Scoring-only labels. Detectors never see these: they operate on
/// [`ObservedEntry`] views which omit this struct entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruth {
    /// The physical node behind the entry (the owner, for Sybil identities).
    pub physical: NodeId,
    pub is_sybil: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEntry {
    /// Broadcast identity (AD) or physical track identity (VD).
    pub identity: NodeId,
    pub characteristics: CharacteristicVector,
    /// RSSI ranging estimate, meters. AD entries only.
    pub ranging: Option<f64>,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub domain: Domain,
    pub entries: Vec<NeighborEntry>,
}

/// What a detector is allowed to see of one neighbor.
#[derive(Debug, Clone, Copy)]
pub struct ObservedEntry<'a> {
    pub identity: NodeId,
    pub characteristics: &'a [GaussianObservation],
    pub ranging: Option<f64>,
}

impl NeighborTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ground-truth-free view for detectors.
    pub fn observed(&self) -> Vec<ObservedEntry<'_>> {
        self.entries
            .iter()
            .map(|e| ObservedEntry {
                identity: e.identity,
                characteristics: &e.characteristics,
                ranging: e.ranging,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub bias: f64,
    pub std_dev: f64,
}

impl NoiseParams {
    pub fn zero() -> Self {
        NoiseParams {
            bias: 0.0,
            std_dev: 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        self.std_dev * self.std_dev
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.std_dev == 0.0 {
            self.bias
        } else {
            let normal = Normal::new(self.bias, self.std_dev).expect("finite noise params");
            normal.sample(rng)
        }
    }
}

/// Per-domain, per-characteristic Gaussian error models plus RSSI ranging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub ad_distance: NoiseParams,
    pub ad_speed: NoiseParams,
    pub vd_distance: NoiseParams,
    pub vd_speed: NoiseParams,
    pub rssi_ranging: NoiseParams,
}

impl Default for ErrorModel {
    /// Default sensor calibration. Distance sensing is accurate to well
    /// under a meter in both domains; speed sensing is noisier, and the
    /// visual domain's optical speed estimate is the weakest measurement.
    /// RSSI ranging error has mean 1.26 m and variance 0.86 m^2 (measured).
    fn default() -> Self {
        ErrorModel {
            ad_distance: NoiseParams {
                bias: 0.0,
                std_dev: 0.6,
            },
            ad_speed: NoiseParams {
                bias: 0.0,
                std_dev: 0.12,
            },
            vd_distance: NoiseParams {
                bias: 0.0,
                std_dev: 0.6,
            },
            vd_speed: NoiseParams {
                bias: 0.0,
                std_dev: 0.2,
            },
            rssi_ranging: NoiseParams {
                bias: 1.26,
                std_dev: 0.86f64.sqrt(),
            },
        }
    }
}

impl ErrorModel {
    pub fn noiseless() -> Self {
        ErrorModel {
            ad_distance: NoiseParams::zero(),
            ad_speed: NoiseParams::zero(),
            vd_distance: NoiseParams::zero(),
            vd_speed: NoiseParams::zero(),
            rssi_ranging: NoiseParams::zero(),
        }
    }
}

/// One beacon heard over the radio: the claimed kinematics plus, for
/// ranging, where the transmission physically originates.
#[derive(Debug, Clone, PartialEq)]
pub struct Beacon {
    pub identity: NodeId,
    pub claimed_position: Vec3,
    pub claimed_velocity: Vec3,
    /// True transmitter position (the owner's, for Sybil identities).
    pub tx_position: Vec3,
    pub truth: GroundTruth,
}

/// AD observation: one entry per heard beacon, with noisy relative
/// kinematics computed from the claimed state and a ranging estimate from
/// the true transmitter position.
pub fn observe_ad<R: Rng>(
    receiver: &UavState,
    beacons: &[Beacon],
    model: &ErrorModel,
    rng: &mut R,
) -> NeighborTable {
    let entries = beacons
        .iter()
        .map(|b| {
            let (rel_d, rel_v) =
                relative_kinematics(receiver, b.claimed_position, b.claimed_velocity);
            let characteristics = vec![
                GaussianObservation::new(
                    rel_d + model.ad_distance.sample(rng),
                    model.ad_distance.variance(),
                ),
                GaussianObservation::new(
                    rel_v + model.ad_speed.sample(rng),
                    model.ad_speed.variance(),
                ),
            ];
            let ranging = measure_rssi_range(receiver, b.tx_position, model, rng);
            NeighborEntry {
                identity: b.identity,
                characteristics,
                ranging: Some(ranging),
                truth: b.truth,
            }
        })
        .collect();
    NeighborTable {
        domain: Domain::Ad,
        entries,
    }
}

/// VD observation: one entry per physical node within sensing range. Sybil
/// identities can never appear here.
pub fn observe_vd<R: Rng>(
    receiver: &UavState,
    physical_nodes: &[UavState],
    model: &ErrorModel,
    vd_range: f64,
    rng: &mut R,
) -> NeighborTable {
    let entries = physical_nodes
        .iter()
        .filter(|n| n.id != receiver.id)
        .filter(|n| distance(receiver.position, n.position) <= vd_range)
        .map(|n| {
            let (rel_d, rel_v) = relative_kinematics(receiver, n.position, n.velocity);
            let characteristics = vec![
                GaussianObservation::new(
                    rel_d + model.vd_distance.sample(rng),
                    model.vd_distance.variance(),
                ),
                GaussianObservation::new(
                    rel_v + model.vd_speed.sample(rng),
                    model.vd_speed.variance(),
                ),
            ];
            NeighborEntry {
                identity: n.id,
                characteristics,
                ranging: None,
                truth: GroundTruth {
                    physical: n.id,
                    is_sybil: false,
                },
            }
        })
        .collect();
    NeighborTable {
        domain: Domain::Vd,
        entries,
    }
}

/// RSSI-based ranging toward a transmitter's true position.
pub fn measure_rssi_range<R: Rng>(
    receiver: &UavState,
    tx_position: Vec3,
    model: &ErrorModel,
    rng: &mut R,
) -> f64 {
    distance(receiver.position, tx_position) + model.rssi_ranging.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RegionBounds, Role};
    use crate::rng::{stream_rng, RngSeed, StreamKind};
    use approx::assert_relative_eq;
    use rand::Rng as _;

    fn receiver() -> UavState {
        UavState::legitimate(NodeId(0), Vec3::new(100.0, 100.0, 100.0), Vec3::new(3.0, 0.0, 0.0))
    }

    fn beacon_for(node: &UavState) -> Beacon {
        Beacon {
            identity: node.id,
            claimed_position: node.position,
            claimed_velocity: node.velocity,
            tx_position: node.position,
            truth: GroundTruth {
                physical: node.id,
                is_sybil: false,
            },
        }
    }

    #[test]
    fn zero_noise_gives_exact_kinematics() {
        let rx = receiver();
        let other = UavState::legitimate(
            NodeId(1),
            Vec3::new(150.0, 100.0, 100.0),
            Vec3::new(3.0, 4.0, 0.0),
        );
        let mut rng = stream_rng(RngSeed::new(1, 0), StreamKind::AdNoise, &[0]);
        let table = observe_ad(&rx, &[beacon_for(&other)], &ErrorModel::noiseless(), &mut rng);
        assert_eq!(table.entries.len(), 1);
        let c = &table.entries[0].characteristics;
        assert_relative_eq!(c[CHAR_DISTANCE].mean, 50.0, epsilon = 1e-12);
        assert_relative_eq!(c[CHAR_SPEED].mean, 4.0, epsilon = 1e-12);
        assert_relative_eq!(table.entries[0].ranging.unwrap(), 50.0, epsilon = 1e-12);
    }

    #[test]
    fn vd_counts_physical_nodes_in_range_only() {
        let rx = receiver();
        let near = UavState::legitimate(NodeId(1), Vec3::new(150.0, 100.0, 100.0), Vec3::ZERO);
        let mut mal = UavState::legitimate(NodeId(2), Vec3::new(120.0, 100.0, 100.0), Vec3::ZERO);
        mal.role = Role::Malicious;
        mal.sybil_ids = vec![NodeId(1_000_000)];
        let far = UavState::legitimate(NodeId(3), Vec3::new(500.0, 500.0, 100.0), Vec3::ZERO);
        let mut rng = stream_rng(RngSeed::new(2, 0), StreamKind::VdNoise, &[0]);
        let table = observe_vd(
            &rx,
            &[rx.clone(), near, mal, far],
            &ErrorModel::default(),
            100.0,
            &mut rng,
        );
        // Malicious node is physically present; its Sybil identity is not.
        assert_eq!(table.len(), 2);
        assert!(table.entries.iter().all(|e| !e.truth.is_sybil));
        assert!(table
            .entries
            .iter()
            .all(|e| e.identity != NodeId(1_000_000)));
    }

    #[test]
    fn ad_noise_moments_match_configuration() {
        let rx = receiver();
        let other = UavState::legitimate(
            NodeId(1),
            Vec3::new(180.0, 100.0, 100.0),
            Vec3::new(0.0, 5.0, 0.0),
        );
        let model = ErrorModel::default();
        let mut rng = stream_rng(RngSeed::new(3, 0), StreamKind::AdNoise, &[0]);
        let n = 10_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let t = observe_ad(&rx, &[beacon_for(&other)], &model, &mut rng);
            let err = t.entries[0].characteristics[CHAR_DISTANCE].mean - 80.0;
            sum += err;
            sum_sq += err * err;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        // Three standard errors of the mean / variance estimators.
        let se_mean = model.ad_distance.std_dev / (n as f64).sqrt();
        assert!((mean - model.ad_distance.bias).abs() < 3.0 * se_mean);
        let se_var = model.ad_distance.variance() * (2.0 / n as f64).sqrt();
        assert!((var - model.ad_distance.variance()).abs() < 3.0 * se_var);
    }

    #[test]
    fn rssi_moments_match_default_model() {
        let rx = receiver();
        let tx = Vec3::new(108.0, 100.0, 100.0);
        let model = ErrorModel::default();
        let mut rng = stream_rng(RngSeed::new(4, 0), StreamKind::RssiNoise, &[0]);
        let n = 10_000usize;
        let samples: Vec<f64> = (0..n)
            .map(|_| measure_rssi_range(&rx, tx, &model, &mut rng) - 8.0)
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let se_mean = 0.86f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 1.26).abs() < 3.0 * se_mean, "mean err {mean}");
        let se_var = 0.86 * (2.0 / n as f64).sqrt();
        assert!((var - 0.86).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn sybil_ranging_centered_on_owner_distance() {
        let rx = receiver();
        let region = RegionBounds::new(600.0, 600.0, 300.0);
        let owner_pos = Vec3::new(160.0, 100.0, 100.0);
        let model = ErrorModel::default();
        let mut rng = stream_rng(RngSeed::new(5, 0), StreamKind::RssiNoise, &[1]);
        let owner_dist = distance(rx.position, owner_pos);
        let n = 5_000usize;
        let mut sum = 0.0;
        for _ in 0..n {
            // Claim placed anywhere in the owner's footprint; ranging must
            // still track the owner.
            let claim = crate::mobility::uniform_point(&region, &mut rng);
            let b = Beacon {
                identity: NodeId(1_000_001),
                claimed_position: claim,
                claimed_velocity: Vec3::ZERO,
                tx_position: owner_pos,
                truth: GroundTruth {
                    physical: NodeId(9),
                    is_sybil: true,
                },
            };
            let t = observe_ad(&rx, &[b], &model, &mut rng);
            sum += t.entries[0].ranging.unwrap();
        }
        let mean = sum / n as f64;
        assert!((mean - (owner_dist + 1.26)).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn observation_variance_is_floored() {
        let obs = GaussianObservation::new(1.0, 0.0);
        assert_eq!(obs.variance, MIN_VARIANCE);
    }

    #[test]
    fn observed_view_has_no_truth() {
        let rx = receiver();
        let other = UavState::legitimate(NodeId(1), Vec3::new(150.0, 100.0, 100.0), Vec3::ZERO);
        let mut rng = stream_rng(RngSeed::new(6, 0), StreamKind::AdNoise, &[0]);
        let _ = rng.gen::<u64>();
        let table = observe_ad(&rx, &[beacon_for(&other)], &ErrorModel::default(), &mut rng);
        let view = table.observed();
        assert_eq!(view.len(), 1);
        assert_eq!(view[0].identity, NodeId(1));
    }
}
