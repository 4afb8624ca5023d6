//! LoS path-loss / SINR channel model.
//!
//! Connectivity is deterministic: node `j` is an AD neighbor of `i` iff
//! their distance is at most the effective transmission range `D_r`, the
//! distance at which the outage probability `exp(-γ_th d^α (N_0+N_I)/P)`
//! meets the constraint `P_th`. Small-scale fading is absorbed analytically
//! into the outage expression; interference uses the closed-form population
//! average over an equivalent node density.

use crate::geometry::{distance, NodeId, RegionBounds, Role, UavState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("path-loss exponent alpha = 3 hits the interference closed-form singularity")]
    AlphaSingularity,
    #[error("invalid channel parameter: {0}")]
    InvalidParam(&'static str),
    #[error("computed effective range is not positive (check power/noise/threshold)")]
    NonPositiveRange,
}

/// Primary channel parameters, all in linear SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub alpha: f64,
    /// Transmit power per node, watts.
    pub tx_power: f64,
    /// Thermal noise power, watts.
    pub noise: f64,
    /// SINR threshold, linear ratio.
    pub sinr_threshold: f64,
    /// Outage probability constraint, in (0, 1).
    pub outage_constraint: f64,
    /// Collision-avoidance safe distance, meters.
    pub safe_distance: f64,
    pub region: RegionBounds,
    /// Number of physical nodes (Sybil identities emit no independent power).
    pub n_nodes: usize,
}

/// Quantities derived from [`ChannelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedChannel {
    /// Maximum node separation: the region diagonal, meters.
    pub d_max: f64,
    /// Equivalent number of nodes in the sphere of radius `d_max`.
    pub n_equiv: f64,
    /// Population-average interference, watts.
    pub interference: f64,
    /// Effective transmission range, meters.
    pub effective_range: f64,
}

/// Converts dBm to watts. Applied only at configuration boundaries.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a dB ratio to linear. Applied only at configuration boundaries.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Evaluates the closed-form channel quantities.
pub fn derive_channel(params: &ChannelParams) -> Result<DerivedChannel, ChannelError> {
    if params.alpha <= 0.0 {
        return Err(ChannelError::InvalidParam("alpha must be positive"));
    }
    if params.alpha == 3.0 {
        return Err(ChannelError::AlphaSingularity);
    }
    if params.tx_power <= 0.0 {
        return Err(ChannelError::InvalidParam("tx_power must be positive"));
    }
    if !(0.0..1.0).contains(&params.outage_constraint) || params.outage_constraint == 0.0 {
        return Err(ChannelError::InvalidParam(
            "outage_constraint must lie in (0, 1)",
        ));
    }
    if params.safe_distance <= 0.0 {
        return Err(ChannelError::InvalidParam("safe_distance must be positive"));
    }
    if !params.region.is_valid() {
        return Err(ChannelError::InvalidParam("region dimensions must be positive"));
    }

    let d_max = params.region.diagonal();
    let n_equiv = 4.0 * std::f64::consts::PI * d_max.powi(3) * params.n_nodes as f64
        / (3.0 * params.region.volume());
    let exp = 3.0 - params.alpha;
    let interference = 3.0 * n_equiv * (d_max.powf(exp) - params.safe_distance.powf(exp))
        / (2.0 * d_max.powi(3) * exp);
    let effective_range = (-params.tx_power * params.outage_constraint.ln()
        / (params.sinr_threshold * (params.noise + interference)))
        .powf(1.0 / params.alpha);

    if !effective_range.is_finite() || effective_range <= 0.0 {
        return Err(ChannelError::NonPositiveRange);
    }
    Ok(DerivedChannel {
        d_max,
        n_equiv,
        interference,
        effective_range,
    })
}

/// Outage probability at distance `d`; equals 1 at d = 0 and decreases
/// monotonically in `d`.
pub fn outage_probability(d: f64, params: &ChannelParams, derived: &DerivedChannel) -> f64 {
    (-params.sinr_threshold * d.powf(params.alpha) * (params.noise + derived.interference)
        / params.tx_power)
        .exp()
}

/// Identities a legitimate receiver hears: every other physical node within
/// the effective range, plus all Sybil identities of every malicious node
/// within range.
pub fn ad_neighbors(
    receiver: &UavState,
    all_nodes: &[UavState],
    derived: &DerivedChannel,
) -> Vec<NodeId> {
    let mut out = Vec::new();
    for node in all_nodes {
        if node.id == receiver.id {
            continue;
        }
        if distance(receiver.position, node.position) <= derived.effective_range {
            out.push(node.id);
            if node.role == Role::Malicious {
                out.extend_from_slice(&node.sybil_ids);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    fn reference_params() -> ChannelParams {
        ChannelParams {
            alpha: 2.0,
            tx_power: dbm_to_watts(30.0),
            noise: 1e-9,
            sinr_threshold: db_to_linear(-7.0),
            outage_constraint: 0.8,
            safe_distance: 5.0,
            region: RegionBounds::new(600.0, 600.0, 300.0),
            n_nodes: 50,
        }
    }

    #[test]
    fn diagonal_of_reference_region_is_900() {
        let d = derive_channel(&reference_params()).unwrap();
        assert_relative_eq!(d.d_max, 900.0, epsilon = 1e-9);
    }

    #[test]
    fn outage_constraint_one_gives_zero_range() {
        // ln(P_th) -> 0 as P_th -> 1, so the range collapses.
        let mut p = reference_params();
        p.outage_constraint = 1.0 - 1e-15;
        let d = derive_channel(&p).unwrap();
        assert!(d.effective_range < 1e-3);
    }

    #[test]
    fn derive_channel_matches_step_by_step_oracle() {
        // Independent re-evaluation of the four formulas at the evaluation
        // parameter set.
        let p = reference_params();
        let d = derive_channel(&p).unwrap();

        let d_m = (600.0f64 * 600.0 + 600.0 * 600.0 + 300.0 * 300.0).sqrt();
        let n_e = 4.0 * std::f64::consts::PI * d_m * d_m * d_m * 50.0
            / (3.0 * 600.0 * 600.0 * 300.0);
        let n_i = 3.0 * n_e * (d_m.powf(1.0) - 5.0f64.powf(1.0)) / (2.0 * d_m.powi(3) * 1.0);
        let d_r = (-p.tx_power * 0.8f64.ln() / (p.sinr_threshold * (p.noise + n_i))).sqrt();

        assert_relative_eq!(d.n_equiv, n_e, epsilon = 1e-12);
        assert_relative_eq!(d.interference, n_i, epsilon = 1e-12);
        assert_relative_eq!(d.effective_range, d_r, epsilon = 1e-12);
    }

    #[test]
    fn alpha_three_rejected() {
        let mut p = reference_params();
        p.alpha = 3.0;
        assert_eq!(derive_channel(&p), Err(ChannelError::AlphaSingularity));
    }

    #[test]
    fn outage_is_one_at_zero_and_hits_constraint_at_range() {
        let p = reference_params();
        let d = derive_channel(&p).unwrap();
        assert_eq!(outage_probability(0.0, &p, &d), 1.0);
        assert_relative_eq!(
            outage_probability(d.effective_range, &p, &d),
            p.outage_constraint,
            max_relative = 1e-12
        );
    }

    #[test]
    fn outage_matches_direct_evaluation_and_decreases() {
        let p = reference_params();
        let d = derive_channel(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut prev = f64::INFINITY;
        let mut dist = 0.0;
        for _ in 0..100 {
            dist += rng.gen_range(0.1..5.0);
            let po = outage_probability(dist, &p, &d);
            let oracle = (-p.sinr_threshold * dist.powf(p.alpha) * (p.noise + d.interference)
                / p.tx_power)
                .exp();
            assert_relative_eq!(po, oracle, epsilon = 1e-15);
            assert!(po < prev);
            prev = po;
        }
    }

    #[test]
    fn range_monotone_in_power_and_threshold() {
        let base = reference_params();
        let mut prev = 0.0;
        for dbm in [20.0, 25.0, 30.0, 35.0, 40.0] {
            let mut p = base.clone();
            p.tx_power = dbm_to_watts(dbm);
            let r = derive_channel(&p).unwrap().effective_range;
            assert!(r > prev);
            prev = r;
        }
        prev = f64::INFINITY;
        for db in [-10.0, -8.0, -6.0, -4.0] {
            let mut p = base.clone();
            p.sinr_threshold = db_to_linear(db);
            let r = derive_channel(&p).unwrap().effective_range;
            assert!(r < prev);
            prev = r;
        }
    }

    fn node(id: u64, x: f64) -> UavState {
        UavState::legitimate(NodeId(id), Vec3::new(x, 0.0, 0.0), Vec3::ZERO)
    }

    #[test]
    fn no_node_in_range_gives_empty_list() {
        let p = reference_params();
        let d = derive_channel(&p).unwrap();
        let rx = node(0, 0.0);
        let far = node(1, d.effective_range + 1.0);
        assert!(ad_neighbors(&rx, &[rx.clone(), far], &d).is_empty());
    }

    #[test]
    fn malicious_node_contributes_its_sybils() {
        let p = reference_params();
        let d = derive_channel(&p).unwrap();
        let rx = node(0, 0.0);
        let mut mal = node(1, d.effective_range / 2.0);
        mal.role = Role::Malicious;
        mal.sybil_ids = (100..110).map(NodeId).collect();
        let heard = ad_neighbors(&rx, &[rx.clone(), mal], &d);
        assert_eq!(heard.len(), 11);
    }

    #[test]
    fn ad_neighbors_matches_brute_force_filter() {
        let p = reference_params();
        let d = derive_channel(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let nodes: Vec<UavState> = (0..60)
            .map(|i| {
                let mut n = UavState::legitimate(
                    NodeId(i),
                    Vec3::new(
                        rng.gen_range(0.0..600.0),
                        rng.gen_range(0.0..600.0),
                        rng.gen_range(0.0..300.0),
                    ),
                    Vec3::ZERO,
                );
                if i % 10 == 0 {
                    n.role = Role::Malicious;
                    n.sybil_ids = (1000 + i * 20..1000 + i * 20 + 10).map(NodeId).collect();
                }
                n
            })
            .collect();
        let rx = &nodes[1];
        let heard = ad_neighbors(rx, &nodes, &d);

        let mut expected = Vec::new();
        for n in &nodes {
            if n.id != rx.id && distance(rx.position, n.position) <= d.effective_range {
                expected.push(n.id);
                expected.extend_from_slice(&n.sybil_ids);
            }
        }
        assert_eq!(heard, expected);

        // Count identity: extra identities = N_s * malicious in range.
        let physical = nodes
            .iter()
            .filter(|n| {
                n.id != rx.id && distance(rx.position, n.position) <= d.effective_range
            })
            .count();
        let malicious = nodes
            .iter()
            .filter(|n| {
                n.id != rx.id
                    && n.role == Role::Malicious
                    && distance(rx.position, n.position) <= d.effective_range
            })
            .count();
        assert_eq!(heard.len() - physical, 10 * malicious);
    }
}
