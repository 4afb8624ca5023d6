//! Attack model: role assignment and Sybil identity fabrication.
//!
//! Attacks are direct (one-hop beacons), simultaneous (all identities appear
//! at the attack epoch) and fabricated (fresh identities, never stolen).
//! Each Sybil identity maintains its own plausible virtual random-waypoint
//! trajectory confined to a sphere around its owner, so Sybil beacons are
//! statistically indistinguishable from legitimate beacons in AD and the VD
//! cross-check is the deciding evidence.

use crate::geometry::{NodeId, RegionBounds, Role, UavState, Vec3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sybil identities are allocated from this offset so they can never collide
/// with physical node ids within a run.
pub const SYBIL_ID_BASE: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("malicious fraction {0} rounds to zero attackers for {1} nodes")]
    NoAttackerRepresentable(f64, usize),
    #[error("invalid attack parameter: {0}")]
    InvalidParam(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Fraction of nodes that are malicious (P_m).
    pub malicious_fraction: f64,
    /// Sybil identities fabricated per malicious node (N_s).
    pub sybils_per_malicious: usize,
    /// Epoch at which all identities appear at once.
    pub attack_epoch: usize,
}

impl AttackConfig {
    pub fn malicious_count(&self, n_nodes: usize) -> usize {
        (self.malicious_fraction * n_nodes as f64).round() as usize
    }
}

/// One fabricated identity's beacon content for an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SybilIdentity {
    pub id: NodeId,
    pub claimed_position: Vec3,
    pub claimed_velocity: Vec3,
    pub owner: NodeId,
}

/// Marks `round(P_m * N)` uniformly chosen nodes malicious and pre-allocates
/// their fresh Sybil ids.
pub fn assign_roles<R: Rng>(
    mut nodes: Vec<UavState>,
    cfg: &AttackConfig,
    rng: &mut R,
) -> Result<Vec<UavState>, AttackError> {
    if !(0.0..1.0).contains(&cfg.malicious_fraction) {
        return Err(AttackError::InvalidParam("malicious_fraction must lie in [0, 1)"));
    }
    if cfg.sybils_per_malicious < 1 {
        return Err(AttackError::InvalidParam("sybils_per_malicious must be >= 1"));
    }
    let n = nodes.len();
    let count = cfg.malicious_count(n);
    if cfg.malicious_fraction > 0.0 && count == 0 {
        return Err(AttackError::NoAttackerRepresentable(cfg.malicious_fraction, n));
    }

    // Partial Fisher-Yates over indices picks the attackers uniformly.
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..count.min(n) {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    let mut next_sybil = SYBIL_ID_BASE;
    let mut chosen: Vec<usize> = indices[..count].to_vec();
    chosen.sort_unstable();
    for idx in chosen {
        nodes[idx].role = Role::Malicious;
        nodes[idx].sybil_ids = (0..cfg.sybils_per_malicious)
            .map(|k| NodeId(next_sybil + k as u64))
            .collect();
        next_sybil += cfg.sybils_per_malicious as u64;
    }
    Ok(nodes)
}

#[derive(Debug, Clone)]
struct SybilTrack {
    id: NodeId,
    /// Position relative to nothing in particular: absolute coordinates,
    /// kept within `radius` of the owner.
    position: Vec3,
    waypoint: Vec3,
    speed: f64,
}

/// Persistent virtual trajectories for one malicious node's Sybil identities.
#[derive(Debug, Clone)]
pub struct SybilSwarm {
    owner: NodeId,
    radius: f64,
    region: RegionBounds,
    v_min: f64,
    v_max: f64,
    tracks: Option<Vec<SybilTrack>>,
}

fn uniform_in_sphere<R: Rng>(center: Vec3, radius: f64, region: &RegionBounds, rng: &mut R) -> Vec3 {
    let r = radius * rng.gen_range(0.0f64..=1.0).cbrt();
    // Uniform direction via normalized Gaussian triple.
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        );
        let n = v.norm();
        if n > 1e-6 && n <= 1.0 {
            let p = center.add(v.scale(r / n));
            return region.clamp(p);
        }
    }
}

impl SybilSwarm {
    pub fn new(
        owner: NodeId,
        radius: f64,
        region: RegionBounds,
        v_min: f64,
        v_max: f64,
    ) -> Self {
        SybilSwarm {
            owner,
            radius,
            region,
            v_min,
            v_max,
            tracks: None,
        }
    }

    fn spawn_tracks<R: Rng>(&self, owner: &UavState, rng: &mut R) -> Vec<SybilTrack> {
        owner
            .sybil_ids
            .iter()
            .map(|&id| {
                let position = uniform_in_sphere(owner.position, self.radius, &self.region, rng);
                let waypoint = uniform_in_sphere(owner.position, self.radius, &self.region, rng);
                let speed = rng.gen_range(self.v_min..=self.v_max);
                SybilTrack {
                    id,
                    position,
                    waypoint,
                    speed,
                }
            })
            .collect()
    }

    /// Emits the epoch's claims. Empty before the attack epoch; exactly
    /// `N_s` claims afterwards, each following its own virtual trajectory
    /// and staying within `radius` of the (moving) owner.
    pub fn claims<R: Rng>(
        &mut self,
        owner: &UavState,
        epoch: usize,
        attack_epoch: usize,
        dt: f64,
        rng: &mut R,
    ) -> Vec<SybilIdentity> {
        debug_assert_eq!(owner.role, Role::Malicious);
        debug_assert_eq!(owner.id, self.owner);
        if epoch < attack_epoch {
            return Vec::new();
        }
        if self.tracks.is_none() {
            self.tracks = Some(self.spawn_tracks(owner, rng));
        }
        let radius = self.radius;
        let region = self.region;
        let (v_min, v_max) = (self.v_min, self.v_max);
        let tracks = self.tracks.as_mut().unwrap();
        tracks
            .iter_mut()
            .map(|t| {
                let to_wp = t.waypoint.sub(t.position);
                let dist = to_wp.norm();
                let travel = t.speed * dt;
                if travel >= dist {
                    t.position = t.waypoint;
                    t.waypoint = uniform_in_sphere(owner.position, radius, &region, rng);
                    t.speed = rng.gen_range(v_min..=v_max);
                } else {
                    t.position = t.position.add(to_wp.scale(travel / dist));
                }
                // The owner moved since the waypoint was drawn; keep the
                // claim inside its radio footprint.
                let from_owner = t.position.sub(owner.position);
                if from_owner.norm() > radius {
                    t.position = owner.position.add(from_owner.scale(radius * 0.999 / from_owner.norm()));
                    t.waypoint = uniform_in_sphere(owner.position, radius, &region, rng);
                }
                let to_wp = t.waypoint.sub(t.position);
                let dist = to_wp.norm();
                let claimed_velocity = if dist > 0.0 {
                    to_wp.scale(t.speed / dist)
                } else {
                    Vec3::ZERO
                };
                SybilIdentity {
                    id: t.id,
                    claimed_position: t.position,
                    claimed_velocity,
                    owner: owner.id,
                }
            })
            .collect()
    }
}
