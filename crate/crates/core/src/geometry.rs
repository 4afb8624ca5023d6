//! Shared domain types and 3-D geometry.
//!
//! All quantities are SI internally: meters, meters per second, watts.
//! dBm/dB values exist only at the configuration boundary.

use serde::{Deserialize, Serialize};

/// A point or velocity in 3-D space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn add(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn sub(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    a.sub(b).norm()
}

/// Opaque identifier for a broadcast identity (legitimate, malicious or
/// Sybil). Unique within a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Legitimate,
    Malicious,
}

/// State of one physical UAV at an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    pub id: NodeId,
    pub position: Vec3,
    pub velocity: Vec3,
    pub role: Role,
    /// Pre-allocated Sybil identities; empty unless the node is malicious.
    pub sybil_ids: Vec<NodeId>,
}

impl UavState {
    pub fn legitimate(id: NodeId, position: Vec3, velocity: Vec3) -> Self {
        UavState {
            id,
            position,
            velocity,
            role: Role::Legitimate,
            sybil_ids: Vec::new(),
        }
    }
}

/// The cuboid flight region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBounds {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl RegionBounds {
    pub fn new(length: f64, width: f64, height: f64) -> Self {
        RegionBounds {
            length,
            width,
            height,
        }
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    /// Maximum distance between any two points in the region (box diagonal).
    pub fn diagonal(&self) -> f64 {
        (self.length * self.length + self.width * self.width + self.height * self.height).sqrt()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0.0..=self.length).contains(&p.x)
            && (0.0..=self.width).contains(&p.y)
            && (0.0..=self.height).contains(&p.z)
    }

    /// Clamps a point into the closed box.
    pub fn clamp(&self, p: Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(0.0, self.length),
            p.y.clamp(0.0, self.width),
            p.z.clamp(0.0, self.height),
        )
    }

    pub fn is_valid(&self) -> bool {
        self.length > 0.0 && self.width > 0.0 && self.height > 0.0
    }
}

/// Relative distance (m) and relative speed (m/s) between an observer and a
/// target's claimed or true kinematic state.
pub fn relative_kinematics(
    observer: &UavState,
    target_position: Vec3,
    target_velocity: Vec3,
) -> (f64, f64) {
    let rel_distance = distance(observer.position, target_position);
    let rel_speed = observer.velocity.sub(target_velocity).norm();
    (rel_distance, rel_speed)
}
