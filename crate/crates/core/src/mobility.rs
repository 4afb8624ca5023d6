//! Random-waypoint mobility inside the flight region.
//!
//! Each node flies in a straight line toward its current waypoint at a
//! constant speed, then draws a new uniform waypoint in the region and a
//! new uniform speed in `[v_min, v_max]`. Waypoints and region are closed
//! boxes, so positions never leave the region.

use crate::geometry::{RegionBounds, UavState, Vec3};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub region: RegionBounds,
    /// Epoch step, seconds.
    pub dt: f64,
    /// Dwell time at each waypoint, seconds. Defaults to 0 (continuous motion).
    pub waypoint_pause: f64,
}

impl MobilityConfig {
    pub fn is_valid(&self) -> bool {
        self.v_min > 0.0 && self.v_min <= self.v_max && self.dt > 0.0 && self.waypoint_pause >= 0.0
    }
}

/// Per-node trajectory memory between epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub waypoint: Vec3,
    pub speed: f64,
    pub pause_left: f64,
}

pub fn uniform_point<R: Rng>(region: &RegionBounds, rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.gen_range(0.0..=region.length),
        rng.gen_range(0.0..=region.width),
        rng.gen_range(0.0..=region.height),
    )
}

fn draw_leg<R: Rng>(cfg: &MobilityConfig, rng: &mut R) -> (Vec3, f64) {
    let waypoint = uniform_point(&cfg.region, rng);
    let speed = rng.gen_range(cfg.v_min..=cfg.v_max);
    (waypoint, speed)
}

/// Initializes the trajectory memory for a node already placed in the region.
pub fn init_state<R: Rng>(cfg: &MobilityConfig, rng: &mut R) -> MobilityState {
    let (waypoint, speed) = draw_leg(cfg, rng);
    MobilityState {
        waypoint,
        speed,
        pause_left: 0.0,
    }
}

/// Advances one node by one epoch step. Returns the new kinematic state and
/// updates the trajectory memory in place.
pub fn step<R: Rng>(
    state: &UavState,
    mob: &mut MobilityState,
    cfg: &MobilityConfig,
    rng: &mut R,
) -> UavState {
    let mut next = state.clone();
    let mut remaining = cfg.dt;

    if mob.pause_left > 0.0 {
        let pause = mob.pause_left.min(remaining);
        mob.pause_left -= pause;
        remaining -= pause;
    }

    while remaining > 0.0 {
        let to_wp = mob.waypoint.sub(next.position);
        let dist = to_wp.norm();
        let travel = mob.speed * remaining;
        if travel < dist {
            next.position = next.position.add(to_wp.scale(travel / dist));
            break;
        }
        // Arrive within this step; land on the waypoint, then draw a new leg.
        next.position = mob.waypoint;
        if dist > 0.0 {
            remaining -= dist / mob.speed;
        }
        let (waypoint, speed) = draw_leg(cfg, rng);
        mob.waypoint = waypoint;
        mob.speed = speed;
        if cfg.waypoint_pause > 0.0 {
            let pause = cfg.waypoint_pause.min(remaining);
            mob.pause_left = cfg.waypoint_pause - pause;
            remaining -= pause;
        }
    }

    let to_wp = mob.waypoint.sub(next.position);
    let dist = to_wp.norm();
    next.velocity = if dist > 0.0 && mob.pause_left <= 0.0 {
        to_wp.scale(mob.speed / dist)
    } else {
        Vec3::ZERO
    };
    next.position = cfg.region.clamp(next.position);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NodeId;
    use crate::rng::{stream_rng, RngSeed, StreamKind};
    use approx::assert_relative_eq;

    fn cfg() -> MobilityConfig {
        MobilityConfig {
            v_min: 5.0,
            v_max: 15.0,
            region: RegionBounds::new(600.0, 600.0, 300.0),
            dt: 2.0,
            waypoint_pause: 0.0,
        }
    }

    #[test]
    fn advances_along_the_line() {
        let cfg = cfg();
        let state = UavState::legitimate(NodeId(0), Vec3::new(0.0, 10.0, 10.0), Vec3::ZERO);
        let mut mob = MobilityState {
            waypoint: Vec3::new(100.0, 10.0, 10.0),
            speed: 10.0,
            pause_left: 0.0,
        };
        let mut rng = stream_rng(RngSeed::new(1, 0), StreamKind::Mobility, &[0]);
        let next = step(&state, &mut mob, &cfg, &mut rng);
        assert_relative_eq!(next.position.x, 20.0, epsilon = 1e-12);
        assert_relative_eq!(next.velocity.norm(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn redraws_at_waypoint() {
        let cfg = cfg();
        let at = Vec3::new(50.0, 50.0, 50.0);
        let state = UavState::legitimate(NodeId(0), at, Vec3::ZERO);
        let mut mob = MobilityState {
            waypoint: at,
            speed: 10.0,
            pause_left: 0.0,
        };
        let mut rng = stream_rng(RngSeed::new(2, 0), StreamKind::Mobility, &[0]);
        let next = step(&state, &mut mob, &cfg, &mut rng);
        assert_ne!(mob.waypoint, at);
        assert!(mob.speed >= cfg.v_min && mob.speed <= cfg.v_max);
        assert!(cfg.region.contains(next.position));
    }

    #[test]
    fn full_trajectory_stays_in_bounds_with_valid_speeds() {
        let cfg = cfg();
        let mut rng = stream_rng(RngSeed::new(3, 0), StreamKind::Mobility, &[5]);
        let mut state =
            UavState::legitimate(NodeId(5), uniform_point(&cfg.region, &mut rng), Vec3::ZERO);
        let mut mob = init_state(&cfg, &mut rng);
        for _ in 0..150 {
            state = step(&state, &mut mob, &cfg, &mut rng);
            assert!(cfg.region.contains(state.position));
            let v = state.velocity.norm();
            assert!(v >= cfg.v_min - 1e-9 && v <= cfg.v_max + 1e-9, "speed {v}");
        }
    }

    #[test]
    fn same_seed_reproduces_trajectory() {
        let cfg = cfg();
        let run = |seed: RngSeed| {
            let mut rng = stream_rng(seed, StreamKind::Mobility, &[0]);
            let mut state =
                UavState::legitimate(NodeId(0), uniform_point(&cfg.region, &mut rng), Vec3::ZERO);
            let mut mob = init_state(&cfg, &mut rng);
            (0..150)
                .map(|_| {
                    state = step(&state, &mut mob, &cfg, &mut rng);
                    state.position
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(RngSeed::new(9, 1)), run(RngSeed::new(9, 1)));
        assert_ne!(run(RngSeed::new(9, 1)), run(RngSeed::new(9, 2)));
    }
}
