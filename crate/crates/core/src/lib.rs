//! Desk-scale simulator and detection library for Sybil attacks in flying
//! ad-hoc networks.
//!
//! A receiver hears neighbor identities over the radio (the "auditory"
//! domain, AD) and sees physically present neighbors with onboard sensors
//! (the "visual" domain, VD). A malicious node can fabricate any number of
//! radio identities, but none of them exist in VD. The VA-matching detector
//! pairs the two neighbor tables by a divergence-based similarity and
//! declares every unmatched radio identity a Sybil node. The crate also
//! ships the RSSI-ranging baseline and the distance-only / velocity-only
//! ablations it is compared against, plus a seeded Monte-Carlo harness that
//! reproduces the evaluation grids.

pub mod adversary;
pub mod channel;
pub mod config;
pub mod detectors;
pub mod geometry;
pub mod harness;
pub mod matcher;
pub mod mobility;
pub mod oracles;
pub mod rng;
pub mod sensing;
pub mod similarity;

pub use config::RunConfig;
pub use geometry::{distance, relative_kinematics, NodeId, RegionBounds, Role, UavState, Vec3};
pub use rng::RngSeed;
