//! Simulation and optimization toolkit for blockage-aware reliable
//! millimeter-wave downlink beamforming with coordinated multi-point
//! transmission.
//!
//! A cluster of multi-antenna transmitters jointly serves single-antenna
//! users over sparse line-of-sight-dominated channels. Links randomly lose
//! their line-of-sight path between channel estimation and transmission, so
//! the beamformer design guarantees each user's rate under every combination
//! of surviving serving links above a configurable floor. Two solvers are
//! provided (a successive convex approximation outer loop and a merged
//! low-complexity iteration derived from its optimality conditions), plus
//! closed-form reliability formulas, Monte Carlo outage experiments, and a
//! hybrid analog-digital front end.

pub mod channel;
pub mod combinatorics;
pub mod hybrid;
pub mod linalg;
pub mod metrics;
pub mod reliability;
pub mod rng;
pub mod scenario;
pub mod solver;

pub use channel::{ChannelSet, ChannelSnapshot, LinkChannel};
pub use combinatorics::{SubsetEntry, SubsetFamily};
pub use metrics::{BeamformerSet, SinrReport};
pub use scenario::{ScenarioError, SystemConfig, Topology};
