//! Deployment description: system parameters and node geometry.

mod config;
mod topology;

pub use config::{ScenarioError, SystemConfig};
pub use topology::{build_topology, link_distance, Topology};
