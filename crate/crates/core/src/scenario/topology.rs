//! Node placement and serving-set assignment.

use super::config::{ScenarioError, SystemConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fixed geometry of one drop: coordinates plus each user's serving set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub rru_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    /// Serving transmitters per user, nearest first (ties broken by lower
    /// index). Explicitly configured sets keep their given order.
    pub serving_sets: Vec<Vec<usize>>,
}

impl Topology {
    /// Users served by each transmitter (inverse of `serving_sets`).
    pub fn users_of_rru(&self, num_rrus: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); num_rrus];
        for (k, set) in self.serving_sets.iter().enumerate() {
            for &b in set {
                out[b].push(k);
            }
        }
        out
    }
}

/// Euclidean distance between transmitter `b` and user `k`.
pub fn link_distance(topo: &Topology, b: usize, k: usize) -> f64 {
    let [xb, yb] = topo.rru_positions[b];
    let [xk, yk] = topo.user_positions[k];
    ((xb - xk).powi(2) + (yb - yk).powi(2)).sqrt()
}

/// Build the drop geometry.
///
/// Transmitters go on the area perimeter at arc offsets (i + 1/2) * P / B
/// (counterclockwise from the origin corner) unless the config pins them.
/// Users are uniform over the rectangle unless pinned. Serving sets are the
/// `serving_set_size` nearest transmitters ordered by (distance, index).
pub fn build_topology(cfg: &SystemConfig, rng: &mut impl Rng) -> Result<Topology, ScenarioError> {
    let rru_positions = match &cfg.rru_positions {
        Some(p) => p.clone(),
        None => perimeter_points(cfg.area_width_m, cfg.area_height_m, cfg.num_rrus),
    };
    let user_positions = match &cfg.user_positions {
        Some(p) => p.clone(),
        None => (0..cfg.num_users)
            .map(|_| {
                [
                    rng.gen::<f64>() * cfg.area_width_m,
                    rng.gen::<f64>() * cfg.area_height_m,
                ]
            })
            .collect(),
    };

    let mut topo = Topology {
        rru_positions,
        user_positions,
        serving_sets: Vec::new(),
    };
    topo.serving_sets = match &cfg.serving_sets {
        Some(sets) => sets.clone(),
        None => (0..cfg.num_users)
            .map(|k| nearest_rrus(&topo, k, cfg.serving_set_size))
            .collect(),
    };
    Ok(topo)
}

fn nearest_rrus(topo: &Topology, k: usize, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..topo.rru_positions.len()).collect();
    order.sort_by(|&a, &b| {
        link_distance(topo, a, k)
            .partial_cmp(&link_distance(topo, b, k))
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(count);
    order
}

/// `count` points equally spaced along the rectangle boundary, offset half a
/// step so none lands exactly on a corner.
fn perimeter_points(width: f64, height: f64, count: usize) -> Vec<[f64; 2]> {
    let perimeter = 2.0 * (width + height);
    (0..count)
        .map(|i| {
            let mut t = (i as f64 + 0.5) * perimeter / count as f64;
            if t < width {
                return [t, 0.0];
            }
            t -= width;
            if t < height {
                return [width, t];
            }
            t -= height;
            if t < width {
                return [width - t, height];
            }
            t -= width;
            [0.0, height - t]
        })
        .collect()
}
