//! Sparse millimeter-wave channel model.
//!
//! Each transmitter-user link carries one geometry-derived line-of-sight path
//! plus a handful of scattered paths with uniformly random departure angles.
//! Blockage is a per-link Bernoulli event that erases the line-of-sight
//! component only; the scattered field survives. Channels are drawn once per
//! drop in two snapshots that share every path coefficient and differ only in
//! which links happen to be blocked: the estimation snapshot is what the
//! optimizer sees, the transmission snapshot is what the air applies.

use crate::rng::standard_complex;
use crate::scenario::{link_distance, SystemConfig, Topology};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Gains below this distance stop growing (close-in reference distance).
const MIN_GAIN_DISTANCE_M: f64 = 1.0;

/// Uniform-linear-array response at half-wavelength spacing:
/// element n is exp(-j pi n sin(angle)) / sqrt(nt). Unit Euclidean norm.
pub fn steering_vector(angle: f64, nt: usize) -> Vec<Complex64> {
    let scale = 1.0 / (nt as f64).sqrt();
    let phase_step = -std::f64::consts::PI * angle.sin();
    (0..nt)
        .map(|n| Complex64::from_polar(scale, phase_step * n as f64))
        .collect()
}

/// One transmitter-user link, split into its line-of-sight and scattered
/// parts. The full channel is `los` (zeroed when `los_blocked`) plus `nlos`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkChannel {
    pub los: Vec<Complex64>,
    pub nlos: Vec<Complex64>,
    pub los_blocked: bool,
    pub distance_m: f64,
}

impl LinkChannel {
    /// The channel the receiver actually sees.
    pub fn effective(&self) -> Vec<Complex64> {
        if self.los_blocked {
            self.nlos.clone()
        } else {
            self.los.iter().zip(&self.nlos).map(|(l, n)| l + n).collect()
        }
    }
}

/// All links of one snapshot, indexed by (transmitter, user).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSnapshot {
    pub num_rrus: usize,
    pub num_users: usize,
    pub nt: usize,
    links: Vec<LinkChannel>,
}

impl ChannelSnapshot {
    /// Assemble a snapshot from raw links, row-major by transmitter
    /// (link of (b, k) at index b * num_users + k). Useful for replaying
    /// dumps and for synthetic channels in tests.
    pub fn from_links(
        num_rrus: usize,
        num_users: usize,
        nt: usize,
        links: Vec<LinkChannel>,
    ) -> Self {
        assert_eq!(links.len(), num_rrus * num_users);
        assert!(links.iter().all(|l| l.los.len() == nt && l.nlos.len() == nt));
        Self {
            num_rrus,
            num_users,
            nt,
            links,
        }
    }

    pub fn link(&self, b: usize, k: usize) -> &LinkChannel {
        &self.links[b * self.num_users + k]
    }

    fn link_mut(&mut self, b: usize, k: usize) -> &mut LinkChannel {
        &mut self.links[b * self.num_users + k]
    }

    /// Effective channel vectors for every link, indexed like `link`.
    pub fn effective_all(&self) -> Vec<Vec<Complex64>> {
        self.links.iter().map(LinkChannel::effective).collect()
    }
}

/// Paired snapshots of one drop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSet {
    pub estimation: ChannelSnapshot,
    pub transmission: ChannelSnapshot,
}

/// Whether a link of this length loses its line-of-sight path. Keep
/// probability is exp(-density * distance), so density 0 never blocks.
pub fn sample_blockage(distance_m: f64, blockage_density: f64, rng: &mut impl Rng) -> bool {
    let keep = (-blockage_density * distance_m).exp();
    rng.gen::<f64>() >= keep
}

/// Draw one link's path coefficients (blockage flag left clear).
///
/// Consumes randomness in a fixed order: line-of-sight fading first, then
/// angle and fading per scattered path.
pub fn generate_link(
    cfg: &SystemConfig,
    distance_m: f64,
    los_angle: f64,
    rng: &mut impl Rng,
) -> LinkChannel {
    let nt = cfg.antennas_per_rru;
    let m = cfg.num_paths;
    let d = distance_m.max(MIN_GAIN_DISTANCE_M);
    let scale = (nt as f64 / m as f64).sqrt();

    let los_gain = standard_complex(rng) * d.powf(-cfg.los_pathloss_exp) * scale;
    let los = conj_response(los_angle, nt, los_gain);

    let mut nlos = vec![Complex64::new(0.0, 0.0); nt];
    for _ in 1..m {
        let angle = rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
        let gain = standard_complex(rng) * d.powf(-cfg.nlos_pathloss_exp) * scale;
        let path = conj_response(angle, nt, gain);
        for (acc, p) in nlos.iter_mut().zip(&path) {
            *acc += p;
        }
    }

    LinkChannel {
        los,
        nlos,
        los_blocked: false,
        distance_m,
    }
}

/// gain times the conjugated array response (channels are formed against the
/// transmit response, so the receive-side coefficient conjugates it).
fn conj_response(angle: f64, nt: usize, gain: Complex64) -> Vec<Complex64> {
    steering_vector(angle, nt)
        .into_iter()
        .map(|a| gain * a.conj())
        .collect()
}

/// Draw a full drop: every link's paths once, then independent blockage for
/// the estimation and transmission snapshots.
pub fn draw_channel_set(cfg: &SystemConfig, topo: &Topology, rng: &mut impl Rng) -> ChannelSet {
    let mut links = Vec::with_capacity(cfg.num_rrus * cfg.num_users);
    for b in 0..cfg.num_rrus {
        for k in 0..cfg.num_users {
            let d = link_distance(topo, b, k);
            let [xb, yb] = topo.rru_positions[b];
            let [xk, yk] = topo.user_positions[k];
            let angle = (yk - yb).atan2(xk - xb);
            links.push(generate_link(cfg, d, angle, rng));
        }
    }
    let base = ChannelSnapshot {
        num_rrus: cfg.num_rrus,
        num_users: cfg.num_users,
        nt: cfg.antennas_per_rru,
        links,
    };
    let mut estimation = base.clone();
    let mut transmission = base;
    for b in 0..cfg.num_rrus {
        for k in 0..cfg.num_users {
            let d = estimation.link(b, k).distance_m;
            estimation.link_mut(b, k).los_blocked = sample_blockage(d, cfg.blockage_density, rng);
            transmission.link_mut(b, k).los_blocked = sample_blockage(d, cfg.blockage_density, rng);
        }
    }
    ChannelSet {
        estimation,
        transmission,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::scenario::build_topology;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn cfg() -> SystemConfig {
        let mut c = SystemConfig::default();
        c.normalize();
        c
    }

    #[test]
    fn steering_two_element_broadside_fire() {
        // angle pi/2: phase step is -pi, so elements alternate sign
        let v = steering_vector(std::f64::consts::FRAC_PI_2, 2);
        let s = 1.0 / 2f64.sqrt();
        assert!((v[0] - Complex64::new(s, 0.0)).norm() < 1e-14);
        assert!((v[1] - Complex64::new(-s, 0.0)).norm() < 1e-14);
        // angle 0: all elements equal
        let v = steering_vector(0.0, 4);
        for e in &v {
            assert!((e - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn steering_always_unit_norm(angle in -1.6f64..1.6, nt in 1usize..64) {
            let v = steering_vector(angle, nt);
            let n: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            prop_assert!((n - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn los_gain_follows_distance_law() {
        // same randomness, doubled distance, exponent 2: magnitude quarters
        let c = cfg();
        let near = generate_link(&c, 20.0, 0.3, &mut substream(5, 0));
        let far = generate_link(&c, 40.0, 0.3, &mut substream(5, 0));
        let ratio = crate::linalg::norm_sq(&near.los) / crate::linalg::norm_sq(&far.los);
        assert!((ratio - 16.0).abs() < 1e-9, "norm-sq ratio {ratio}");
    }

    #[test]
    fn los_phase_progression_matches_angle() {
        let c = cfg();
        let angle = 0.4f64;
        let link = generate_link(&c, 25.0, angle, &mut substream(6, 0));
        let expect = Complex64::from_polar(1.0, std::f64::consts::PI * angle.sin());
        for w in link.los.windows(2) {
            let r = w[1] / w[0];
            assert!((r - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn single_path_link_has_no_scatter() {
        let mut c = cfg();
        c.num_paths = 1;
        let link = generate_link(&c, 30.0, 0.0, &mut substream(7, 0));
        assert!(crate::linalg::norm_sq(&link.nlos) == 0.0);
        assert!(crate::linalg::norm_sq(&link.los) > 0.0);
    }

    #[test]
    fn effective_channel_respects_blockage() {
        let c = cfg();
        let mut link = generate_link(&c, 30.0, 0.2, &mut substream(8, 0));
        let open = link.effective();
        link.los_blocked = true;
        let closed = link.effective();
        for i in 0..c.antennas_per_rru {
            assert!((open[i] - (link.los[i] + link.nlos[i])).norm() < TOL);
            assert!((closed[i] - link.nlos[i]).norm() < TOL);
        }
    }

    #[test]
    fn zero_density_never_blocks() {
        let mut rng = substream(9, 0);
        for _ in 0..10_000 {
            assert!(!sample_blockage(500.0, 0.0, &mut rng));
        }
    }

    #[test]
    fn blockage_rate_matches_model() {
        // d = 100, eta = 0.01: block probability 1 - exp(-1) = 0.6321
        let mut rng = substream(10, 0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_blockage(100.0, 0.01, &mut rng))
            .count();
        let p = hits as f64 / n as f64;
        let expect = 1.0 - (-1.0f64).exp();
        let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((p - expect).abs() < 3.0 * sigma, "p = {p}, expect {expect}");
    }

    #[test]
    fn snapshots_share_paths_but_not_blockage() {
        let mut c = cfg();
        c.blockage_density = 0.02; // make flips likely
        let topo = build_topology(&c, &mut substream(11, 0)).unwrap();
        let set = draw_channel_set(&c, &topo, &mut substream(11, 1));
        let mut differing_flags = 0;
        for b in 0..c.num_rrus {
            for k in 0..c.num_users {
                let e = set.estimation.link(b, k);
                let t = set.transmission.link(b, k);
                assert_eq!(e.distance_m, t.distance_m);
                for i in 0..c.antennas_per_rru {
                    assert_eq!(e.los[i], t.los[i]);
                    assert_eq!(e.nlos[i], t.nlos[i]);
                }
                if e.los_blocked != t.los_blocked {
                    differing_flags += 1;
                }
            }
        }
        assert!(differing_flags > 0, "independent snapshots should differ somewhere");
    }

    #[test]
    fn channel_set_is_seed_deterministic() {
        let c = cfg();
        let topo = build_topology(&c, &mut substream(12, 0)).unwrap();
        let a = draw_channel_set(&c, &topo, &mut substream(12, 1));
        let b = draw_channel_set(&c, &topo, &mut substream(12, 1));
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
        // and the dump round-trips
        let back: ChannelSet = serde_json::from_str(&ja).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), ja);
    }
}
