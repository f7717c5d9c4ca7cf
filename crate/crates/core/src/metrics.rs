//! Rate and interference evaluations.
//!
//! Everything here works link-wise on per-transmitter blocks; the stacked
//! flat-vector forms in `combinatorics` serve as the cross-checking oracle.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::ChannelSnapshot;
use crate::combinatorics::SubsetEntry;
use crate::linalg::{inner, norm_sq};

/// Transmit beamformers for every (transmitter, user) pair. Blocks for pairs
/// outside a user's serving set stay zero, which is what makes plain sums
/// over all transmitters equal sums over serving sets.
#[derive(Debug, Clone, Serialize)]
pub struct BeamformerSet {
    pub num_rrus: usize,
    pub num_users: usize,
    pub nt: usize,
    data: Vec<Complex64>,
}

impl BeamformerSet {
    pub fn zeros(num_rrus: usize, num_users: usize, nt: usize) -> Self {
        Self {
            num_rrus,
            num_users,
            nt,
            data: vec![Complex64::new(0.0, 0.0); num_rrus * num_users * nt],
        }
    }

    pub fn beam(&self, b: usize, k: usize) -> &[Complex64] {
        let start = (b * self.num_users + k) * self.nt;
        &self.data[start..start + self.nt]
    }

    pub fn beam_mut(&mut self, b: usize, k: usize) -> &mut [Complex64] {
        let start = (b * self.num_users + k) * self.nt;
        &mut self.data[start..start + self.nt]
    }

    /// Total transmit power at transmitter b.
    pub fn rru_power(&self, b: usize) -> f64 {
        (0..self.num_users).map(|k| norm_sq(self.beam(b, k))).sum()
    }

    /// Largest per-transmitter power relative to the budget.
    pub fn max_power_ratio(&self, power_w: f64) -> f64 {
        (0..self.num_rrus)
            .map(|b| self.rru_power(b) / power_w)
            .fold(0.0, f64::max)
    }
}

/// Σ_b mask[b] * h_{b,k}^H f_{b,j}: the coherent gain user k's channel picks
/// up from user j's beams under a survival mask.
pub fn masked_gain(
    channels: &ChannelSnapshot,
    beams: &BeamformerSet,
    k: usize,
    mask: &[bool],
    j: usize,
) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for b in 0..channels.num_rrus {
        if mask[b] {
            acc += inner(&channels.link(b, k).effective(), beams.beam(b, j));
        }
    }
    acc
}

/// Full-set rate ratio for user k: all serving transmitters present, all
/// interference present.
pub fn sinr_full(
    channels: &ChannelSnapshot,
    beams: &BeamformerSet,
    k: usize,
    sigma2: f64,
) -> f64 {
    let mask = vec![true; channels.num_rrus];
    let full = SubsetEntry {
        available: Vec::new(),
        blocked: Vec::new(),
        mask,
    };
    sinr_subset(channels, beams, k, &full, sigma2)
}

/// Rate ratio for user k under one survival hypothesis: blocked serving
/// transmitters vanish from both the signal and the interference.
pub fn sinr_subset(
    channels: &ChannelSnapshot,
    beams: &BeamformerSet,
    k: usize,
    entry: &SubsetEntry,
    sigma2: f64,
) -> f64 {
    let signal = masked_gain(channels, beams, k, &entry.mask, k).norm_sqr();
    signal / interference_plus_noise(channels, beams, k, entry, sigma2)
}

/// Noise plus masked co-channel interference at user k.
pub fn interference_plus_noise(
    channels: &ChannelSnapshot,
    beams: &BeamformerSet,
    k: usize,
    entry: &SubsetEntry,
    sigma2: f64,
) -> f64 {
    let mut acc = sigma2;
    for u in 0..channels.num_users {
        if u != k {
            acc += masked_gain(channels, beams, k, &entry.mask, u).norm_sqr();
        }
    }
    acc
}

/// Quadratic-over-linear potential (σ² + Σ_j |gain_j|²) / (1 + γ). Jointly
/// convex in the beams and γ, which is what the surrogate linearizes.
pub fn qol_function(
    channels: &ChannelSnapshot,
    beams: &BeamformerSet,
    k: usize,
    entry: &SubsetEntry,
    sigma2: f64,
    gamma: f64,
) -> f64 {
    let mut acc = sigma2;
    for j in 0..channels.num_users {
        acc += masked_gain(channels, beams, k, &entry.mask, j).norm_sqr();
    }
    acc / (1.0 + gamma)
}

/// First-order expansion of `qol_function` around (point_beams, point_gamma).
/// Touches the function at the point and never exceeds it elsewhere.
pub fn taylor_surrogate(
    channels: &ChannelSnapshot,
    k: usize,
    entry: &SubsetEntry,
    beams: &BeamformerSet,
    gamma: f64,
    point_beams: &BeamformerSet,
    point_gamma: f64,
    sigma2: f64,
) -> f64 {
    let denom = 1.0 + point_gamma;
    let mut cross = 0.0;
    let mut point_power = sigma2;
    for j in 0..channels.num_users {
        let g_point = masked_gain(channels, point_beams, k, &entry.mask, j);
        let g_new = masked_gain(channels, beams, k, &entry.mask, j);
        cross += 2.0 * (g_point.conj() * (g_new - g_point)).re;
        point_power += g_point.norm_sqr();
    }
    cross / denom + (point_power / denom) * (1.0 - (gamma - point_gamma) / denom)
}

/// Weighted utility Σ_k w_k ln(1 + γ_k) (natural log).
pub fn weighted_sum_rate(gammas: &[f64], weights: &[f64]) -> f64 {
    gammas
        .iter()
        .zip(weights)
        .map(|(g, w)| w * (1.0 + g).ln())
        .sum()
}

/// Worst rate ratio of user k over a family of survival hypotheses.
pub fn pessimistic_sinr(
    channels: &ChannelSnapshot,
    beams: &BeamformerSet,
    k: usize,
    entries: &[SubsetEntry],
    sigma2: f64,
) -> f64 {
    entries
        .iter()
        .map(|e| sinr_subset(channels, beams, k, e, sigma2))
        .fold(f64::INFINITY, f64::min)
}

/// Per-user rate summary for one beamformer set on one snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct SinrReport {
    /// Full-set ratios (nothing masked).
    pub full: Vec<f64>,
    /// Ratios per survival hypothesis, family order.
    pub per_subset: Vec<Vec<f64>>,
    /// min over the family; what a robust design guarantees.
    pub pessimistic: Vec<f64>,
    /// log2(1 + pessimistic), bits/s/Hz.
    pub rate_bits: Vec<f64>,
}

pub fn sinr_report(
    channels: &ChannelSnapshot,
    beams: &BeamformerSet,
    family: &crate::combinatorics::SubsetFamily,
    sigma2: f64,
) -> SinrReport {
    let num_users = channels.num_users;
    let mut full = Vec::with_capacity(num_users);
    let mut per_subset = Vec::with_capacity(num_users);
    let mut pessimistic = Vec::with_capacity(num_users);
    let mut rate_bits = Vec::with_capacity(num_users);
    for k in 0..num_users {
        let subs: Vec<f64> = family.per_user[k]
            .iter()
            .map(|e| sinr_subset(channels, beams, k, e, sigma2))
            .collect();
        let worst = subs.iter().copied().fold(f64::INFINITY, f64::min);
        full.push(sinr_full(channels, beams, k, sigma2));
        per_subset.push(subs);
        pessimistic.push(worst);
        rate_bits.push((1.0 + worst).log2());
    }
    SinrReport {
        full,
        per_subset,
        pessimistic,
        rate_bits,
    }
}
