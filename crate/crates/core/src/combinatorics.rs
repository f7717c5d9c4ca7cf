//! Enumeration of surviving-link combinations.
//!
//! Robustness against blockage is expressed over every subset of a user's
//! serving set that keeps at least `floor` transmitters alive. Each subset
//! also induces a mask over all transmitters (the complement within the
//! serving set is treated as absent) used when evaluating rates under that
//! hypothesis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Topology;

#[derive(Debug, Error)]
pub enum CombinatoricsError {
    #[error("floor {floor} out of range for a set of {set_size}")]
    FloorOutOfRange { floor: usize, set_size: usize },
    #[error("subset count overflows u64 for set size {set_size}")]
    CountOverflow { set_size: usize },
}

/// One survival hypothesis: `available` keeps serving, `blocked` is assumed
/// gone, and `mask[b]` says whether transmitter b participates at all (only
/// the blocked serving transmitters are masked out).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetEntry {
    pub available: Vec<usize>,
    pub blocked: Vec<usize>,
    pub mask: Vec<bool>,
}

/// Survival hypotheses for every user, in a fixed canonical order:
/// larger subsets first, lexicographic within a size. The full serving set
/// (nothing blocked) is always entry 0.
#[derive(Debug, Clone)]
pub struct SubsetFamily {
    pub per_user: Vec<Vec<SubsetEntry>>,
}

impl SubsetFamily {
    pub fn build(
        topo: &Topology,
        floor: usize,
        num_rrus: usize,
    ) -> Result<Self, CombinatoricsError> {
        let per_user = topo
            .serving_sets
            .iter()
            .map(|set| enumerate_subsets(set, floor, num_rrus))
            .collect::<Result<_, _>>()?;
        Ok(Self { per_user })
    }
}

/// Number of subsets of a `set_size` serving set with at least `floor`
/// members: sum of binomials from `floor` to `set_size`.
pub fn subset_count(set_size: usize, floor: usize) -> Result<u64, CombinatoricsError> {
    let mut total: u128 = 0;
    for l in floor..=set_size {
        total += binomial(set_size, l);
        if total > u64::MAX as u128 {
            return Err(CombinatoricsError::CountOverflow { set_size });
        }
    }
    Ok(total as u64)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All subsets of `serving_set` with at least `floor` members, size
/// descending then lexicographic on ascending transmitter indices.
pub fn enumerate_subsets(
    serving_set: &[usize],
    floor: usize,
    num_rrus: usize,
) -> Result<Vec<SubsetEntry>, CombinatoricsError> {
    let n = serving_set.len();
    if floor == 0 || floor > n {
        return Err(CombinatoricsError::FloorOutOfRange {
            floor,
            set_size: n,
        });
    }
    let mut sorted = serving_set.to_vec();
    sorted.sort_unstable();

    let mut out = Vec::with_capacity(subset_count(n, floor)? as usize);
    for size in (floor..=n).rev() {
        for combo in Combinations::new(n, size) {
            let available: Vec<usize> = combo.iter().map(|&i| sorted[i]).collect();
            let blocked: Vec<usize> = sorted
                .iter()
                .copied()
                .filter(|b| !available.contains(b))
                .collect();
            let mut mask = vec![true; num_rrus];
            for &b in &blocked {
                mask[b] = false;
            }
            out.push(SubsetEntry {
                available,
                blocked,
                mask,
            });
        }
    }
    Ok(out)
}

/// Lexicographic k-combinations of 0..n as index vectors.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let current = self.idx.clone();
        let k = self.idx.len();
        // advance: rightmost index that can still move right
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] + 1 <= self.n - (k - i) {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(current)
    }
}

/// Stack per-transmitter channel blocks of one user into a single masked
/// vector: block b is the link channel when `mask[b]`, zeros otherwise.
/// Used as the flat-form oracle for the link-wise evaluations.
pub fn stacked_channel(user_links: &[&[Complex64]], mask: &[bool]) -> Vec<Complex64> {
    stack(user_links, Some(mask))
}

/// Stack per-transmitter beamformer blocks of one user (blocks outside the
/// serving set are zero already, so no mask applies).
pub fn stacked_beamformer(user_beams: &[&[Complex64]]) -> Vec<Complex64> {
    stack(user_beams, None)
}

fn stack(blocks: &[&[Complex64]], mask: Option<&[bool]>) -> Vec<Complex64> {
    let nt = blocks.first().map_or(0, |b| b.len());
    let mut out = vec![Complex64::new(0.0, 0.0); blocks.len() * nt];
    for (b, block) in blocks.iter().enumerate() {
        if mask.map_or(true, |m| m[b]) {
            out[b * nt..(b + 1) * nt].copy_from_slice(block);
        }
    }
    out
}
