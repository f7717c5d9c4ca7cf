//! Two-stage analog-digital front end.
//!
//! Each transmitter drives a small number of RF chains through fixed
//! phase-shifter beams picked from a steering codebook, and the digital
//! solver then runs unchanged on the reduced effective channels. Either
//! every user gets its own best codebook beam (one chain per user) or a
//! single chain carries a compromise beam superimposing all of them.
//!
//! The digital solver constrains the plain squared norm of its beams, but
//! the power leaving the array is ‖W_b·f‖² and the selected columns of W_b
//! are not orthogonal in general. The stage therefore hands the solver the
//! channels seen through B_b = W_b·U·diag(λ)^{-1/2}, built from the
//! eigendecomposition W_b^H W_b = U·diag(λ)·U^H, so that ‖B_b·g‖² = ‖g‖²
//! on the retained span and the digital budget is exactly the radiated
//! budget. Gram directions with λ below 1e-12 of the largest (duplicate
//! beam selections) are dropped: their digital coordinate sees a zero
//! channel and radiates nothing.

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::channel::{steering_vector, ChannelSet, ChannelSnapshot, LinkChannel};
use crate::linalg::{axpy, inner, norm_sq, HermitianFactor};
use crate::metrics::BeamformerSet;
use crate::scenario::{SystemConfig, Topology};
use crate::solver::{kkt, sca, InitStrategy, SolverError, SolverKind, SolverResult};

/// Codebook entries when nothing else is asked for.
pub const DEFAULT_CODEBOOK_SIZE: usize = 32;

/// Gram eigenvalues below this fraction of the largest count as dead chains.
const GRAM_RANK_CUTOFF: f64 = 1e-12;

/// How far the Gram matrix may sit from the identity before whitening is
/// worth the extra rounding of an eigendecomposition.
const GRAM_IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum HybridError {
    #[error("analog codebook is empty")]
    EmptyCodebook,
    #[error("codebook beam {index} has {got} antenna weights, expected {want}")]
    BeamLength {
        index: usize,
        want: usize,
        got: usize,
    },
    #[error("codebook beam {index} has zero norm")]
    ZeroBeam { index: usize },
    #[error("one chain per user needs {users} chains, got {n_rf}")]
    TooFewChains { users: usize, n_rf: usize },
    #[error("a compromise stage drives a single chain, got {n_rf}")]
    CompromiseChains { n_rf: usize },
    #[error("per-user best beams superimpose to zero")]
    CancelledCompromise,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Fixed set of unit-norm analog beams the phase shifters can form.
#[derive(Debug, Clone)]
pub struct AnalogCodebook {
    nt: usize,
    beams: Vec<Vec<Complex64>>,
}

impl AnalogCodebook {
    /// Steering beams at `size` directions uniform in sin-angle across the
    /// front half-plane. Directions sit at cell centers, so the two
    /// endpoint beams (which a uniform linear array cannot tell apart)
    /// never both appear.
    pub fn steering_grid(nt: usize, size: usize) -> Self {
        assert!(nt > 0 && size > 0);
        let beams = (0..size)
            .map(|m| {
                let s = (2 * m + 1) as f64 / size as f64 - 1.0;
                steering_vector(s.asin(), nt)
            })
            .collect();
        Self { nt, beams }
    }

    /// The default-size steering grid.
    pub fn default_for(nt: usize) -> Self {
        Self::steering_grid(nt, DEFAULT_CODEBOOK_SIZE)
    }

    /// Wrap explicit beams, normalizing each to unit length.
    pub fn from_beams(beams: Vec<Vec<Complex64>>) -> Result<Self, HybridError> {
        let nt = match beams.first() {
            Some(b) => b.len(),
            None => return Err(HybridError::EmptyCodebook),
        };
        let mut out = Vec::with_capacity(beams.len());
        for (index, mut beam) in beams.into_iter().enumerate() {
            if beam.len() != nt {
                return Err(HybridError::BeamLength {
                    index,
                    want: nt,
                    got: beam.len(),
                });
            }
            let norm = norm_sq(&beam).sqrt();
            if norm <= f64::MIN_POSITIVE {
                return Err(HybridError::ZeroBeam { index });
            }
            for v in &mut beam {
                *v /= norm;
            }
            out.push(beam);
        }
        Ok(Self { nt, beams: out })
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn beam(&self, m: usize) -> &[Complex64] {
        &self.beams[m]
    }
}

/// How the analog stage spends its RF chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalogMode {
    /// One chain per user, each driving that user's best codebook beam;
    /// chains beyond the user count drive the lowest-index unselected
    /// entries.
    PerUser,
    /// A single chain driving the normalized superposition of every user's
    /// best beam.
    Compromise,
}

#[derive(Debug, Clone, Copy)]
pub struct HybridConfig {
    /// RF chains per transmitter.
    pub n_rf: usize,
    pub mode: AnalogMode,
}

impl HybridConfig {
    pub fn per_user(n_rf: usize) -> Self {
        Self {
            n_rf,
            mode: AnalogMode::PerUser,
        }
    }

    pub fn compromise() -> Self {
        Self {
            n_rf: 1,
            mode: AnalogMode::Compromise,
        }
    }

    pub fn validate(&self, num_users: usize) -> Result<(), HybridError> {
        match self.mode {
            AnalogMode::PerUser if self.n_rf < num_users => Err(HybridError::TooFewChains {
                users: num_users,
                n_rf: self.n_rf,
            }),
            AnalogMode::Compromise if self.n_rf != 1 => Err(HybridError::CompromiseChains {
                n_rf: self.n_rf,
            }),
            _ => Ok(()),
        }
    }
}

/// Codebook entry with the largest beamforming gain |h^H v|² on this
/// channel; ties go to the lowest index.
pub fn select_beam<'a>(h: &[Complex64], book: &'a AnalogCodebook) -> (usize, &'a [Complex64]) {
    assert_eq!(h.len(), book.nt);
    let mut best = 0;
    let mut best_gain = inner(h, book.beam(0)).norm_sqr();
    for m in 1..book.len() {
        let gain = inner(h, book.beam(m)).norm_sqr();
        if gain > best_gain {
            best = m;
            best_gain = gain;
        }
    }
    (best, book.beam(best))
}

/// Normalized superposition of each user's best codebook entry, given the
/// effective channels of every user at one transmitter.
///
/// Errors when the best beams cancel exactly; the stage builder falls back
/// to the first user's beam in that case.
pub fn compromise_beam(
    channels: &[Vec<Complex64>],
    book: &AnalogCodebook,
) -> Result<Vec<Complex64>, HybridError> {
    let mut sum = vec![Complex64::new(0.0, 0.0); book.nt];
    for h in channels {
        let (_, beam) = select_beam(h, book);
        for (s, b) in sum.iter_mut().zip(beam) {
            *s += b;
        }
    }
    let norm = norm_sq(&sum).sqrt();
    if norm <= f64::MIN_POSITIVE {
        return Err(HybridError::CancelledCompromise);
    }
    for v in &mut sum {
        *v /= norm;
    }
    Ok(sum)
}

/// Analog front end fixed for one drop: per transmitter, the unit-norm
/// codebook columns its chains drive and the power-whitened composition map
/// the digital stage works through.
#[derive(Debug, Clone)]
pub struct AnalogStage {
    nt: usize,
    n_rf: usize,
    /// `columns[b][c]` is the beam on chain c of transmitter b.
    columns: Vec<Vec<Vec<Complex64>>>,
    /// `basis[b]` maps digital coordinates to antenna weights: nt × n_rf,
    /// column-major. Equal to the columns when they are orthonormal.
    basis: Vec<Vec<Complex64>>,
}

impl AnalogStage {
    /// Pick every transmitter's analog beams from the estimation-side
    /// effective channels and fix the stage.
    ///
    /// With a compromise stage whose best beams cancel exactly, the
    /// transmitter falls back to its first user's beam.
    pub fn build(
        est: &ChannelSnapshot,
        hcfg: HybridConfig,
        book: &AnalogCodebook,
    ) -> Result<Self, HybridError> {
        hcfg.validate(est.num_users)?;
        assert_eq!(book.nt, est.nt, "codebook sized for a different array");
        let mut columns = Vec::with_capacity(est.num_rrus);
        for b in 0..est.num_rrus {
            let locals: Vec<Vec<Complex64>> = (0..est.num_users)
                .map(|k| est.link(b, k).effective())
                .collect();
            columns.push(match hcfg.mode {
                AnalogMode::PerUser => per_user_columns(&locals, book, hcfg.n_rf),
                AnalogMode::Compromise => {
                    let beam = compromise_beam(&locals, book).unwrap_or_else(|_| {
                        let (_, first) = select_beam(&locals[0], book);
                        first.to_vec()
                    });
                    vec![beam]
                }
            });
        }
        let basis = columns.iter().map(|cols| whiten(cols, est.nt)).collect();
        Ok(Self {
            nt: est.nt,
            n_rf: hcfg.n_rf,
            columns,
            basis,
        })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn n_rf(&self) -> usize {
        self.n_rf
    }

    /// The analog beam on chain c of transmitter b.
    pub fn column(&self, b: usize, c: usize) -> &[Complex64] {
        &self.columns[b][c]
    }

    /// Antenna weights a unit digital coefficient on chain coordinate j of
    /// transmitter b produces.
    pub fn basis_column(&self, b: usize, j: usize) -> &[Complex64] {
        &self.basis[b][j * self.nt..(j + 1) * self.nt]
    }

    /// The channels the digital stage sees through this front end.
    pub fn reduce(&self, snap: &ChannelSnapshot) -> ChannelSnapshot {
        assert_eq!(snap.nt, self.nt);
        assert_eq!(snap.num_rrus, self.columns.len());
        let mut links = Vec::with_capacity(snap.num_rrus * snap.num_users);
        for b in 0..snap.num_rrus {
            for k in 0..snap.num_users {
                let link = snap.link(b, k);
                links.push(LinkChannel {
                    los: self.adjoint(b, &link.los),
                    nlos: self.adjoint(b, &link.nlos),
                    los_blocked: link.los_blocked,
                    distance_m: link.distance_m,
                });
            }
        }
        ChannelSnapshot::from_links(snap.num_rrus, snap.num_users, self.n_rf, links)
    }

    /// Lift reduced digital beams back to full antenna weights.
    pub fn compose(&self, digital: &BeamformerSet) -> BeamformerSet {
        assert_eq!(digital.nt, self.n_rf);
        assert_eq!(digital.num_rrus, self.columns.len());
        let mut full = BeamformerSet::zeros(digital.num_rrus, digital.num_users, self.nt);
        for b in 0..digital.num_rrus {
            for k in 0..digital.num_users {
                let g = digital.beam(b, k);
                let out = full.beam_mut(b, k);
                for j in 0..self.n_rf {
                    axpy(g[j], self.basis_column(b, j), out);
                }
            }
        }
        full
    }

    /// B_b^H · v.
    fn adjoint(&self, b: usize, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n_rf)
            .map(|j| inner(self.basis_column(b, j), v))
            .collect()
    }
}

/// Each user's best beam in user order, then the lowest-index entries not
/// selected by anyone until n_rf columns are filled. If the book runs out
/// (more chains than entries), the leftover chains stay dark.
fn per_user_columns(
    locals: &[Vec<Complex64>],
    book: &AnalogCodebook,
    n_rf: usize,
) -> Vec<Vec<Complex64>> {
    let mut taken = vec![false; book.len()];
    let mut cols = Vec::with_capacity(n_rf);
    for h in locals {
        let (m, beam) = select_beam(h, book);
        taken[m] = true;
        cols.push(beam.to_vec());
    }
    let mut next = 0;
    while cols.len() < n_rf {
        match (next..book.len()).find(|&m| !taken[m]) {
            Some(m) => {
                taken[m] = true;
                next = m + 1;
                cols.push(book.beam(m).to_vec());
            }
            None => cols.push(vec![Complex64::new(0.0, 0.0); book.nt]),
        }
    }
    cols
}

/// Composition map with the power identity built in: columns C go to
/// C·U·diag(λ)^{-1/2} from the Gram eigendecomposition C^H C = U·diag(λ)·U^H,
/// so a digital vector's norm equals its radiated norm. Near-identity Grams
/// (orthonormal columns) short-circuit to C itself, and dead Gram directions
/// become all-zero map columns. Returns nt × n_rf column-major.
fn whiten(cols: &[Vec<Complex64>], nt: usize) -> Vec<Complex64> {
    let n = cols.len();
    let mut gram = vec![Complex64::new(0.0, 0.0); n * n];
    let mut identity = true;
    for i in 0..n {
        for j in 0..n {
            let g = inner(&cols[i], &cols[j]);
            let target = if i == j { 1.0 } else { 0.0 };
            if (g - target).norm() > GRAM_IDENTITY_TOL {
                identity = false;
            }
            gram[i * n + j] = g;
        }
    }
    let mut basis = vec![Complex64::new(0.0, 0.0); nt * n];
    if identity {
        for (j, col) in cols.iter().enumerate() {
            basis[j * nt..(j + 1) * nt].copy_from_slice(col);
        }
        return basis;
    }
    let factor = HermitianFactor::new(n, |r, c| gram[r * n + c]);
    let lambda_max = factor.values().iter().fold(0.0, |a: f64, &b| a.max(b));
    if lambda_max <= 0.0 {
        return basis;
    }
    for j in 0..n {
        let lambda = factor.values()[j];
        if lambda <= lambda_max * GRAM_RANK_CUTOFF {
            continue;
        }
        let u = factor.column(j);
        let scale = 1.0 / lambda.sqrt();
        let out = &mut basis[j * nt..(j + 1) * nt];
        for (m, col) in cols.iter().enumerate() {
            axpy(u[m] * scale, col, out);
        }
    }
    basis
}

/// Fix the analog stage from the estimation snapshot, run the chosen digital
/// solver unchanged on the reduced channels, and return its result with the
/// beams composed back to full antenna weights, ready for transmission-side
/// evaluation against the unreduced channels.
///
/// Everything else in the result is the digital solve's own: composition
/// changes neither the received signals nor the per-transmitter powers, so
/// the rate ratios, duals, and power watermarks carry over as they are.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_solve(
    channels: &ChannelSet,
    topo: &Topology,
    cfg: &SystemConfig,
    hcfg: HybridConfig,
    book: &AnalogCodebook,
    solver: SolverKind,
    init: InitStrategy,
    rng: &mut impl Rng,
) -> Result<SolverResult, HybridError> {
    let stage = AnalogStage::build(&channels.estimation, hcfg, book)?;
    let reduced = stage.reduce(&channels.estimation);
    let mut result = match solver {
        SolverKind::Kkt => kkt::solve(&reduced, topo, cfg, init, rng)?,
        SolverKind::Sca => {
            let backend = sca::KktBackend::default();
            sca::solve(&reduced, topo, cfg, init, rng, &backend)?
        }
    };
    result.beams = stage.compose(&result.beams);
    Ok(result)
}
