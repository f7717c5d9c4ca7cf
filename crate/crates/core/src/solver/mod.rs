//! Beamformer optimization.
//!
//! Two routes to the same pessimistic weighted-rate problem:
//!
//! * [`sca::solve`] - successive convex approximation: linearize the
//!   quadratic-over-linear rate bound at the current point, solve the convex
//!   subproblem through a pluggable backend, move the point, repeat. The
//!   objective never decreases across accepted outer iterates.
//! * [`kkt::solve`] - the merged low-complexity iteration obtained by solving
//!   each subproblem's optimality conditions directly and refreshing the
//!   expansion point every iteration: closed-form per-transmitter
//!   best-response beams, a power-price bisection, and subgradient dual
//!   updates. Cheaper per iteration, oscillates mildly instead of improving
//!   monotonically.

pub mod kkt;
pub mod sca;
mod step;

use crate::channel::ChannelSnapshot;
use crate::combinatorics::{CombinatoricsError, SubsetFamily};
use crate::metrics::BeamformerSet;
use crate::scenario::{SystemConfig, Topology};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("problem shape mismatch: {0}")]
    Shape(String),
    #[error(
        "power-price search on transmitter {rru} did not converge \
         (bracket [{z_lo}, {z_hi}], power {power})"
    )]
    Bisection {
        rru: usize,
        z_lo: f64,
        z_hi: f64,
        power: f64,
    },
    #[error("all duals of user {user} collapsed to zero with positive weight")]
    DualCollapse { user: usize },
    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
}

/// How the beams start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// Per-link matched filters, each transmitter's budget split equally
    /// over its users.
    Mrt,
    /// Isotropic random directions at the same power split.
    Random,
}

/// Which solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Kkt,
    Sca,
}

///// Lagrange multipliers: `a[k][c]` for the per-subset rate constraints
/// (canonical subset order) and `z[b]` for the per-transmitter power budget.
/// Both are on the solver's internal noise-unit scale (channels divided by
/// the root noise power), which keeps their magnitudes comparable across
/// configurations with different noise floors.
#[derive(Debug, Clone, Serialize)]
pub struct DualState {
    pub a: Vec<Vec<f64>>,
    pub z: Vec<f64>,
}

/// One row of the per-iteration diagnostic trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    /// Outer iteration index for the two-loop solver; None for the merged one.
    pub outer: Option<usize>,
    pub iteration: usize,
    pub objective: f64,
    /// max over (user, subset) of assigned-minus-achieved rate ratio, clamped
    /// at zero.
    pub max_violation: f64,
    pub rru_power: Vec<f64>,
}

/// Final solver output plus run diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SolverResult {
    pub beams: BeamformerSet,
    /// Pessimistic rate ratios recomputed from the final beams (what the
    /// beams actually guarantee, not the last dual iterate).
    pub gammas: Vec<f64>,
    pub duals: DualState,
    /// Objective value per iteration (outer iteration for the two-loop
    /// solver), starting with the initial point. The merged solver records
    /// the weighted sum rate its beams guarantee under the worst surviving
    /// hypothesis; the two-loop solver records its accepted round objectives.
    pub objective_trace: Vec<f64>,
    /// Detailed rows when trace recording is on.
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    /// Watermarks over every iterate of the run, for cheap invariant audits.
    pub max_power_ratio: f64,
    pub min_dual: f64,
    pub min_gamma: f64,
}

/// Knobs that do not change the math.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub record_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { record_trace: true }
    }
}

pub(crate) use step::Ctx;

/// Feasible starting state shared by both solvers: beams at full per-RRU
/// power, rate targets set to what those beams already guarantee, and
/// strictly positive constraint duals scaled so the first dual-driven rate
/// update reproduces the starting targets.
pub fn init_feasible(
    channels: &ChannelSnapshot,
    topo: &Topology,
    cfg: &SystemConfig,
    strategy: InitStrategy,
    rng: &mut impl Rng,
) -> Result<(BeamformerSet, Vec<f64>, Vec<Vec<f64>>), SolverError> {
    let family = SubsetFamily::build(topo, cfg.subset_floor, cfg.num_rrus)?;
    let ctx = Ctx::build(channels, topo, &family, cfg)?;
    let (beams, gammas, duals) = step::init_feasible(&ctx, strategy, rng);
    Ok((beams, gammas, duals))
}
