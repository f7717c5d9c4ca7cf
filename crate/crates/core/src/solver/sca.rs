//! Two-loop solver: an outer loop that moves the linearization point and an
//! inner backend that solves each linearized subproblem to (approximate)
//! optimality at a frozen point.
//!
//! Any backend whose returned rate targets are guaranteed by its returned
//! beams yields iterates that are feasible for the original problem, so the
//! outer objective is monotone across accepted rounds: non-improving rounds
//! are rejected and terminate the loop.

use rand::Rng;

use crate::channel::ChannelSnapshot;
use crate::combinatorics::SubsetFamily;
use crate::metrics::BeamformerSet;
use crate::scenario::{SystemConfig, Topology};

use super::step::{self, Ctx};
use super::{DualState, InitStrategy, SolveOptions, SolverError, SolverResult, TraceRow};

/// Expansion point of one linearized round.
#[derive(Debug, Clone)]
pub struct ScaPoint {
    pub beams: BeamformerSet,
    pub gammas: Vec<f64>,
    /// Constraint duals carried across rounds as a warm start: rebuilding
    /// them from scratch each round repeats a long transient in which the
    /// guaranteed rates dip before the multipliers find their level.
    pub duals_a: Vec<Vec<f64>>,
}

/// What a backend hands back for one round.
#[derive(Debug, Clone)]
pub struct BackendOutcome {
    pub beams: BeamformerSet,
    /// Rate targets the returned beams are known to guarantee.
    pub gammas: Vec<f64>,
    pub duals_a: Vec<Vec<f64>>,
    pub duals_z: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

/// Opaque handle onto the frozen problem data for one round.
pub struct Subproblem<'a> {
    ctx: &'a Ctx<'a>,
    record_trace: bool,
}

/// Solves one linearized subproblem around a fixed expansion point.
pub trait SubproblemBackend {
    fn solve_subproblem(
        &self,
        problem: &Subproblem<'_>,
        point: &ScaPoint,
    ) -> Result<BackendOutcome, SolverError>;
}

/// Dual-ascent backend: the same best-response sweep as the merged solver,
/// but with the expansion point frozen and the subgradient driven by the
/// linearized (not achieved) ratios. The round hands back the iterate that
/// guarantees the highest true objective, entry point included, so a round
/// never loses ground.
#[derive(Debug, Clone)]
pub struct KktBackend {
    /// Relative improvement of the true objective that counts as progress.
    pub inner_tol: f64,
    pub max_inner: usize,
    /// Iterations without progress before the round is harvested.
    pub stall_window: usize,
}

impl Default for KktBackend {
    fn default() -> Self {
        Self {
            inner_tol: 1e-6,
            max_inner: 5000,
            stall_window: 2000,
        }
    }
}

impl SubproblemBackend for KktBackend {
    fn solve_subproblem(
        &self,
        problem: &Subproblem<'_>,
        point: &ScaPoint,
    ) -> Result<BackendOutcome, SolverError> {
        let ctx = problem.ctx;
        let gains_point = step::gain_table(ctx, &point.beams);
        let q0 = step::q_table(ctx, &gains_point, &point.gammas);
        let mut a = if point.duals_a.is_empty() {
            step::seed_duals(&ctx.weights, &point.gammas, &q0)
        } else {
            point.duals_a.clone()
        };
        step::reseed_collapsed(&ctx.weights, &mut a, &point.gammas, &q0);
        let mut beams = point.beams.clone();
        let mut gains_prev = gains_point.clone();
        let mut z = vec![0.0; ctx.num_rrus];
        let mut trace = Vec::new();
        let mut stall = 0;
        let mut iterations = 0;
        let entry_pess = step::pessimistic(&step::subset_sinrs(ctx, &gains_point));
        let mut best_true = step::objective(ctx, &entry_pess);
        let mut best = (point.beams.clone(), entry_pess);

        for inner in 1..=self.max_inner {
            let gammas_new = step::gamma_update(&ctx.weights, &a, &q0, &ctx.gamma_ub)?;
            let star = step::best_response_step(
                ctx,
                &a,
                &point.gammas,
                &gains_point,
                &beams,
                &gains_prev,
                &mut z,
            )?;
            let next = step::relax(&beams, &star, ctx.psi);
            let gains_new = step::gain_table(ctx, &next);
            let caps = step::surrogate_caps(ctx, &gains_point, &point.gammas, &q0, &gains_new);
            step::ascend_duals(&mut a, &gammas_new, &caps, ctx.beta);
            step::reseed_collapsed(&ctx.weights, &mut a, &gammas_new, &q0);

            let pess = step::pessimistic(&step::subset_sinrs(ctx, &gains_new));
            let true_obj = step::objective(ctx, &pess);
            if !true_obj.is_finite() {
                return Err(SolverError::NonFinite {
                    what: "subproblem objective",
                    iteration: inner,
                });
            }
            if true_obj > best_true + self.inner_tol * best_true.abs().max(1e-9) {
                best_true = true_obj;
                best = (next.clone(), pess);
                stall = 0;
            } else {
                if true_obj > best_true {
                    best_true = true_obj;
                    best = (next.clone(), pess);
                }
                stall += 1;
            }

            beams = next;
            gains_prev = gains_new;
            iterations = inner;

            if problem.record_trace {
                trace.push(TraceRow {
                    outer: None,
                    iteration: inner,
                    objective: true_obj,
                    max_violation: step::max_violation(&gammas_new, &caps),
                    rru_power: (0..ctx.num_rrus).map(|b| beams.rru_power(b)).collect(),
                });
            }
            if stall >= self.stall_window {
                break;
            }
        }

        let (beams, gammas) = best;
        Ok(BackendOutcome {
            beams,
            gammas,
            duals_a: a,
            duals_z: z,
            iterations,
            trace,
        })
    }
}

pub fn solve(
    channels: &ChannelSnapshot,
    topo: &Topology,
    cfg: &SystemConfig,
    init: InitStrategy,
    rng: &mut impl Rng,
    backend: &dyn SubproblemBackend,
) -> Result<SolverResult, SolverError> {
    solve_with_options(channels, topo, cfg, init, rng, backend, SolveOptions::default())
}

pub fn solve_with_options(
    channels: &ChannelSnapshot,
    topo: &Topology,
    cfg: &SystemConfig,
    init: InitStrategy,
    rng: &mut impl Rng,
    backend: &dyn SubproblemBackend,
    opts: SolveOptions,
) -> Result<SolverResult, SolverError> {
    let family = SubsetFamily::build(topo, cfg.subset_floor, cfg.num_rrus)?;
    let ctx = Ctx::build(channels, topo, &family, cfg)?;

    let (beams0, gammas0, duals0) = step::init_feasible(&ctx, init, rng);
    let mut point = ScaPoint {
        beams: beams0,
        gammas: gammas0,
        duals_a: duals0.clone(),
    };
    let mut duals_a = duals0;
    let mut duals_z = vec![0.0; ctx.num_rrus];
    let mut obj_cur = step::objective(&ctx, &point.gammas);
    let mut objective_trace = vec![obj_cur];
    let mut trace = Vec::new();
    let mut max_power_ratio = point.beams.max_power_ratio(ctx.power_w);
    let mut min_dual = duals_a
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let mut min_gamma = point.gammas.iter().copied().fold(f64::INFINITY, f64::min);
    let mut iterations = 0;
    let mut inner_total = 0;
    let mut converged = false;

    for outer in 1..=cfg.sca_max_iters {
        let problem = Subproblem {
            ctx: &ctx,
            record_trace: opts.record_trace,
        };
        let outcome = backend.solve_subproblem(&problem, &point)?;
        let obj_new = step::objective(&ctx, &outcome.gammas);
        if !obj_new.is_finite() {
            return Err(SolverError::NonFinite {
                what: "objective",
                iteration: outer,
            });
        }
        if obj_new + 1e-12 < obj_cur {
            // the round regressed; keep the current point and stop, but
            // leave the attempt in the diagnostic trace
            for mut row in outcome.trace {
                row.outer = Some(outer);
                trace.push(row);
            }
            converged = true;
            break;
        }
        point = ScaPoint {
            beams: outcome.beams,
            gammas: outcome.gammas,
            duals_a: outcome.duals_a.clone(),
        };
        duals_a = outcome.duals_a;
        duals_z = outcome.duals_z;
        iterations = outer;
        inner_total += outcome.iterations;
        objective_trace.push(obj_new);
        max_power_ratio = max_power_ratio.max(point.beams.max_power_ratio(ctx.power_w));
        if !duals_a.is_empty() {
            min_dual = min_dual
                .min(
                    duals_a
                        .iter()
                        .flatten()
                        .copied()
                        .fold(f64::INFINITY, f64::min),
                )
                .min(duals_z.iter().copied().fold(f64::INFINITY, f64::min));
        }
        min_gamma = min_gamma.min(point.gammas.iter().copied().fold(f64::INFINITY, f64::min));
        for mut row in outcome.trace {
            row.outer = Some(outer);
            trace.push(row);
        }
        let improvement = obj_new - obj_cur;
        obj_cur = obj_new;
        if improvement <= cfg.convergence_tol * obj_new.abs().max(1e-9) {
            converged = true;
            break;
        }
    }

    let gains = step::gain_table(&ctx, &point.beams);
    let final_gammas = step::pessimistic(&step::subset_sinrs(&ctx, &gains));
    Ok(SolverResult {
        beams: point.beams,
        gammas: final_gammas,
        duals: DualState {
            a: duals_a,
            z: duals_z,
        },
        objective_trace,
        trace,
        iterations,
        inner_iterations: inner_total,
        converged,
        max_power_ratio,
        min_dual,
        min_gamma,
    })
}
