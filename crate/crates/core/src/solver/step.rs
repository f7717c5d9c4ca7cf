//! Shared machinery for the beamformer iterations: per-subset gain tables,
//! dual-driven rate targets, the per-transmitter best response with its
//! power-price search, and the subgradient dual steps.
//!
//! The interference matrix inside each best response is a sum of at most
//! K-1 outer products, so it is solved through the Gram matrix of the
//! weighted interfering channels. Each power-price probe then costs O(K)
//! instead of a fresh Nt x Nt factorization.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelSnapshot;
use crate::combinatorics::SubsetFamily;
use crate::linalg::{axpy, inner, norm_sq, HermitianFactor};
use crate::metrics::BeamformerSet;
use crate::rng::standard_complex;
use crate::scenario::{SystemConfig, Topology};

use super::{InitStrategy, SolverError};

/// Ridge substituted for a zero denominator when a shifted system is solved
/// at z = 0 with a numerically singular matrix.
pub(crate) const SPECTRAL_RIDGE: f64 = 1e-12;

/// Weight floor used when seeding constraint duals, so zero-weight users
/// still start with strictly positive multipliers.
pub(crate) const DUAL_SEED_FLOOR: f64 = 1e-8;

/// Immutable problem data shared by every iteration of a solve.
///
/// Channels are held in noise units (scaled by 1/sigma, with the noise power
/// set to 1). SINRs, rates, and the power constraint are invariant under
/// this change of units; it exists so that the fixed subgradient and
/// best-response steps act on well-scaled duals regardless of the absolute
/// noise floor.
pub(crate) struct Ctx<'a> {
    pub family: &'a SubsetFamily,
    pub num_rrus: usize,
    pub num_users: usize,
    pub nt: usize,
    /// Effective channel of link (b, k) at `h[b * num_users + k]`,
    /// in noise units.
    pub h: Vec<Vec<Complex64>>,
    pub users_of_rru: Vec<Vec<usize>>,
    pub sigma2: f64,
    pub power_w: f64,
    pub weights: Vec<f64>,
    /// Per-user full-coherence SNR bound: no subset SINR can exceed it,
    /// so dual-driven rate targets are clamped to this box.
    pub gamma_ub: Vec<f64>,
    pub beta: f64,
    pub psi: f64,
    pub bisection_tol: f64,
}

impl<'a> Ctx<'a> {
    pub fn build(
        channels: &ChannelSnapshot,
        topo: &Topology,
        family: &'a SubsetFamily,
        cfg: &SystemConfig,
    ) -> Result<Self, SolverError> {
        let num_rrus = channels.num_rrus;
        let num_users = channels.num_users;
        if topo.rru_positions.len() != num_rrus || topo.user_positions.len() != num_users {
            return Err(SolverError::Shape(format!(
                "topology is {}x{} but channels are {}x{}",
                topo.rru_positions.len(),
                topo.user_positions.len(),
                num_rrus,
                num_users
            )));
        }
        if family.per_user.len() != num_users {
            return Err(SolverError::Shape(format!(
                "subset family covers {} users, channels have {}",
                family.per_user.len(),
                num_users
            )));
        }
        let weights = if cfg.user_weights.is_empty() {
            vec![1.0; num_users]
        } else if cfg.user_weights.len() == num_users {
            cfg.user_weights.clone()
        } else {
            return Err(SolverError::Shape(format!(
                "{} user weights for {} users",
                cfg.user_weights.len(),
                num_users
            )));
        };
        let inv_sigma = 1.0 / cfg.noise_power_w().sqrt();
        let mut h = channels.effective_all();
        for link in &mut h {
            for v in link.iter_mut() {
                *v *= inv_sigma;
            }
        }
        let power_w = cfg.tx_power_w();
        let gamma_ub = (0..num_users)
            .map(|k| {
                let amp: f64 = topo.serving_sets[k]
                    .iter()
                    .map(|&b| norm_sq(&h[b * num_users + k]).sqrt())
                    .sum();
                power_w * amp * amp
            })
            .collect();
        Ok(Self {
            family,
            num_rrus,
            num_users,
            nt: channels.nt,
            h,
            users_of_rru: topo.users_of_rru(num_rrus),
            sigma2: 1.0,
            power_w,
            weights,
            gamma_ub,
            beta: cfg.subgrad_step,
            psi: cfg.best_response_step,
            bisection_tol: cfg.bisection_tol,
        })
    }

    pub fn h(&self, b: usize, k: usize) -> &[Complex64] {
        &self.h[b * self.num_users + k]
    }

    pub fn subset_count(&self, k: usize) -> usize {
        self.family.per_user[k].len()
    }
}

/// Coherent gains s(k, c, u) = Σ_b mask_{k,c}[b] · h_{b,k}^H f_{b,u}:
/// what user k's channel picks up from user u's beams under survival
/// hypothesis c. Everything the iterations need about a beam set.
#[derive(Debug, Clone)]
pub(crate) struct GainTable {
    num_users: usize,
    /// `per_user[k]` is row-major (subset, beam user).
    per_user: Vec<Vec<Complex64>>,
}

impl GainTable {
    pub fn s(&self, k: usize, c: usize, u: usize) -> Complex64 {
        self.per_user[k][c * self.num_users + u]
    }
}

/// Per-transmitter inner products p(b, j, u) = h_{b,j}^H f_{b,u}, nonzero
/// only where transmitter b serves user u.
pub(crate) fn pair_gains(ctx: &Ctx, beams: &BeamformerSet) -> Vec<Complex64> {
    let kk = ctx.num_users;
    let mut p = vec![Complex64::new(0.0, 0.0); ctx.num_rrus * kk * kk];
    for b in 0..ctx.num_rrus {
        for &u in &ctx.users_of_rru[b] {
            for j in 0..kk {
                p[(b * kk + j) * kk + u] = inner(ctx.h(b, j), beams.beam(b, u));
            }
        }
    }
    p
}

pub(crate) fn gain_table(ctx: &Ctx, beams: &BeamformerSet) -> GainTable {
    let kk = ctx.num_users;
    let pairs = pair_gains(ctx, beams);
    let per_user = (0..kk)
        .map(|k| {
            let entries = &ctx.family.per_user[k];
            let mut rows = vec![Complex64::new(0.0, 0.0); entries.len() * kk];
            for (c, entry) in entries.iter().enumerate() {
                for b in 0..ctx.num_rrus {
                    if entry.mask[b] {
                        for u in 0..kk {
                            rows[c * kk + u] += pairs[(b * kk + k) * kk + u];
                        }
                    }
                }
            }
            rows
        })
        .collect();
    GainTable {
        num_users: kk,
        per_user,
    }
}

/// Curvature q(k, c) = (σ² + Σ_u |s(k,c,u)|²) / (1 + γ_k)² of the linearized
/// rate bound at the expansion point described by (gains, gammas).
pub(crate) fn q_table(ctx: &Ctx, gains: &GainTable, gammas: &[f64]) -> Vec<Vec<f64>> {
    (0..ctx.num_users)
        .map(|k| {
            let denom = (1.0 + gammas[k]).powi(2);
            (0..ctx.subset_count(k))
                .map(|c| {
                    let power: f64 = (0..ctx.num_users)
                        .map(|u| gains.s(k, c, u).norm_sqr())
                        .sum();
                    (ctx.sigma2 + power) / denom
                })
                .collect()
        })
        .collect()
}

/// Achieved rate ratio per (user, survival hypothesis).
pub(crate) fn subset_sinrs(ctx: &Ctx, gains: &GainTable) -> Vec<Vec<f64>> {
    (0..ctx.num_users)
        .map(|k| {
            (0..ctx.subset_count(k))
                .map(|c| {
                    let mut interf = ctx.sigma2;
                    for u in 0..ctx.num_users {
                        if u != k {
                            interf += gains.s(k, c, u).norm_sqr();
                        }
                    }
                    gains.s(k, c, k).norm_sqr() / interf
                })
                .collect()
        })
        .collect()
}

/// Worst hypothesis per user.
pub(crate) fn pessimistic(sinrs: &[Vec<f64>]) -> Vec<f64> {
    sinrs
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect()
}

/// Dual-driven rate target: γ_k = max(0, w_k / Σ_c a_{k,c} q_{k,c} - 1),
/// clamped to the per-user bound `ub`. No achievable SINR exceeds the bound,
/// so the clamp never cuts off a feasible target; it keeps the target finite
/// while the multipliers are still catching up with an infeasible one.
/// Zero-weight users get zero. A positive-weight user whose multipliers have
/// all collapsed to exactly zero leaves the target undefined.
pub(crate) fn gamma_update(
    weights: &[f64],
    a: &[Vec<f64>],
    q: &[Vec<f64>],
    ub: &[f64],
) -> Result<Vec<f64>, SolverError> {
    weights
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            if w == 0.0 {
                return Ok(0.0);
            }
            let denom: f64 = a[k].iter().zip(&q[k]).map(|(ai, qi)| ai * qi).sum();
            if denom <= 0.0 {
                return Err(SolverError::DualCollapse { user: k });
            }
            Ok((w / denom - 1.0).max(0.0).min(ub[k]))
        })
        .collect()
}

/// Projected subgradient step a ← max(0, a + step·(γ - cap)).
pub(crate) fn ascend_duals(a: &mut [Vec<f64>], gammas: &[f64], caps: &[Vec<f64>], step: f64) {
    for (row, (&g, cap_row)) in a.iter_mut().zip(gammas.iter().zip(caps)) {
        for (ai, &cap) in row.iter_mut().zip(cap_row) {
            *ai = (*ai + step * (g - cap)).max(0.0);
        }
    }
}

/// Strictly positive multipliers sized so the first dual-driven target
/// reproduces `gammas`: a_{k,c} = w̃_k / ((1 + γ_k) · C_k · q_{k,c}).
pub(crate) fn seed_duals(weights: &[f64], gammas: &[f64], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    weights
        .iter()
        .zip(gammas.iter().zip(q))
        .map(|(&w, (&g, q_row))| {
            let scale = w.max(DUAL_SEED_FLOOR) / ((1.0 + g) * q_row.len() as f64);
            q_row.iter().map(|&qi| scale / qi).collect()
        })
        .collect()
}

/// Re-seed any positive-weight user whose multiplier row clamped to all
/// zeros, which would otherwise leave the next rate target undefined.
pub(crate) fn reseed_collapsed(
    weights: &[f64],
    a: &mut [Vec<f64>],
    gammas: &[f64],
    q: &[Vec<f64>],
) {
    for k in 0..weights.len() {
        if weights[k] > 0.0 && a[k].iter().all(|&ai| ai == 0.0) {
            let scale = weights[k] / ((1.0 + gammas[k]) * a[k].len() as f64);
            for (ai, &qi) in a[k].iter_mut().zip(&q[k]) {
                *ai = scale / qi;
            }
        }
    }
}

/// Largest assigned-minus-achieved gap over all (user, hypothesis) pairs,
/// clamped at zero.
pub(crate) fn max_violation(gammas: &[f64], sinrs: &[Vec<f64>]) -> f64 {
    gammas
        .iter()
        .zip(sinrs)
        .flat_map(|(&g, row)| row.iter().map(move |&s| g - s))
        .fold(0.0, f64::max)
}

/// Rate targets γ solving the linearized bound with equality for a given
/// beam set: cap(k, c) = γ_k° + (A - I) / q°, where A is the linearization
/// of the potential at the expansion point evaluated at the new gains and I
/// is the new interference-plus-noise. The bound holds iff γ_k ≤ cap(k, c).
pub(crate) fn surrogate_caps(
    ctx: &Ctx,
    gains_point: &GainTable,
    gammas_point: &[f64],
    q_point: &[Vec<f64>],
    gains_new: &GainTable,
) -> Vec<Vec<f64>> {
    (0..ctx.num_users)
        .map(|k| {
            let denom = 1.0 + gammas_point[k];
            (0..ctx.subset_count(k))
                .map(|c| {
                    let mut cross = 0.0;
                    let mut interf = ctx.sigma2;
                    for u in 0..ctx.num_users {
                        let s0 = gains_point.s(k, c, u);
                        let s1 = gains_new.s(k, c, u);
                        cross += 2.0 * (s0.conj() * (s1 - s0)).re;
                        if u != k {
                            interf += s1.norm_sqr();
                        }
                    }
                    let q0 = q_point[k][c];
                    let linearized = cross / denom + q0 * denom;
                    gammas_point[k] + (linearized - interf) / q0
                })
                .collect()
        })
        .collect()
}

/// Multiplier-weighted interference mass w(b, u) = Σ_c a_{u,c} mask_{u,c}[b].
pub(crate) fn dual_weights(ctx: &Ctx, a: &[Vec<f64>]) -> Vec<f64> {
    let kk = ctx.num_users;
    let mut w = vec![0.0; ctx.num_rrus * kk];
    for u in 0..kk {
        for (c, entry) in ctx.family.per_user[u].iter().enumerate() {
            let au = a[u][c];
            if au == 0.0 {
                continue;
            }
            for b in 0..ctx.num_rrus {
                if entry.mask[b] {
                    w[b * kk + u] += au;
                }
            }
        }
    }
    w
}

/// Multiplier-collapsed gain sums A(b, j, u) = Σ_c a_{j,c} mask_{j,c}[b] s(j, c, u).
fn interaction_table(ctx: &Ctx, a: &[Vec<f64>], gains: &GainTable) -> Vec<Complex64> {
    let kk = ctx.num_users;
    let mut t = vec![Complex64::new(0.0, 0.0); ctx.num_rrus * kk * kk];
    for j in 0..kk {
        for (c, entry) in ctx.family.per_user[j].iter().enumerate() {
            let aj = a[j][c];
            if aj == 0.0 {
                continue;
            }
            for b in 0..ctx.num_rrus {
                if entry.mask[b] {
                    for u in 0..kk {
                        t[(b * kk + j) * kk + u] += aj * gains.s(j, c, u);
                    }
                }
            }
        }
    }
    t
}

/// Spectral form of A = Σ_i c_i c_i^H through the Gram matrix of its
/// columns: only the nonzero eigenpairs are materialized, so probes and
/// solves of (z·I + A) x = t stay cheap while A's rank is small.
pub(crate) struct ShiftedOuterSum {
    dim: usize,
    /// Strictly positive eigenvalues.
    values: Vec<f64>,
    /// Matching orthonormal eigenvectors, column-major dim x values.len().
    vectors: Vec<Complex64>,
}

/// Coordinates of a right-hand side against a `ShiftedOuterSum`.
pub(crate) struct OuterProjection {
    /// Components along the stored eigenvectors.
    coeffs: Vec<Complex64>,
    /// Null-space remainder of the right-hand side.
    residual: Vec<Complex64>,
    residual_norm_sq: f64,
}

impl ShiftedOuterSum {
    pub fn new(dim: usize, cols: &[Vec<Complex64>]) -> Self {
        let r = cols.len();
        if r == 0 {
            return Self {
                dim,
                values: Vec::new(),
                vectors: Vec::new(),
            };
        }
        let gram = HermitianFactor::new(r, |i, j| inner(&cols[i], &cols[j]));
        let lambda_max = gram.values().iter().copied().fold(0.0, f64::max);
        let cutoff = lambda_max * 1e-14;
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        for i in 0..r {
            let mu = gram.values()[i];
            if mu <= cutoff {
                continue;
            }
            // lift the small eigenvector v to u = (1/sqrt(mu)) Σ_j v_j col_j
            let v = gram.column(i);
            let mut u = vec![Complex64::new(0.0, 0.0); dim];
            for (j, col) in cols.iter().enumerate() {
                axpy(v[j] / mu.sqrt(), col, &mut u);
            }
            values.push(mu);
            vectors.extend_from_slice(&u);
        }
        Self {
            dim,
            values,
            vectors,
        }
    }

    fn column(&self, i: usize) -> &[Complex64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn project(&self, t: &[Complex64]) -> OuterProjection {
        let coeffs: Vec<Complex64> = (0..self.values.len())
            .map(|i| inner(self.column(i), t))
            .collect();
        let mut residual = t.to_vec();
        for (i, c) in coeffs.iter().enumerate() {
            axpy(-*c, self.column(i), &mut residual);
        }
        let mut residual_norm_sq = norm_sq(&residual);
        // a remainder at rounding-noise level is a zero, not a direction
        if residual_norm_sq <= 1e-24 * norm_sq(t) {
            residual.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            residual_norm_sq = 0.0;
        }
        OuterProjection {
            coeffs,
            residual,
            residual_norm_sq,
        }
    }

    /// ‖(z·I + A)^{-1} t‖² without forming the solution.
    pub fn solution_power(&self, proj: &OuterProjection, z: f64) -> f64 {
        let zr = z.max(SPECTRAL_RIDGE);
        let spanned: f64 = proj
            .coeffs
            .iter()
            .zip(&self.values)
            .map(|(c, &mu)| c.norm_sqr() / ((mu + z) * (mu + z)))
            .sum();
        spanned + proj.residual_norm_sq / (zr * zr)
    }

    pub fn solve(&self, proj: &OuterProjection, z: f64) -> Vec<Complex64> {
        let zr = z.max(SPECTRAL_RIDGE);
        let mut x = vec![Complex64::new(0.0, 0.0); self.dim];
        for ((c, &mu), i) in proj.coeffs.iter().zip(&self.values).zip(0..) {
            axpy(*c / (mu + z), self.column(i), &mut x);
        }
        for (xi, ri) in x.iter_mut().zip(&proj.residual) {
            *xi += ri / zr;
        }
        x
    }
}

/// Beams solving the per-transmitter optimality system at the smallest
/// budget-respecting power price, plus that price.
pub(crate) struct RruSolve {
    pub z: f64,
    /// (user, beam) for each user served by the transmitter.
    pub beams: Vec<(usize, Vec<Complex64>)>,
}

pub(crate) fn best_response_rru(
    ctx: &Ctx,
    b: usize,
    w: &[f64],
    t_vecs: &[(usize, Vec<Complex64>)],
    warm_z: f64,
) -> Result<RruSolve, SolverError> {
    let kk = ctx.num_users;
    let systems: Vec<(ShiftedOuterSum, OuterProjection)> = t_vecs
        .iter()
        .map(|(k, t)| {
            let cols: Vec<Vec<Complex64>> = (0..kk)
                .filter(|&u| u != *k && w[b * kk + u] > 0.0)
                .map(|u| {
                    let scale = w[b * kk + u].sqrt();
                    ctx.h(b, u).iter().map(|&x| x * scale).collect()
                })
                .collect();
            let sum = ShiftedOuterSum::new(ctx.nt, &cols);
            let proj = sum.project(t);
            (sum, proj)
        })
        .collect();

    let power_at = |z: f64| -> f64 {
        systems
            .iter()
            .map(|(sum, proj)| sum.solution_power(proj, z))
            .sum()
    };

    let cap = ctx.power_w;
    let tol = ctx.bisection_tol;
    let z = if power_at(0.0) <= cap {
        0.0
    } else {
        let mut z_lo = 0.0;
        let mut z_hi = warm_z.max(1.0);
        let mut grow = 0;
        while power_at(z_hi) > cap {
            z_lo = z_hi;
            z_hi *= 2.0;
            grow += 1;
            if grow > 200 {
                return Err(SolverError::Bisection {
                    rru: b,
                    z_lo,
                    z_hi,
                    power: power_at(z_hi),
                });
            }
        }
        let mut found = None;
        for _ in 0..200 {
            let mid = 0.5 * (z_lo + z_hi);
            let p = power_at(mid);
            if (p - cap).abs() <= tol * cap {
                found = Some(mid);
                break;
            }
            if p > cap {
                z_lo = mid;
            } else {
                z_hi = mid;
            }
            if z_hi - z_lo <= f64::EPSILON * z_hi {
                // interval exhausted; the upper end is the feasible side
                found = Some(z_hi);
                break;
            }
        }
        match found {
            Some(z) => z,
            None => {
                return Err(SolverError::Bisection {
                    rru: b,
                    z_lo,
                    z_hi,
                    power: power_at(0.5 * (z_lo + z_hi)),
                })
            }
        }
    };

    let beams = t_vecs
        .iter()
        .zip(&systems)
        .map(|((k, _), (sum, proj))| (*k, sum.solve(proj, z)))
        .collect();
    Ok(RruSolve { z, beams })
}

/// One full best-response sweep: assemble each served user's target vector
/// from the multiplier-collapsed tables and solve every transmitter's
/// optimality system. `gains_point`/`gammas_point` describe the expansion
/// point of the linearized bound; `beams_prev`/`gains_prev` the iterate the
/// interference is pinned to. Returns the unrelaxed best response and
/// refreshes `z_warm` with the power prices found.
pub(crate) fn best_response_step(
    ctx: &Ctx,
    a: &[Vec<f64>],
    gammas_point: &[f64],
    gains_point: &GainTable,
    beams_prev: &BeamformerSet,
    gains_prev: &GainTable,
    z_warm: &mut [f64],
) -> Result<BeamformerSet, SolverError> {
    let kk = ctx.num_users;
    let w = dual_weights(ctx, a);
    let a_point = interaction_table(ctx, a, gains_point);
    let a_prev = if std::ptr::eq(gains_point, gains_prev) {
        None
    } else {
        Some(interaction_table(ctx, a, gains_prev))
    };
    let a_prev = a_prev.as_deref().unwrap_or(&a_point);
    let pairs_prev = pair_gains(ctx, beams_prev);

    let mut star = BeamformerSet::zeros(ctx.num_rrus, kk, ctx.nt);
    for b in 0..ctx.num_rrus {
        if ctx.users_of_rru[b].is_empty() {
            continue;
        }
        let t_vecs: Vec<(usize, Vec<Complex64>)> = ctx.users_of_rru[b]
            .iter()
            .map(|&k| {
                let mut t = vec![Complex64::new(0.0, 0.0); ctx.nt];
                for j in 0..kk {
                    let signal = a_point[(b * kk + j) * kk + k] / (1.0 + gammas_point[j]);
                    let leak = if j == k {
                        Complex64::new(0.0, 0.0)
                    } else {
                        a_prev[(b * kk + j) * kk + k]
                            - w[b * kk + j] * pairs_prev[(b * kk + j) * kk + k]
                    };
                    axpy(signal - leak, ctx.h(b, j), &mut t);
                }
                (k, t)
            })
            .collect();
        let solved = best_response_rru(ctx, b, &w, &t_vecs, z_warm[b])?;
        z_warm[b] = solved.z;
        for (k, beam) in solved.beams {
            star.beam_mut(b, k).copy_from_slice(&beam);
        }
    }
    Ok(star)
}

/// Damped move f ← f + ψ (f* - f).
pub(crate) fn relax(prev: &BeamformerSet, star: &BeamformerSet, psi: f64) -> BeamformerSet {
    let mut next = prev.clone();
    for b in 0..prev.num_rrus {
        for k in 0..prev.num_users {
            let s = star.beam(b, k).to_vec();
            for (n, si) in next.beam_mut(b, k).iter_mut().zip(s) {
                *n += psi * (si - *n);
            }
        }
    }
    next
}

/// Full-budget starting beams, the rate targets they already guarantee, and
/// matching strictly positive multipliers.
pub(crate) fn init_feasible(
    ctx: &Ctx,
    strategy: InitStrategy,
    rng: &mut impl Rng,
) -> (BeamformerSet, Vec<f64>, Vec<Vec<f64>>) {
    let mut beams = BeamformerSet::zeros(ctx.num_rrus, ctx.num_users, ctx.nt);
    for b in 0..ctx.num_rrus {
        let served = &ctx.users_of_rru[b];
        if served.is_empty() {
            continue;
        }
        let scale = (ctx.power_w / served.len() as f64).sqrt();
        for &k in served {
            let dir: Vec<Complex64> = match strategy {
                InitStrategy::Mrt => ctx.h(b, k).to_vec(),
                InitStrategy::Random => (0..ctx.nt).map(|_| standard_complex(rng)).collect(),
            };
            let n = norm_sq(&dir).sqrt();
            if n > 0.0 {
                for (f, d) in beams.beam_mut(b, k).iter_mut().zip(&dir) {
                    *f = d * (scale / n);
                }
            }
        }
    }
    let gains = gain_table(ctx, &beams);
    let gammas = pessimistic(&subset_sinrs(ctx, &gains));
    let q = q_table(ctx, &gains, &gammas);
    let duals = seed_duals(&ctx.weights, &gammas, &q);
    (beams, gammas, duals)
}

pub(crate) fn objective(ctx: &Ctx, gammas: &[f64]) -> f64 {
    crate::metrics::weighted_sum_rate(gammas, &ctx.weights)
}
