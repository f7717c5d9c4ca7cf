//! Link-blockage reliability: closed-form per-user success probabilities,
//! system outage, a Beta-integral upper bound on success, and the Monte
//! Carlo outage / effective sum-rate estimator with reference beamformers.
//!
//! The closed-form math treats a link as a Bernoulli variable that blocks
//! with probability 1 - exp(-density * distance), independently across
//! links; a user succeeds when at least `subset_floor` of its serving links
//! survive. The Monte Carlo estimator instead plays the full game: solve on
//! the estimation snapshot, transmit on the transmission snapshot, and
//! count a drop as outage when any user's assigned rate exceeds what the
//! transmission channel supports.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{draw_channel_set, ChannelSet, ChannelSnapshot};
use crate::combinatorics::{CombinatoricsError, SubsetFamily};
use crate::hybrid::{self, AnalogCodebook, HybridConfig, HybridError};
use crate::linalg::norm_sq;
use crate::metrics::{self, BeamformerSet};
use crate::rng::substream;
use crate::scenario::{build_topology, link_distance, ScenarioError, SystemConfig, Topology};
use crate::solver::{kkt, sca, InitStrategy, SolverError, SolverKind};

/// Outage events below this rate margin (bits) are treated as ties, so the
/// zero-blockage case where assigned and supported rates coincide exactly is
/// never miscounted.
const RATE_TIE_MARGIN: f64 = 1e-9;

const QUADRATURE_REL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error("at least one drop is required")]
    NoDrops,
    #[error("quadrature stalled: wanted relative error {wanted:e}, achieved {achieved:e}")]
    Quadrature { wanted: f64, achieved: f64 },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error("an analog front end applies to the solver schemes, not {scheme}")]
    FrontEndScheme { scheme: &'static str },
    #[error("codebook is sized for {book} antennas, the array has {array}")]
    CodebookArray { book: usize, array: usize },
}

/// Fixed analog stage the solver schemes run behind when set: beams are
/// selected per drop from the estimation snapshot and the digital solve
/// works on the reduced channels.
#[derive(Debug, Clone)]
pub struct FrontEnd {
    pub hybrid: HybridConfig,
    pub codebook: AnalogCodebook,
}

/// Probability that a link of length `distance_m` loses its dominant path.
pub fn link_block_prob(distance_m: f64, density: f64) -> f64 {
    -f64::exp_m1(-density * distance_m)
}

/// Probability that at least `subset_floor` of user k's serving links
/// survive: the sum over every survival hypothesis of the product of its
/// links' survival and blocking probabilities.
pub fn success_probability(
    k: usize,
    topo: &Topology,
    cfg: &SystemConfig,
) -> Result<f64, ReliabilityError> {
    let family = SubsetFamily::build(topo, cfg.subset_floor, cfg.num_rrus)?;
    let q: Vec<f64> = (0..cfg.num_rrus)
        .map(|b| link_block_prob(link_distance(topo, b, k), cfg.blockage_density))
        .collect();
    Ok(family.per_user[k]
        .iter()
        .map(|entry| {
            let live: f64 = entry.available.iter().map(|&b| 1.0 - q[b]).product();
            let dead: f64 = entry.blocked.iter().map(|&b| q[b]).product();
            live * dead
        })
        .sum())
}

/// Worst-case system outage: the network fails when any user fails, so
/// 1 minus the product of the per-user success probabilities.
pub fn system_outage_theory(topo: &Topology, cfg: &SystemConfig) -> Result<f64, ReliabilityError> {
    let mut joint = 1.0;
    for k in 0..topo.user_positions.len() {
        joint *= success_probability(k, topo, cfg)?;
    }
    Ok(1.0 - joint)
}

/// How the mean blocking probability entering `success_upper_bound` is
/// formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanBlockage {
    /// Average the serving links' blocking probabilities at the user's
    /// drawn position.
    FixedPosition,
    /// Average each serving link's blocking probability over a user
    /// position uniform on the service rectangle, then over the links.
    RectangleAveraged,
}

/// Upper bound on user k's success probability from replacing the per-link
/// blocking probabilities with their mean q̄ and bounding the resulting
/// binomial tail by an incomplete Beta integral:
///
///   p ≤ L · C(|B|, |B|-L) · ∫_0^{1-q̄} t^(L-1) (1-t)^(|B|-L) dt.
pub fn success_upper_bound(
    k: usize,
    topo: &Topology,
    cfg: &SystemConfig,
    variant: MeanBlockage,
) -> Result<f64, ReliabilityError> {
    let serving = &topo.serving_sets[k];
    let mean: f64 = match variant {
        MeanBlockage::FixedPosition => {
            serving
                .iter()
                .map(|&b| link_block_prob(link_distance(topo, b, k), cfg.blockage_density))
                .sum::<f64>()
                / serving.len() as f64
        }
        MeanBlockage::RectangleAveraged => {
            let mut acc = 0.0;
            for &b in serving {
                acc += rectangle_mean_blocking(topo.rru_positions[b], cfg)?;
            }
            acc / serving.len() as f64
        }
    };
    bound_from_mean_blockage(serving.len(), cfg.subset_floor, mean)
}

/// The Beta-integral bound for a serving set of `set_size` links, a survival
/// floor, and mean blocking probability `q_bar`.
pub fn bound_from_mean_blockage(
    set_size: usize,
    floor: usize,
    q_bar: f64,
) -> Result<f64, ReliabilityError> {
    if floor == 0 {
        return Ok(1.0);
    }
    let spare = set_size - floor;
    let coeff = floor as f64 * binomial(set_size, spare);
    let upper = 1.0 - q_bar.clamp(0.0, 1.0);
    let integral = adaptive_simpson(
        |t| t.powi(floor as i32 - 1) * (1.0 - t).powi(spare as i32),
        0.0,
        upper,
        QUADRATURE_REL_TOL,
    )?;
    Ok((coeff * integral).clamp(0.0, 1.0))
}

/// Blocking probability of a link to transmitter `rru`, averaged over a user
/// position uniform on the service rectangle.
fn rectangle_mean_blocking(rru: [f64; 2], cfg: &SystemConfig) -> Result<f64, ReliabilityError> {
    let (w, h) = (cfg.area_width_m, cfg.area_height_m);
    let eta = cfg.blockage_density;
    let inner_tol = QUADRATURE_REL_TOL * 0.1;
    let outer = adaptive_simpson(
        |x| {
            adaptive_simpson(
                |y| link_block_prob(((x - rru[0]).powi(2) + (y - rru[1]).powi(2)).sqrt(), eta),
                0.0,
                h,
                inner_tol,
            )
            .unwrap_or(f64::NAN)
        },
        0.0,
        w,
        QUADRATURE_REL_TOL,
    )?;
    if !outer.is_finite() {
        return Err(ReliabilityError::Quadrature {
            wanted: QUADRATURE_REL_TOL,
            achieved: f64::INFINITY,
        });
    }
    Ok(outer / (w * h))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Adaptive Simpson quadrature with a relative-error target. Returns an
/// error when bisection-to-depth cannot certify the target.
fn adaptive_simpson(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64, ReliabilityError> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    let mut worst = 0.0_f64;
    let value = refine(
        &f,
        (a, fa),
        (b, fb),
        fm,
        whole,
        rel_tol * scale,
        40,
        &mut worst,
    );
    let achieved = worst / scale;
    if achieved > rel_tol {
        return Err(ReliabilityError::Quadrature {
            wanted: rel_tol,
            achieved,
        });
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    (a, fa): (f64, f64),
    (b, fb): (f64, f64),
    fm: f64,
    whole: f64,
    eps: f64,
    depth: usize,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        *worst = worst.max(delta.abs() / 15.0);
        return left + right + delta / 15.0;
    }
    refine(f, (a, fa), (m, fm), flm, left, 0.5 * eps, depth - 1, worst)
        + refine(f, (m, fm), (b, fb), frm, right, 0.5 * eps, depth - 1, worst)
}

/// Empirical counterpart of `system_outage_theory` on a fixed topology:
/// draw every serving link's blockage independently and count rounds where
/// some user keeps fewer than `subset_floor` links. No beamforming.
pub fn simulate_link_outage(topo: &Topology, cfg: &SystemConfig, draws: usize, seed: u64) -> f64 {
    let q: Vec<Vec<f64>> = topo
        .serving_sets
        .iter()
        .enumerate()
        .map(|(k, set)| {
            set.iter()
                .map(|&b| link_block_prob(link_distance(topo, b, k), cfg.blockage_density))
                .collect()
        })
        .collect();
    let mut rng = substream(seed, 0);
    let mut outages = 0usize;
    for _ in 0..draws {
        let hit = q.iter().any(|row| {
            let survivors = row.iter().filter(|&&p| rng.gen::<f64>() >= p).count();
            survivors < cfg.subset_floor
        });
        if hit {
            outages += 1;
        }
    }
    outages as f64 / draws as f64
}

/// Beam assignment scheme evaluated by the Monte Carlo estimator: the two
/// robust solvers plus the conventional references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Kkt,
    Sca,
    /// Per-link matched filters with an equal power split, rates assigned
    /// from the estimated full-set ratios.
    Mrt,
    /// Robust solver with the survival floor raised to the whole serving
    /// set: coherent transmission that banks on every link surviving.
    FullJt,
    /// Each user served only by its nearest transmitter; coordination
    /// handles interference alone.
    Cb,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Kkt => "kkt",
            Scheme::Sca => "sca",
            Scheme::Mrt => "mrt",
            Scheme::FullJt => "full_jt",
            Scheme::Cb => "cb",
        }
    }
}

/// Closed-form and simulated reliability for one scheme at one operating
/// point. Theory columns are averaged over the random drops.
#[derive(Debug, Clone, Serialize)]
pub struct ReliabilityReport {
    pub drops: usize,
    /// Drops whose solver failed; excluded from every simulated figure.
    pub failures: usize,
    /// Fraction of solved drops where some user's assigned rate exceeded
    /// what the transmission snapshot supported.
    pub outage: f64,
    /// 95% normal-approximation half width for `outage`.
    pub outage_ci: f64,
    /// Mean assigned sum rate over solved drops, bits per channel use.
    pub sum_rate: f64,
    /// Outage-discounted throughput (1 - outage) * sum_rate.
    pub effective_rate: f64,
    /// Per-user closed-form success probabilities, drop-averaged.
    pub theory_success: Vec<f64>,
    /// Closed-form system outage, drop-averaged.
    pub theory_outage: f64,
    /// Per-user Beta-integral success bounds at the drawn positions,
    /// drop-averaged.
    pub bound_success: Vec<f64>,
    /// System outage implied by the success bounds, drop-averaged. A lower
    /// bound, since the per-user bounds overestimate success.
    pub bound_outage: f64,
}

struct DropStats {
    failed: bool,
    outage: bool,
    rate: f64,
    p_theory: Vec<f64>,
    p_bound: Vec<f64>,
}

/// Scheme-specific view of the configuration: the references reinterpret
/// the serving geometry, the solvers take it as given.
fn scheme_config(cfg: &SystemConfig, scheme: Scheme) -> SystemConfig {
    let mut run = cfg.clone();
    match scheme {
        Scheme::FullJt => run.subset_floor = run.serving_set_size,
        Scheme::Cb => {
            run.serving_set_size = 1;
            run.subset_floor = 1;
        }
        Scheme::Kkt | Scheme::Sca | Scheme::Mrt => {}
    }
    run
}

/// Matched-filter beams: each transmitter splits its budget equally over
/// the users it serves and points at their channels.
fn mrt_beams(channels: &ChannelSnapshot, topo: &Topology, cfg: &SystemConfig) -> BeamformerSet {
    let mut beams = BeamformerSet::zeros(channels.num_rrus, channels.num_users, channels.nt);
    let users_of_rru = topo.users_of_rru(channels.num_rrus);
    let power = cfg.tx_power_w();
    for (b, served) in users_of_rru.iter().enumerate() {
        if served.is_empty() {
            continue;
        }
        let share = (power / served.len() as f64).sqrt();
        for &k in served {
            let h = channels.link(b, k).effective();
            let norm = norm_sq(&h).sqrt();
            if norm == 0.0 {
                continue;
            }
            for (f, hv) in beams.beam_mut(b, k).iter_mut().zip(&h) {
                *f = hv * (share / norm);
            }
        }
    }
    beams
}

/// Reference beamformers. `Kkt`/`Sca` are solver schemes, not references,
/// and are rejected.
pub fn baseline_beamformers(
    kind: Scheme,
    channels: &ChannelSnapshot,
    topo: &Topology,
    cfg: &SystemConfig,
    rng: &mut impl Rng,
) -> Result<BeamformerSet, SolverError> {
    match kind {
        Scheme::Mrt => Ok(mrt_beams(channels, topo, cfg)),
        Scheme::FullJt => {
            let run = scheme_config(cfg, kind);
            Ok(kkt::solve(channels, topo, &run, InitStrategy::Mrt, rng)?.beams)
        }
        Scheme::Cb => {
            let run = scheme_config(cfg, kind);
            let mut singleton = topo.clone();
            for set in &mut singleton.serving_sets {
                set.truncate(1);
            }
            Ok(kkt::solve(channels, &singleton, &run, InitStrategy::Mrt, rng)?.beams)
        }
        Scheme::Kkt | Scheme::Sca => Err(SolverError::Shape(format!(
            "{} is a solver scheme, not a reference design",
            kind.label()
        ))),
    }
}

/// Beams plus the rate targets the scheme would assign from the estimation
/// snapshot.
fn assign(
    cfg: &SystemConfig,
    topo: &Topology,
    set: &ChannelSet,
    scheme: Scheme,
    front: Option<&FrontEnd>,
    rng: &mut impl Rng,
) -> Result<(BeamformerSet, Vec<f64>), SolverError> {
    if let Some(fe) = front {
        // combination validated before the drop loop; only Kkt/Sca arrive here
        let kind = match scheme {
            Scheme::Sca => SolverKind::Sca,
            _ => SolverKind::Kkt,
        };
        let res = hybrid::hybrid_solve(
            set,
            topo,
            cfg,
            fe.hybrid,
            &fe.codebook,
            kind,
            InitStrategy::Mrt,
            rng,
        )
        .map_err(|e| match e {
            HybridError::Solver(s) => s,
            other => SolverError::Shape(other.to_string()),
        })?;
        return Ok((res.beams, res.gammas));
    }
    let estimation = &set.estimation;
    match scheme {
        Scheme::Sca => {
            let backend = sca::KktBackend::default();
            let res = sca::solve(estimation, topo, cfg, InitStrategy::Mrt, rng, &backend)?;
            Ok((res.beams, res.gammas))
        }
        Scheme::Mrt => {
            let beams = mrt_beams(estimation, topo, cfg);
            let sigma2 = cfg.noise_power_w();
            let gammas = (0..estimation.num_users)
                .map(|k| metrics::sinr_full(estimation, &beams, k, sigma2))
                .collect();
            Ok((beams, gammas))
        }
        Scheme::Kkt | Scheme::FullJt | Scheme::Cb => {
            let res = kkt::solve(estimation, topo, cfg, InitStrategy::Mrt, rng)?;
            Ok((res.beams, res.gammas))
        }
    }
}

fn run_drop(
    cfg: &SystemConfig,
    scheme: Scheme,
    front: Option<&FrontEnd>,
    seed: u64,
    drop: usize,
) -> Result<DropStats, ReliabilityError> {
    let mut rng = substream(seed, drop as u64);
    let topo = build_topology(cfg, &mut rng)?;
    let set = draw_channel_set(cfg, &topo, &mut rng);
    let users = cfg.num_users;

    let mut p_theory = Vec::with_capacity(users);
    let mut p_bound = Vec::with_capacity(users);
    for k in 0..users {
        p_theory.push(success_probability(k, &topo, cfg)?);
        p_bound.push(success_upper_bound(k, &topo, cfg, MeanBlockage::FixedPosition)?);
    }

    let (failed, outage, rate) = match assign(cfg, &topo, &set, scheme, front, &mut rng) {
        Err(_) => (true, false, 0.0),
        Ok((beams, gammas)) => {
            let sigma2 = cfg.noise_power_w();
            let mut hit = false;
            let mut sum = 0.0;
            for (k, &g) in gammas.iter().enumerate() {
                let assigned = (1.0 + g).log2();
                let supported =
                    (1.0 + metrics::sinr_full(&set.transmission, &beams, k, sigma2)).log2();
                if assigned > supported + RATE_TIE_MARGIN {
                    hit = true;
                }
                sum += assigned;
            }
            (false, hit, sum)
        }
    };
    Ok(DropStats {
        failed,
        outage,
        rate,
        p_theory,
        p_bound,
    })
}

/// Monte Carlo outage and effective sum rate over independent drops, each
/// with its own topology, channel pair, and RNG substream (`seed`, drop
/// index), so results do not depend on scheduling order or thread count.
/// Solver failures are counted, not folded into outage.
pub fn monte_carlo_outage(
    cfg: &SystemConfig,
    drops: usize,
    scheme: Scheme,
    seed: u64,
) -> Result<ReliabilityReport, ReliabilityError> {
    monte_carlo_outage_with(cfg, drops, scheme, seed, None)
}

/// Like `monte_carlo_outage`, optionally running the solver schemes behind
/// a fixed analog front end (reference schemes reject one).
pub fn monte_carlo_outage_with(
    cfg: &SystemConfig,
    drops: usize,
    scheme: Scheme,
    seed: u64,
    front: Option<&FrontEnd>,
) -> Result<ReliabilityReport, ReliabilityError> {
    if drops == 0 {
        return Err(ReliabilityError::NoDrops);
    }
    if let Some(fe) = front {
        if !matches!(scheme, Scheme::Kkt | Scheme::Sca) {
            return Err(ReliabilityError::FrontEndScheme {
                scheme: scheme.label(),
            });
        }
        fe.hybrid.validate(cfg.num_users)?;
        if fe.codebook.nt() != cfg.antennas_per_rru {
            return Err(ReliabilityError::CodebookArray {
                book: fe.codebook.nt(),
                array: cfg.antennas_per_rru,
            });
        }
    }
    let run_cfg = scheme_config(cfg, scheme);
    let stats: Vec<DropStats> = (0..drops)
        .into_par_iter()
        .map(|drop| run_drop(&run_cfg, scheme, front, seed, drop))
        .collect::<Result<_, _>>()?;

    let users = run_cfg.num_users;
    let failures = stats.iter().filter(|s| s.failed).count();
    let solved = drops - failures;
    let outages = stats.iter().filter(|s| !s.failed && s.outage).count();
    let (outage, outage_ci, sum_rate) = if solved > 0 {
        let p = outages as f64 / solved as f64;
        let rate = stats.iter().filter(|s| !s.failed).map(|s| s.rate).sum::<f64>() / solved as f64;
        (p, 1.96 * (p * (1.0 - p) / solved as f64).sqrt(), rate)
    } else {
        (0.0, 0.0, 0.0)
    };

    let mut theory_success = vec![0.0; users];
    let mut bound_success = vec![0.0; users];
    let mut theory_outage = 0.0;
    let mut bound_outage = 0.0;
    for s in &stats {
        for k in 0..users {
            theory_success[k] += s.p_theory[k];
            bound_success[k] += s.p_bound[k];
        }
        theory_outage += 1.0 - s.p_theory.iter().product::<f64>();
        bound_outage += 1.0 - s.p_bound.iter().product::<f64>();
    }
    let n = drops as f64;
    for v in theory_success.iter_mut().chain(bound_success.iter_mut()) {
        *v /= n;
    }

    Ok(ReliabilityReport {
        drops,
        failures,
        outage,
        outage_ci,
        sum_rate,
        effective_rate: (1.0 - outage) * sum_rate,
        theory_success,
        theory_outage: theory_outage / n,
        bound_success,
        bound_outage: bound_outage / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::sinr_full;

    const EXACT: f64 = 1e-12;

    fn config(extra: &str) -> SystemConfig {
        SystemConfig::from_toml_str(extra).unwrap()
    }

    fn fixed_topology(cfg: &SystemConfig) -> Topology {
        let mut rng = substream(cfg.rng_seed, 0);
        build_topology(cfg, &mut rng).unwrap()
    }

    #[test]
    fn blocking_probability_evaluates() {
        assert!(link_block_prob(135.0, 0.0) == 0.0);
        assert!(link_block_prob(0.0, 0.01) == 0.0);
        let got = link_block_prob(100.0, 0.005);
        assert!((got - (1.0 - (-0.5_f64).exp())).abs() < EXACT);
    }

    #[test]
    fn success_matches_power_set_enumeration() {
        let cfg = config(
            r#"
                num_rrus = 5
                num_users = 2
                serving_set_size = 4
                subset_floor = 2
                blockage_density = 0.004
            "#,
        );
        let topo = fixed_topology(&cfg);
        for k in 0..cfg.num_users {
            let serving = &topo.serving_sets[k];
            let q: Vec<f64> = serving
                .iter()
                .map(|&b| link_block_prob(link_distance(&topo, b, k), cfg.blockage_density))
                .collect();
            // every blockage outcome, weighted by its probability
            let mut brute = 0.0;
            for state in 0..(1usize << serving.len()) {
                let mut weight = 1.0;
                let mut survivors = 0;
                for (i, &qi) in q.iter().enumerate() {
                    if state & (1 << i) != 0 {
                        weight *= qi;
                    } else {
                        weight *= 1.0 - qi;
                        survivors += 1;
                    }
                }
                if survivors >= cfg.subset_floor {
                    brute += weight;
                }
            }
            let got = success_probability(k, &topo, &cfg).unwrap();
            assert!((got - brute).abs() < EXACT, "user {k}: {got} vs {brute}");
        }
    }

    #[test]
    fn equal_blocking_reduces_to_binomial_tail() {
        // four transmitters at the same distance from a centered user, so
        // every link blocks with probability exactly 0.1
        let d = -(0.9_f64.ln()) / 0.005;
        let cfg = config(&format!(
            r#"
                num_rrus = 4
                num_users = 1
                serving_set_size = 4
                subset_floor = 3
                blockage_density = 0.005
                area_width_m = 200
                area_height_m = 200
                rru_positions = [[{a}, 100.0], [{b}, 100.0], [100.0, {a}], [100.0, {b}]]
                user_positions = [[100.0, 100.0]]
            "#,
            a = 100.0 - d,
            b = 100.0 + d,
        ));
        let topo = fixed_topology(&cfg);
        let got = success_probability(0, &topo, &cfg).unwrap();
        // keep all four, or lose exactly one
        let want = 0.9_f64.powi(4) + 4.0 * 0.9_f64.powi(3) * 0.1;
        assert!((want - 0.9477).abs() < 1e-12);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");

        // floor equal to the set size leaves only the all-survive term
        let mut all = cfg.clone();
        all.subset_floor = 4;
        let got = success_probability(0, &topo, &all).unwrap();
        assert!((got - 0.9_f64.powi(4)).abs() < 1e-9);
    }

    #[test]
    fn system_outage_is_one_minus_joint_success() {
        // two users on singleton serving sets with blocking 0.1 and 0.2
        let d1 = -(0.9_f64.ln()) / 0.005;
        let d2 = -(0.8_f64.ln()) / 0.005;
        let cfg = config(&format!(
            r#"
                num_rrus = 2
                num_users = 2
                serving_set_size = 1
                subset_floor = 1
                blockage_density = 0.005
                area_width_m = 300
                area_height_m = 300
                rru_positions = [[0.0, 0.0], [300.0, 300.0]]
                user_positions = [[{d1}, 0.0], [{x}, 300.0]]
                serving_sets = [[0], [1]]
            "#,
            x = 300.0 - d2,
        ));
        let topo = fixed_topology(&cfg);
        let got = system_outage_theory(&topo, &cfg).unwrap();
        assert!((got - 0.28).abs() < 1e-9, "{got}");
    }

    #[test]
    fn beta_bound_closed_forms() {
        // two links, floor one, mean blocking one half:
        // 1 * C(2,1) * ∫_0^0.5 (1-t) dt = 0.75 = 1 - 0.5^2
        let got = bound_from_mean_blockage(2, 1, 0.5).unwrap();
        assert!((got - 0.75).abs() < 1e-9, "{got}");

        // floor equal to the set size collapses to (1-q̄)^set
        for set in 1..=5 {
            let got = bound_from_mean_blockage(set, set, 0.3).unwrap();
            assert!((got - 0.7_f64.powi(set as i32)).abs() < 1e-9);
        }

        // no blocking normalizes to one
        assert!((bound_from_mean_blockage(4, 2, 0.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rectangle_average_matches_midpoint_grid() {
        let cfg = config(
            r#"
                blockage_density = 0.01
                area_width_m = 100
                area_height_m = 50
            "#,
        );
        let rru = [0.0, 25.0];
        let got = rectangle_mean_blocking(rru, &cfg).unwrap();
        let (nx, ny) = (400, 200);
        let (dx, dy) = (cfg.area_width_m / nx as f64, cfg.area_height_m / ny as f64);
        let mut grid = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                let x = (i as f64 + 0.5) * dx;
                let y = (j as f64 + 0.5) * dy;
                let d = ((x - rru[0]).powi(2) + (y - rru[1]).powi(2)).sqrt();
                grid += link_block_prob(d, cfg.blockage_density);
            }
        }
        grid /= (nx * ny) as f64;
        assert!((got - grid).abs() < 1e-5, "{got} vs {grid}");
        assert!(got > 0.0 && got < 1.0);

        // the averaged variant feeds the same bound machinery
        let topo = fixed_topology(&cfg);
        let averaged = success_upper_bound(0, &topo, &cfg, MeanBlockage::RectangleAveraged).unwrap();
        let fixed = success_upper_bound(0, &topo, &cfg, MeanBlockage::FixedPosition).unwrap();
        assert!((0.0..=1.0).contains(&averaged));
        assert!((0.0..=1.0).contains(&fixed));
    }

    #[test]
    fn beta_bound_equals_binomial_tail_at_equal_blocking() {
        // the incomplete Beta form is an identity for the binomial tail, so
        // with genuinely equal link blocking it reproduces the exact value
        for (set, floor, q) in [(4, 3, 0.1), (4, 1, 0.3), (6, 4, 0.25)] {
            let bound = bound_from_mean_blockage(set, floor, q).unwrap();
            let mut tail = 0.0;
            for t in 0..=(set - floor) {
                tail += binomial(set, t)
                    * (1.0 - q).powi((set - t) as i32)
                    * q.powi(t as i32);
            }
            assert!((bound - tail).abs() < 1e-9, "{bound} vs {tail}");
        }
    }

    #[test]
    fn link_simulation_agrees_with_theory() {
        let cfg = config(
            r#"
                num_users = 2
                subset_floor = 2
                blockage_density = 0.01
            "#,
        );
        let topo = fixed_topology(&cfg);
        let theory = system_outage_theory(&topo, &cfg).unwrap();
        let draws = 40_000;
        let sim = simulate_link_outage(&topo, &cfg, draws, 77);
        let sigma = (theory * (1.0 - theory) / draws as f64).sqrt();
        assert!(
            (sim - theory).abs() <= 3.0 * sigma + 1e-9,
            "sim {sim} vs theory {theory} (sigma {sigma})"
        );
    }

    #[test]
    fn matched_filter_reference_spends_budget_on_the_channel() {
        let cfg = config(
            r#"
                num_rrus = 1
                antennas_per_rru = 4
                num_users = 1
                serving_set_size = 1
                subset_floor = 1
                num_paths = 2
                blockage_density = 0.0
            "#,
        );
        let topo = fixed_topology(&cfg);
        let mut rng = substream(cfg.rng_seed, 1);
        let channels = draw_channel_set(&cfg, &topo, &mut rng).estimation;
        let mut solver_rng = substream(5, 0);
        let beams =
            baseline_beamformers(Scheme::Mrt, &channels, &topo, &cfg, &mut solver_rng).unwrap();
        let p = cfg.tx_power_w();
        assert!((beams.rru_power(0) - p).abs() < 1e-12 * p);
        // collinear with the channel: the ratio hits the matched-filter bound
        let h = channels.link(0, 0).effective();
        let got = sinr_full(&channels, &beams, 0, cfg.noise_power_w());
        let ideal = p * norm_sq(&h) / cfg.noise_power_w();
        assert!((got - ideal).abs() < 1e-9 * ideal);

        let err = baseline_beamformers(Scheme::Kkt, &channels, &topo, &cfg, &mut solver_rng);
        assert!(err.is_err());
    }

    #[test]
    fn nearest_transmitter_reference_uses_singleton_serving() {
        let cfg = config(
            r#"
                num_rrus = 3
                antennas_per_rru = 4
                num_users = 2
                serving_set_size = 2
                subset_floor = 1
                num_paths = 2
                blockage_density = 0.0
                kkt_max_iters = 150
            "#,
        );
        let topo = fixed_topology(&cfg);
        let mut rng = substream(cfg.rng_seed, 1);
        let channels = draw_channel_set(&cfg, &topo, &mut rng).estimation;
        let mut solver_rng = substream(6, 0);
        let beams =
            baseline_beamformers(Scheme::Cb, &channels, &topo, &cfg, &mut solver_rng).unwrap();
        for k in 0..cfg.num_users {
            let nearest = topo.serving_sets[k][0];
            for b in 0..cfg.num_rrus {
                let power = norm_sq(beams.beam(b, k));
                if b != nearest {
                    assert!(power == 0.0, "user {k} radiated from {b}");
                }
            }
        }
    }

    #[test]
    fn zero_blockage_drops_never_go_to_outage() {
        let cfg = config(
            r#"
                num_rrus = 3
                antennas_per_rru = 4
                num_users = 2
                serving_set_size = 2
                subset_floor = 1
                num_paths = 2
                blockage_density = 0.0
                kkt_max_iters = 150
            "#,
        );
        let report = monte_carlo_outage(&cfg, 3, Scheme::Kkt, 42).unwrap();
        assert_eq!(report.drops, 3);
        assert_eq!(report.failures, 0);
        assert!(report.outage == 0.0);
        assert!(report.outage_ci == 0.0);
        assert!(report.sum_rate > 0.0);
        assert!((report.effective_rate - report.sum_rate).abs() < EXACT);
        assert!(report.theory_outage.abs() < EXACT);
        assert!(report.bound_outage.abs() < EXACT);
        assert!(report.theory_success.iter().all(|&p| (p - 1.0).abs() < EXACT));

        // byte-for-byte reproducible
        let again = monte_carlo_outage(&cfg, 3, Scheme::Kkt, 42).unwrap();
        let a = serde_json::to_string(&report).unwrap();
        let b = serde_json::to_string(&again).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn analog_front_end_runs_solver_schemes_only() {
        let cfg = config(
            r#"
                num_rrus = 2
                antennas_per_rru = 4
                num_users = 2
                serving_set_size = 2
                subset_floor = 1
                num_paths = 2
                blockage_density = 0.0
                kkt_max_iters = 120
            "#,
        );
        let fe = FrontEnd {
            hybrid: HybridConfig::per_user(2),
            codebook: AnalogCodebook::default_for(cfg.antennas_per_rru),
        };
        assert!(matches!(
            monte_carlo_outage_with(&cfg, 1, Scheme::Mrt, 3, Some(&fe)),
            Err(ReliabilityError::FrontEndScheme { scheme: "mrt" })
        ));
        let wrong_book = FrontEnd {
            codebook: AnalogCodebook::default_for(8),
            ..fe.clone()
        };
        assert!(matches!(
            monte_carlo_outage_with(&cfg, 1, Scheme::Kkt, 3, Some(&wrong_book)),
            Err(ReliabilityError::CodebookArray { book: 8, array: 4 })
        ));

        let report = monte_carlo_outage_with(&cfg, 2, Scheme::Kkt, 3, Some(&fe)).unwrap();
        assert_eq!(report.failures, 0);
        assert_eq!(report.outage, 0.0, "no blockage, no outage");
        assert!(report.sum_rate > 0.0);
        // reduced solve cannot beat the full digital one on the same drops
        let full = monte_carlo_outage(&cfg, 2, Scheme::Kkt, 3).unwrap();
        assert!(report.sum_rate <= full.sum_rate * (1.0 + 1e-9));
    }

    #[test]
    fn full_cooperation_reference_assigns_full_set_rates() {
        let cfg = config(
            r#"
                num_rrus = 3
                antennas_per_rru = 4
                num_users = 2
                serving_set_size = 2
                subset_floor = 1
                num_paths = 2
                blockage_density = 0.0
                kkt_max_iters = 150
            "#,
        );
        let run = scheme_config(&cfg, Scheme::FullJt);
        assert_eq!(run.subset_floor, cfg.serving_set_size);
        let topo = fixed_topology(&cfg);
        let mut rng = substream(cfg.rng_seed, 1);
        let set = draw_channel_set(&cfg, &topo, &mut rng);
        let mut solver_rng = substream(7, 0);
        let (beams, gammas) =
            assign(&run, &topo, &set, Scheme::FullJt, None, &mut solver_rng).unwrap();
        let sigma2 = cfg.noise_power_w();
        for k in 0..cfg.num_users {
            let full = sinr_full(&set.estimation, &beams, k, sigma2);
            assert!((gammas[k] - full).abs() < 1e-9 * (1.0 + full));
        }
    }
}
