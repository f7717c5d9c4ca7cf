//! Subcommand implementations and their output schemas.
//!
//! Everything is deterministic in (config, seed): topologies and channels
//! come from counter-based substreams of the master seed, CSV floats are
//! written in shortest-roundtrip form, and JSON keys are sorted.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use comp_core::channel::{draw_channel_set, ChannelSet};
use comp_core::hybrid::{self, AnalogCodebook, HybridConfig, HybridError};
use comp_core::metrics::weighted_sum_rate;
use comp_core::reliability::{self, FrontEnd, MeanBlockage, ReliabilityError, Scheme};
use comp_core::rng::{substream, ChaCha12Rng};
use comp_core::scenario::build_topology;
use comp_core::solver::{kkt, sca, InitStrategy, SolverKind, SolverResult};
use comp_core::{SystemConfig, Topology};
use serde::Serialize;
use thiserror::Error;

use crate::{
    BaselineArg, CommonArgs, ConvergenceArgs, HybridArg, SolveArgs, SolverArg, SweepArgs,
    TheoryArgs,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

fn config_err(e: impl Display) -> CliError {
    CliError::Config(e.to_string())
}

fn solver_err(e: impl Display) -> CliError {
    CliError::Solver(e.to_string())
}

fn io_err(e: impl Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Numerical failures mid-run are solver errors; everything else the
/// reliability harness rejects is a bad operating point.
fn reliability_err(e: ReliabilityError) -> CliError {
    match e {
        ReliabilityError::Quadrature { .. } | ReliabilityError::Hybrid(HybridError::Solver(_)) => {
            CliError::Solver(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    }
}

fn load_config(common: &CommonArgs) -> Result<SystemConfig, CliError> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = SystemConfig::from_toml_str(&text).map_err(config_err)?;
    if let Some(seed) = common.seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => std::io::stdout().write_all(bytes).map_err(io_err),
    }
}

fn scheme_of(arg: SolverArg) -> Scheme {
    match arg {
        SolverArg::Kkt => Scheme::Kkt,
        SolverArg::Sca => Scheme::Sca,
    }
}

fn baseline_scheme(arg: BaselineArg) -> Scheme {
    match arg {
        BaselineArg::Mrt => Scheme::Mrt,
        BaselineArg::FullJt => Scheme::FullJt,
        BaselineArg::Cb => Scheme::Cb,
    }
}

fn hybrid_label(arg: HybridArg) -> &'static str {
    match arg {
        HybridArg::Off => "off",
        HybridArg::PerUser => "per_user",
        HybridArg::Compromise => "compromise",
    }
}

/// Resolve the front-end flags against the config.
fn front_end(
    cfg: &SystemConfig,
    hybrid: HybridArg,
    n_rf: Option<usize>,
) -> Result<Option<FrontEnd>, CliError> {
    let hcfg = match hybrid {
        HybridArg::Off => {
            if n_rf.is_some() {
                return Err(CliError::Config(
                    "--n-rf needs --hybrid per_user or compromise".into(),
                ));
            }
            return Ok(None);
        }
        HybridArg::PerUser => HybridConfig::per_user(n_rf.unwrap_or(cfg.num_users)),
        HybridArg::Compromise => {
            if n_rf.is_some_and(|n| n != 1) {
                return Err(CliError::Config(
                    "the compromise front end drives a single chain; drop --n-rf".into(),
                ));
            }
            HybridConfig::compromise()
        }
    };
    hcfg.validate(cfg.num_users).map_err(config_err)?;
    Ok(Some(FrontEnd {
        hybrid: hcfg,
        codebook: AnalogCodebook::default_for(cfg.antennas_per_rru),
    }))
}

fn run_solver(
    set: &ChannelSet,
    topo: &Topology,
    cfg: &SystemConfig,
    solver: SolverArg,
    front: Option<&FrontEnd>,
    init: InitStrategy,
    rng: &mut ChaCha12Rng,
) -> Result<SolverResult, CliError> {
    if let Some(fe) = front {
        let kind = match solver {
            SolverArg::Kkt => SolverKind::Kkt,
            SolverArg::Sca => SolverKind::Sca,
        };
        return hybrid::hybrid_solve(set, topo, cfg, fe.hybrid, &fe.codebook, kind, init, rng)
            .map_err(|e| match e {
                HybridError::Solver(s) => solver_err(s),
                other => config_err(other),
            });
    }
    match solver {
        SolverArg::Kkt => kkt::solve(&set.estimation, topo, cfg, init, rng).map_err(solver_err),
        SolverArg::Sca => {
            let backend = sca::KktBackend::default();
            sca::solve(&set.estimation, topo, cfg, init, rng, &backend).map_err(solver_err)
        }
    }
}

#[derive(Serialize)]
struct BeamDump {
    rru: usize,
    user: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

pub fn solve(args: SolveArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let front = front_end(&cfg, args.hybrid, args.n_rf)?;
    let seed = cfg.rng_seed;

    let mut rng = substream(seed, 0);
    let topo = build_topology(&cfg, &mut rng).map_err(config_err)?;
    let set = draw_channel_set(&cfg, &topo, &mut rng);
    let result = run_solver(
        &set,
        &topo,
        &cfg,
        args.solver,
        front.as_ref(),
        InitStrategy::Mrt,
        &mut rng,
    )?;

    let beams: Vec<BeamDump> = (0..result.beams.num_rrus)
        .flat_map(|b| (0..result.beams.num_users).map(move |k| (b, k)))
        .map(|(b, k)| {
            let beam = result.beams.beam(b, k);
            BeamDump {
                rru: b,
                user: k,
                re: beam.iter().map(|c| c.re).collect(),
                im: beam.iter().map(|c| c.im).collect(),
            }
        })
        .collect();
    let rates: Vec<f64> = result.gammas.iter().map(|&g| (1.0 + g).log2()).collect();

    let dump = serde_json::json!({
        "seed": seed,
        "solver": scheme_of(args.solver).label(),
        "hybrid": hybrid_label(args.hybrid),
        "n_rf": front.as_ref().map(|fe| fe.hybrid.n_rf),
        "converged": result.converged,
        "iterations": result.iterations,
        "objective": weighted_sum_rate(&result.gammas, &cfg.user_weights),
        "sinr_targets": result.gammas,
        "rates_bits": rates,
        "duals": { "subset": result.duals.a, "power": result.duals.z },
        "objective_trace": result.objective_trace,
        "topology": topo,
        "beams": beams,
    });
    let mut text = serde_json::to_string_pretty(&dump).map_err(io_err)?;
    text.push('\n');
    emit(args.common.out.as_ref(), text.as_bytes())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SweepParam {
    Eta,
    Floor,
    TxPowerDbm,
    Psi,
    Beta,
    NRf,
}

impl SweepParam {
    fn parse(key: &str) -> Result<Self, CliError> {
        match key {
            "eta" => Ok(Self::Eta),
            "L" => Ok(Self::Floor),
            "tx_power_dbm" => Ok(Self::TxPowerDbm),
            "psi" => Ok(Self::Psi),
            "beta" => Ok(Self::Beta),
            "n_rf" => Ok(Self::NRf),
            other => Err(CliError::Config(format!(
                "unknown sweep parameter {other}; expected eta, L, tx_power_dbm, psi, beta, or n_rf"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Eta => "eta",
            Self::Floor => "L",
            Self::TxPowerDbm => "tx_power_dbm",
            Self::Psi => "psi",
            Self::Beta => "beta",
            Self::NRf => "n_rf",
        }
    }
}

struct SweepSpec {
    param: SweepParam,
    values: Vec<String>,
}

fn parse_sweep(raw: &str) -> Result<SweepSpec, CliError> {
    let (key, tail) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config("--sweep wants KEY=V1,V2,...".into()))?;
    let values: Vec<String> = tail
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    if values.is_empty() {
        return Err(CliError::Config("the sweep needs at least one value".into()));
    }
    Ok(SweepSpec {
        param: SweepParam::parse(key.trim())?,
        values,
    })
}

fn parse_f64(raw: &str) -> Result<f64, CliError> {
    raw.parse()
        .map_err(|_| CliError::Config(format!("{raw} is not a number")))
}

fn parse_usize(raw: &str) -> Result<usize, CliError> {
    raw.parse()
        .map_err(|_| CliError::Config(format!("{raw} is not a nonnegative integer")))
}

/// Clone the base operating point with the swept parameter applied.
fn sweep_point(
    base: &SystemConfig,
    front: &Option<FrontEnd>,
    param: SweepParam,
    raw: &str,
) -> Result<(SystemConfig, Option<FrontEnd>), CliError> {
    let mut cfg = base.clone();
    let mut front = front.clone();
    match param {
        SweepParam::Eta => cfg.blockage_density = parse_f64(raw)?,
        SweepParam::Floor => cfg.subset_floor = parse_usize(raw)?,
        SweepParam::TxPowerDbm => cfg.tx_power_dbm = parse_f64(raw)?,
        SweepParam::Psi => cfg.best_response_step = parse_f64(raw)?,
        SweepParam::Beta => cfg.subgrad_step = parse_f64(raw)?,
        SweepParam::NRf => match front.as_mut() {
            Some(fe) => fe.hybrid.n_rf = parse_usize(raw)?,
            None => {
                return Err(CliError::Config(
                    "sweeping n_rf needs --hybrid per_user or compromise".into(),
                ))
            }
        },
    }
    cfg.validate().map_err(config_err)?;
    Ok((cfg, front))
}

#[derive(Serialize)]
struct SweepRow<'a> {
    param: &'a str,
    value: &'a str,
    eta: f64,
    #[serde(rename = "L")]
    floor: usize,
    solver: &'a str,
    hybrid: &'a str,
    n_rf: Option<usize>,
    drops: usize,
    failures: usize,
    outage: f64,
    outage_ci: f64,
    sum_rate: f64,
    effective_rate: f64,
    theory_outage: f64,
    bound_outage: f64,
}

pub fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    if args.drops == 0 {
        return Err(CliError::Config("--drops must be at least 1".into()));
    }
    let spec = parse_sweep(&args.sweep)?;
    let front = front_end(&cfg, args.hybrid, args.n_rf)?;
    let seed = cfg.rng_seed;

    // solver row first, then each distinct reference; only the solver row
    // runs behind the analog front end
    let mut schemes: Vec<(Scheme, bool)> = vec![(scheme_of(args.solver), front.is_some())];
    for &b in &args.baseline {
        let s = baseline_scheme(b);
        if !schemes.iter().any(|&(have, _)| have == s) {
            schemes.push((s, false));
        }
    }

    let mut wtr = csv::Writer::from_writer(Vec::new());
    for value in &spec.values {
        let (point_cfg, point_front) = sweep_point(&cfg, &front, spec.param, value)?;
        for &(scheme, hybridized) in &schemes {
            let fe = if hybridized { point_front.as_ref() } else { None };
            let report =
                reliability::monte_carlo_outage_with(&point_cfg, args.drops, scheme, seed, fe)
                    .map_err(reliability_err)?;
            eprintln!(
                "{}={} {}: outage {:.4} +/- {:.4}, sum-rate {:.3} ({} failures / {} drops)",
                spec.param.name(),
                value,
                scheme.label(),
                report.outage,
                report.outage_ci,
                report.sum_rate,
                report.failures,
                report.drops,
            );
            wtr.serialize(SweepRow {
                param: spec.param.name(),
                value,
                eta: point_cfg.blockage_density,
                floor: point_cfg.subset_floor,
                solver: scheme.label(),
                hybrid: if hybridized { hybrid_label(args.hybrid) } else { "off" },
                n_rf: fe.map(|f| f.hybrid.n_rf),
                drops: report.drops,
                failures: report.failures,
                outage: report.outage,
                outage_ci: report.outage_ci,
                sum_rate: report.sum_rate,
                effective_rate: report.effective_rate,
                theory_outage: report.theory_outage,
                bound_outage: report.bound_outage,
            })
            .map_err(io_err)?;
        }
    }
    let bytes = wtr.into_inner().map_err(io_err)?;
    emit(args.common.out.as_ref(), &bytes)
}

#[derive(Serialize)]
struct TheoryRow {
    eta: f64,
    #[serde(rename = "L")]
    floor: usize,
    user: usize,
    success: f64,
    success_bound: f64,
    success_bound_avg: f64,
    theory_outage: f64,
    bound_outage: f64,
    bound_outage_avg: f64,
}

pub fn theory(args: TheoryArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let etas: Vec<f64> = match &args.eta {
        Some(raw) => {
            let parsed: Vec<f64> = raw
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(parse_f64)
                .collect::<Result<_, _>>()?;
            if parsed.is_empty() {
                return Err(CliError::Config("--eta needs at least one value".into()));
            }
            parsed
        }
        None => (0..=10).map(|i| i as f64 / 1000.0).collect(),
    };

    // the grid shares one geometry: positions do not depend on eta or L
    let topo = build_topology(&cfg, &mut substream(cfg.rng_seed, 0)).map_err(config_err)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    for &eta in &etas {
        for floor in 1..=cfg.serving_set_size {
            let mut point = cfg.clone();
            point.blockage_density = eta;
            point.subset_floor = floor;
            point.validate().map_err(config_err)?;

            let users = point.num_users;
            let mut success = Vec::with_capacity(users);
            let mut bound = Vec::with_capacity(users);
            let mut bound_avg = Vec::with_capacity(users);
            for k in 0..users {
                success.push(
                    reliability::success_probability(k, &topo, &point).map_err(reliability_err)?,
                );
                bound.push(
                    reliability::success_upper_bound(k, &topo, &point, MeanBlockage::FixedPosition)
                        .map_err(reliability_err)?,
                );
                bound_avg.push(
                    reliability::success_upper_bound(
                        k,
                        &topo,
                        &point,
                        MeanBlockage::RectangleAveraged,
                    )
                    .map_err(reliability_err)?,
                );
            }
            let theory_outage = 1.0 - success.iter().product::<f64>();
            let bound_outage = 1.0 - bound.iter().product::<f64>();
            let bound_outage_avg = 1.0 - bound_avg.iter().product::<f64>();
            for k in 0..users {
                wtr.serialize(TheoryRow {
                    eta,
                    floor,
                    user: k,
                    success: success[k],
                    success_bound: bound[k],
                    success_bound_avg: bound_avg[k],
                    theory_outage,
                    bound_outage,
                    bound_outage_avg,
                })
                .map_err(io_err)?;
            }
        }
    }
    let bytes = wtr.into_inner().map_err(io_err)?;
    emit(args.common.out.as_ref(), &bytes)
}

pub fn convergence(args: ConvergenceArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let seed = cfg.rng_seed;
    let mut rng = substream(seed, 0);
    let topo = build_topology(&cfg, &mut rng).map_err(config_err)?;
    let set = draw_channel_set(&cfg, &topo, &mut rng);

    let solvers = match args.solver {
        Some(s) => vec![s],
        None => vec![SolverArg::Kkt, SolverArg::Sca],
    };
    let inits = [(InitStrategy::Mrt, "mrt"), (InitStrategy::Random, "random")];

    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> =
        ["solver", "init", "outer", "iteration", "objective", "max_violation"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    header.extend((0..cfg.num_rrus).map(|b| format!("power_{b}")));
    wtr.write_record(&header).map_err(io_err)?;

    // each run on its own substream, so tracing one solver or both never
    // changes the random initializations
    let mut stream = 1;
    for &solver in &solvers {
        for (init, init_name) in inits {
            let mut rng = substream(seed, stream);
            stream += 1;
            let result = run_solver(&set, &topo, &cfg, solver, None, init, &mut rng)?;
            for row in &result.trace {
                let mut record = vec![
                    scheme_of(solver).label().to_string(),
                    init_name.to_string(),
                    row.outer.map(|o| o.to_string()).unwrap_or_default(),
                    row.iteration.to_string(),
                    row.objective.to_string(),
                    row.max_violation.to_string(),
                ];
                record.extend(row.rru_power.iter().map(|p| p.to_string()));
                wtr.write_record(&record).map_err(io_err)?;
            }
        }
    }
    let bytes = wtr.into_inner().map_err(io_err)?;
    emit(args.common.out.as_ref(), &bytes)
}
