use std::time::Instant;

use wsnpl_core::experiments::{
    generate_topology, mix_seed, pilot_distortion_target, random_problem, simulate_estimation, sweep_r, McEstimationReport,
    SimulationOptions, SweepConfig, SweepRow,
};
use wsnpl_core::model::{Allocation, NetworkInstance, ProblemSpec};
use wsnpl_core::oracles::{projected_descent, solve_l1_bisection};
use wsnpl_core::scalar::relative_difference;
use wsnpl_core::{analytic_mse, solve_l1, solve_l2, L2SolverOptions, Norm};

use crate::config::{RunConfig, Source, Target};
use crate::error::{CliError, Result};
use crate::svg::{self, Panel, Series};
use crate::table::{sci, Cell, Table};

const PILOT_STREAM: u64 = 1;
const VALIDATE_STREAM: u64 = 2;

/// Agreement bound for the oracle cross-check.
pub const ORACLE_TOLERANCE: f64 = 1e-6;
/// Relative MSE error accepted by validation at `CERTIFIED_TRIALS` or more.
pub const VALIDATION_TOLERANCE: f64 = 0.03;
pub const CERTIFIED_TRIALS: usize = 1_000_000;

/// Network and distortion target a command operates on, with a note on how
/// the target was chosen.
pub struct Instance {
    pub problem: ProblemSpec<f64>,
    pub d0_note: String,
}

pub fn network(cfg: &RunConfig) -> Result<NetworkInstance<f64>> {
    match &cfg.source {
        Some(Source::Sensors(net)) => Ok(net.clone()),
        Some(Source::Topology(p)) => Ok(generate_topology(p)?),
        None => Err(CliError::Config("config needs a [topology] or [sensors] section".into())),
    }
}

/// Resolves `D0`. For one network `auto` means `pilot_factor` times its own
/// floor; a sweep (`net = None`) needs one target for every draw, so it takes
/// the pilot median over `R = 0` topologies instead.
pub fn distortion_target(cfg: &RunConfig, net: Option<&NetworkInstance<f64>>) -> Result<(f64, String)> {
    let p = &cfg.problem;
    match (p.d0, net, &cfg.source) {
        (Target::Fixed(v), _, _) => Ok((v, format!("D0 = {} (fixed)", sci(v)))),
        (Target::Auto, Some(net), _) => {
            let d0 = p.pilot_factor * wsnpl_core::distortion_floor(net);
            Ok((d0, format!("D0 = {} (auto: {} x distortion floor)", sci(d0), p.pilot_factor)))
        }
        (Target::Auto, None, Some(Source::Topology(t))) => {
            let seed = mix_seed(p.seed, &[PILOT_STREAM]);
            let d0 = pilot_distortion_target(&t.with_r_ratio(0.0), p.pilot_draws, p.pilot_factor, seed)?;
            Ok((
                d0,
                format!(
                    "D0 = {} (auto: {} x median distortion floor of {} pilot draws at R = 0)",
                    sci(d0),
                    p.pilot_factor,
                    p.pilot_draws
                ),
            ))
        }
        (Target::Auto, None, _) => {
            let net = network(cfg)?;
            let d0 = p.pilot_factor * wsnpl_core::distortion_floor(&net);
            Ok((d0, format!("D0 = {} (auto: {} x distortion floor)", sci(d0), p.pilot_factor)))
        }
    }
}

pub fn instance(cfg: &RunConfig) -> Result<Instance> {
    let net = network(cfg)?;
    let (d0, d0_note) = distortion_target(cfg, Some(&net))?;
    let problem = ProblemSpec::new(net, d0, cfg.problem.norm)?;
    Ok(Instance { problem, d0_note })
}

fn solve(prob: &ProblemSpec<f64>) -> Result<Allocation<f64>> {
    Ok(match prob.norm {
        Norm::L1 => solve_l1(prob)?,
        Norm::L2 => solve_l2(prob, &L2SolverOptions::default())?,
    })
}

pub struct SolveReport {
    pub sensors: Table,
    pub summary: Table,
    pub allocation: Allocation<f64>,
}

pub fn cmd_solve(inst: &Instance) -> Result<SolveReport> {
    let prob = &inst.problem;
    let net = &prob.network;
    let alloc = solve(prob)?;
    let mut sensors = Table::new(&["index", "distance_m", "gain", "sigma2", "r", "alpha", "node_power_w", "active"]);
    for (k, s) in net.sensors().iter().enumerate() {
        sensors.push(vec![
            (k + 1).into(),
            s.distance.into(),
            s.gain.into(),
            s.sigma2.into(),
            alloc.r[k].into(),
            alloc.alpha[k].into(),
            alloc.node_powers[k].into(),
            usize::from(alloc.is_active(k)).into(),
        ]);
    }
    let mut summary = Table::new(&["norm", "D0", "K1", "lambda0", "objective", "distortion"]);
    summary.push(vec![
        Cell::Text(prob.norm.to_string()),
        prob.d0.into(),
        alloc.active_count.into(),
        alloc.lambda0.into(),
        alloc.objective.into(),
        analytic_mse(&alloc.alpha, net)?.into(),
    ]);
    Ok(SolveReport {
        sensors,
        summary,
        allocation: alloc,
    })
}

pub struct SweepReport {
    pub table: Table,
    pub rows: Vec<SweepRow>,
    pub d0_note: String,
}

pub fn cmd_sweep(cfg: &RunConfig, threads: Option<usize>) -> Result<SweepReport> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] section".into()))?;
    let params = cfg
        .topology()
        .ok_or_else(|| CliError::Config("sweep needs a [topology] section".into()))?;
    let (d0, d0_note) = distortion_target(cfg, None)?;
    let rows = sweep_r(&SweepConfig {
        params: params.clone(),
        r_values: sweep.r_values.clone(),
        runs: sweep.runs,
        norm: cfg.problem.norm,
        d0,
        master_seed: cfg.problem.seed,
        threads,
    })?;
    let mut table = Table::new(&[
        "R",
        "runs",
        "mean_savings",
        "std_savings",
        "mean_active",
        "std_active",
        "mean_J_opt",
        "mean_J_uniform",
        "infeasible_redraws",
    ]);
    for r in &rows {
        table.push(vec![
            r.r_ratio.into(),
            r.runs.into(),
            r.mean_savings.into(),
            r.std_savings.into(),
            r.mean_active.into(),
            r.std_active.into(),
            r.mean_j_opt.into(),
            r.mean_j_uniform.into(),
            r.infeasible_redraws.into(),
        ]);
    }
    Ok(SweepReport { table, rows, d0_note })
}

pub fn sweep_plot(rows: &[SweepRow], k: usize) -> String {
    let savings = Panel {
        title: &format!("Relative power savings vs uniform, K = {k}"),
        x_label: "R = std(d) / mean(d)",
        y_label: "mean savings (%)",
        series: vec![Series {
            label: "optimal vs uniform",
            points: rows.iter().map(|r| (r.r_ratio, 100.0 * r.mean_savings)).collect(),
        }],
    };
    let active = Panel {
        title: &format!("Active sensors, K = {k}"),
        x_label: "R = std(d) / mean(d)",
        y_label: "mean active count",
        series: vec![Series {
            label: "K1",
            points: rows.iter().map(|r| (r.r_ratio, r.mean_active)).collect(),
        }],
    };
    svg::render(&[savings, active])
}

pub struct ValidateReport {
    pub table: Table,
    pub runs: Vec<McEstimationReport>,
    pub certified: bool,
}

pub fn cmd_validate(cfg: &RunConfig, inst: &Instance, noiseless: bool) -> Result<ValidateReport> {
    let prob = &inst.problem;
    let alloc = solve(prob)?;
    let v = &cfg.validate;
    let theta = v.theta.unwrap_or(0.5 * prob.network.w());
    let mut table = Table::new(&["noise_kind", "trials", "analytic_mse", "empirical_mse", "rel_error", "empirical_bias"]);
    let mut runs = Vec::new();
    for (i, &kind) in v.noise_kinds.iter().enumerate() {
        let mut opts = SimulationOptions::new(
            v.trials,
            theta,
            kind,
            mix_seed(cfg.problem.seed, &[VALIDATE_STREAM, i as u64]),
        );
        if noiseless {
            opts.noise_scale = 0.0;
        }
        let rep = simulate_estimation(&prob.network, &alloc, &opts)?;
        table.push(vec![
            Cell::Text(kind.to_string()),
            rep.trials.into(),
            rep.analytic_mse.into(),
            rep.empirical_mse.into(),
            rep.rel_error().into(),
            rep.empirical_bias.into(),
        ]);
        runs.push(rep);
    }
    Ok(ValidateReport {
        table,
        runs,
        certified: v.trials >= CERTIFIED_TRIALS,
    })
}

impl ValidateReport {
    pub fn failures(&self) -> Vec<String> {
        if !self.certified {
            return Vec::new();
        }
        self.runs
            .iter()
            .filter(|r| !(r.rel_error() <= VALIDATION_TOLERANCE))
            .map(|r| format!("{}: relative MSE error {:.4} > {VALIDATION_TOLERANCE}", r.noise_kind, r.rel_error()))
            .collect()
    }
}

/// Largest per-gain and objective relative differences of the bisection and
/// descent oracles against the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub k: usize,
    pub active: usize,
    pub alpha_bisection: f64,
    pub alpha_descent: f64,
    pub objective_bisection: f64,
    pub objective_descent: f64,
}

impl Agreement {
    pub fn worst(&self) -> f64 {
        self.alpha_bisection
            .max(self.alpha_descent)
            .max(self.objective_bisection)
            .max(self.objective_descent)
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| relative_difference(x, y)).fold(0.0, f64::max)
}

/// Cross-checks the closed-form L1 allocation on `prob` (solved as an L1
/// program whatever its norm tag).
pub fn agreement(prob: &ProblemSpec<f64>) -> Result<Agreement> {
    let prob = prob.with_norm(Norm::L1);
    let closed = solve_l1(&prob)?;
    let bis = solve_l1_bisection(&prob, 1e-15)?.allocation;
    let pd = projected_descent(&prob, Norm::L1, 500, 1e-13)
        .map_err(|e| CliError::Disagreement(format!("projected descent failed: {e}")))?
        .allocation;
    Ok(Agreement {
        k: prob.network.len(),
        active: closed.active_count,
        alpha_bisection: max_diff(&closed.alpha, &bis.alpha),
        alpha_descent: max_diff(&closed.alpha, &pd.alpha),
        objective_bisection: relative_difference(closed.objective, bis.objective),
        objective_descent: relative_difference(closed.objective, pd.objective),
    })
}

pub struct OracleReport {
    pub table: Table,
    pub worst: f64,
    pub instances: usize,
    pub elapsed_s: f64,
}

const AGREEMENT_COLUMNS: [&str; 4] = [
    "alpha_diff_bisection",
    "alpha_diff_descent",
    "objective_diff_bisection",
    "objective_diff_descent",
];

fn agreement_cells(a: &Agreement) -> Vec<Cell> {
    vec![
        a.alpha_bisection.into(),
        a.alpha_descent.into(),
        a.objective_bisection.into(),
        a.objective_descent.into(),
    ]
}

pub fn cmd_oracle_instance(inst: &Instance) -> Result<OracleReport> {
    let start = Instant::now();
    let a = agreement(&inst.problem)?;
    let mut header = vec!["K", "K1"];
    header.extend(AGREEMENT_COLUMNS);
    let mut table = Table::new(&header);
    let mut row: Vec<Cell> = vec![a.k.into(), a.active.into()];
    row.extend(agreement_cells(&a));
    table.push(row);
    Ok(OracleReport {
        table,
        worst: a.worst(),
        instances: 1,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

/// Batch over `random_problem(seed + i)` for `i < count`; reports the
/// worst coordinate of each difference.
pub fn cmd_oracle_batch(seed: u64, count: usize) -> Result<OracleReport> {
    let start = Instant::now();
    let mut worst = Agreement {
        k: 0,
        active: 0,
        alpha_bisection: 0.0,
        alpha_descent: 0.0,
        objective_bisection: 0.0,
        objective_descent: 0.0,
    };
    let mut shut_off = 0;
    let mut k_max = 0;
    for i in 0..count as u64 {
        let prob = random_problem(seed.wrapping_add(i), Norm::L1)?;
        let a = agreement(&prob)?;
        if a.active < a.k {
            shut_off += 1;
        }
        k_max = k_max.max(a.k);
        worst.alpha_bisection = worst.alpha_bisection.max(a.alpha_bisection);
        worst.alpha_descent = worst.alpha_descent.max(a.alpha_descent);
        worst.objective_bisection = worst.objective_bisection.max(a.objective_bisection);
        worst.objective_descent = worst.objective_descent.max(a.objective_descent);
    }
    let mut header = vec!["instances", "K_max", "shut_off_instances"];
    header.extend(AGREEMENT_COLUMNS);
    let mut table = Table::new(&header);
    let mut row: Vec<Cell> = vec![count.into(), k_max.into(), shut_off.into()];
    row.extend(agreement_cells(&worst));
    table.push(row);
    Ok(OracleReport {
        table,
        worst: worst.worst(),
        instances: count,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}
