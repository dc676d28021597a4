//! Random topologies, Monte-Carlo validation of the fusion model, and the
//! distance-spread sweep comparing optimal and uniform power.
//!
//! Everything here runs in `f64`. Randomness comes from `ChaCha8Rng` streams
//! seeded through [`mix_seed`], so results depend only on the seeds and never
//! on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::alloc_l1::solve_l1;
use crate::alloc_l2::{solve_l2, L2SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::model::{
    db_to_linear, dbm_to_watts, distortion_floor, Allocation, BlueWeights, NetworkInstance, Norm, ProblemSpec,
    SensorSpec,
};
use crate::oracles::{relative_power_savings, solve_uniform};

/// Largest distance spread for which the uniform distance law stays positive.
pub const MAX_R_RATIO: f64 = 0.55;

/// Recipe for a random network.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyParams {
    pub k: usize,
    /// `std(d) / mean(d)`.
    pub r_ratio: f64,
    pub mean_distance: f64,
    pub g0_db: f64,
    pub exponent: f64,
    pub xi2_dbm: f64,
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    pub w: f64,
    pub bandwidth: f64,
    pub seed: u64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self {
            k: 100,
            r_ratio: 0.0,
            mean_distance: 80.0,
            g0_db: -30.0,
            exponent: 3.5,
            xi2_dbm: -90.0,
            sigma2_min: 0.01,
            sigma2_max: 0.08,
            w: 1.0,
            bandwidth: 1.0e4,
            seed: 0,
        }
    }
}

impl TopologyParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if !(0.0..=MAX_R_RATIO).contains(&self.r_ratio) {
            return Err(invalid(format!(
                "R = {} outside [0, {MAX_R_RATIO}] (distances must stay positive)",
                self.r_ratio
            )));
        }
        if !(self.mean_distance > 0.0) {
            return Err(invalid("mean_distance must be positive"));
        }
        if !(self.sigma2_min > 0.0 && self.sigma2_min <= self.sigma2_max && self.sigma2_max.is_finite()) {
            return Err(invalid(format!(
                "need 0 < sigma2_min <= sigma2_max, got [{}, {}]",
                self.sigma2_min, self.sigma2_max
            )));
        }
        for (name, v) in [
            ("g0_dB", self.g0_db),
            ("exponent", self.exponent),
            ("xi2_dBm", self.xi2_dbm),
        ] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        if !(self.w > 0.0) || !(self.bandwidth > 0.0) {
            return Err(invalid("W and bandwidth must be positive"));
        }
        Ok(())
    }

    pub fn with_r_ratio(&self, r_ratio: f64) -> Self {
        Self {
            r_ratio,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a master seed and coordinates.
pub fn mix_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(master), |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Distances i.i.d. uniform on `[mu(1 - sqrt3 R), mu(1 + sqrt3 R)]` (mean `mu`,
/// standard deviation `mu R`), variances i.i.d. uniform on
/// `[sigma2_min, sigma2_max]`, path-loss gains, common channel noise.
pub fn generate_topology(p: &TopologyParams) -> Result<NetworkInstance<f64>> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let half_width = 3.0_f64.sqrt() * p.r_ratio * p.mean_distance;
    let g0 = db_to_linear(p.g0_db);
    let xi2 = dbm_to_watts(p.xi2_dbm);
    let mut sensors = Vec::with_capacity(p.k);
    for _ in 0..p.k {
        let d = if half_width > 0.0 {
            rng.random_range(p.mean_distance - half_width..=p.mean_distance + half_width)
        } else {
            p.mean_distance
        };
        let sigma2 = if p.sigma2_max > p.sigma2_min {
            rng.random_range(p.sigma2_min..=p.sigma2_max)
        } else {
            p.sigma2_min
        };
        sensors.push(SensorSpec::at_distance(sigma2, d, g0, p.exponent, xi2)?);
    }
    NetworkInstance::new(p.w, sensors, p.bandwidth)
}

/// `factor` times the median distortion floor of `draws` topologies at the
/// given parameters.
pub fn pilot_distortion_target(p: &TopologyParams, draws: usize, factor: f64, seed: u64) -> Result<f64> {
    if draws == 0 {
        return Err(invalid("pilot needs at least one draw"));
    }
    let mut floors = (0..draws)
        .map(|i| generate_topology(&p.with_seed(mix_seed(seed, &[0x5049_4c4f_54, i as u64]))).map(|n| distortion_floor(&n)))
        .collect::<Result<Vec<f64>>>()?;
    floors.sort_by(f64::total_cmp);
    let mid = floors.len() / 2;
    let median = if floors.len() % 2 == 1 {
        floors[mid]
    } else {
        0.5 * (floors[mid - 1] + floors[mid])
    };
    Ok(factor * median)
}

/// A random feasible problem with parameters in the ranges of the default
/// topology: `K` in `1..=20`, spread up to 0.5, mean distance 20–120 m,
/// `D0` between 1.01 and 5 times the floor, `W` in `[0.5, 2]`.
pub fn random_problem(seed: u64, norm: Norm) -> Result<ProblemSpec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = TopologyParams {
        k: rng.random_range(1..=20),
        r_ratio: rng.random_range(0.0..=0.5),
        mean_distance: rng.random_range(20.0..=120.0),
        w: rng.random_range(0.5..=2.0),
        seed: rng.random(),
        ..TopologyParams::default()
    };
    let net = generate_topology(&params)?;
    let factor = (rng.random_range(1.01_f64.ln()..=5.0_f64.ln())).exp();
    let d0 = factor * distortion_floor(&net);
    ProblemSpec::new(net, d0, norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    Uniform,
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
        })
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "uniform" => Ok(NoiseKind::Uniform),
            other => Err(invalid(format!("unknown noise kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    pub trials: usize,
    pub theta: f64,
    pub noise_kind: NoiseKind,
    pub seed: u64,
    /// Multiplies every noise sample; `0` gives noiseless observations.
    pub noise_scale: f64,
}

impl SimulationOptions {
    pub fn new(trials: usize, theta: f64, noise_kind: NoiseKind, seed: u64) -> Self {
        Self {
            trials,
            theta,
            noise_kind,
            seed,
            noise_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimationReport {
    pub trials: usize,
    pub empirical_mse: f64,
    /// BLUE variance scaled by `noise_scale^2`.
    pub analytic_mse: f64,
    pub empirical_bias: f64,
    /// Standard error of `empirical_bias`.
    pub bias_std_error: f64,
    pub noise_kind: NoiseKind,
    pub theta: f64,
}

impl McEstimationReport {
    /// `|empirical - analytic| / analytic`. A zero target (noiseless run)
    /// accepts errors at the rounding level of `theta`.
    pub fn rel_error(&self) -> f64 {
        if self.analytic_mse == 0.0 {
            let rounding = 16.0 * f64::EPSILON * self.theta.abs().max(f64::MIN_POSITIVE);
            if self.empirical_mse <= rounding * rounding {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.empirical_mse - self.analytic_mse).abs() / self.analytic_mse
        }
    }
}

const TRIAL_CHUNK: usize = 1 << 16;

/// Draws `y = h theta + v` repeatedly and applies the BLUE estimator.
///
/// Observation noise has variance `sigma2_k` with the chosen shape; channel
/// noise is gaussian with variance `xi2_k`.
pub fn simulate_estimation(
    net: &NetworkInstance<f64>,
    alloc: &Allocation<f64>,
    opts: &SimulationOptions,
) -> Result<McEstimationReport> {
    if opts.trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    if opts.theta.abs() > net.w() {
        return Err(invalid(format!("|theta| = {} exceeds W = {}", opts.theta.abs(), net.w())));
    }
    if !(opts.noise_scale >= 0.0) {
        return Err(invalid("noise_scale must be nonnegative"));
    }
    let weights = BlueWeights::new(&alloc.alpha, net)?;
    let analytic = crate::model::analytic_mse(&alloc.alpha, net)? * opts.noise_scale * opts.noise_scale;
    let amplitude: Vec<f64> = net
        .sensors()
        .iter()
        .zip(&alloc.alpha)
        .map(|(s, &a)| (a * s.gain).sqrt())
        .collect();
    let obs_sd: Vec<f64> = net.sensors().iter().map(|s| s.sigma2.sqrt()).collect();
    let chan_sd: Vec<f64> = net.sensors().iter().map(|s| s.xi2.sqrt()).collect();

    let chunks = opts.trials.div_ceil(TRIAL_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = TRIAL_CHUNK.min(opts.trials - c * TRIAL_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, &[c as u64]));
            let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
            let unit_uniform = Uniform::new_inclusive(-3.0_f64.sqrt(), 3.0_f64.sqrt()).expect("bounded uniform");
            let mut y = vec![0.0; amplitude.len()];
            let (mut err_sum, mut sq_sum) = (0.0, 0.0);
            for _ in 0..n {
                for k in 0..y.len() {
                    let shape = match opts.noise_kind {
                        NoiseKind::Gaussian => std_normal.sample(&mut rng),
                        NoiseKind::Uniform => unit_uniform.sample(&mut rng),
                    };
                    let obs = opts.noise_scale * obs_sd[k] * shape;
                    let chan = opts.noise_scale * chan_sd[k] * std_normal.sample(&mut rng);
                    y[k] = amplitude[k] * (opts.theta + obs) + chan;
                }
                let e = weights.apply(&y) - opts.theta;
                err_sum += e;
                sq_sum += e * e;
            }
            (err_sum, sq_sum)
        })
        .collect();
    let (err_sum, sq_sum) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), &(e, s)| (a + e, b + s));
    let n = opts.trials as f64;
    let bias = err_sum / n;
    let mse = sq_sum / n;
    let var = (mse - bias * bias).max(0.0) * if n > 1.0 { n / (n - 1.0) } else { 1.0 };
    Ok(McEstimationReport {
        trials: opts.trials,
        empirical_mse: mse,
        analytic_mse: analytic,
        empirical_bias: bias,
        bias_std_error: (var / n).sqrt(),
        noise_kind: opts.noise_kind,
        theta: opts.theta,
    })
}

/// One aggregated line of a distance-spread sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub r_ratio: f64,
    pub runs: usize,
    pub mean_savings: f64,
    pub std_savings: f64,
    pub mean_active: f64,
    pub std_active: f64,
    pub mean_j_opt: f64,
    pub mean_j_uniform: f64,
    pub infeasible_redraws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Base topology; its `r_ratio` and `seed` are overridden per run.
    pub params: TopologyParams,
    pub r_values: Vec<f64>,
    pub runs: usize,
    pub norm: Norm,
    pub d0: f64,
    pub master_seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct RunOutcome {
    savings: f64,
    active: f64,
    j_opt: f64,
    j_uniform: f64,
    redraws: usize,
}

const MAX_ATTEMPTS: usize = 1000;

fn solve_optimal(prob: &ProblemSpec<f64>) -> Result<Allocation<f64>> {
    match prob.norm {
        Norm::L1 => solve_l1(prob),
        Norm::L2 => solve_l2(prob, &L2SolverOptions::default()),
    }
}

fn run_once(cfg: &SweepConfig, ri: usize, run: usize) -> Result<RunOutcome> {
    let base = cfg.params.with_r_ratio(cfg.r_values[ri]);
    for attempt in 0..MAX_ATTEMPTS {
        let seed = mix_seed(cfg.master_seed, &[ri as u64, run as u64, attempt as u64]);
        let net = generate_topology(&base.with_seed(seed))?;
        let prob = ProblemSpec::new(net, cfg.d0, cfg.norm)?;
        if prob.ensure_feasible().is_err() {
            continue;
        }
        let opt = solve_optimal(&prob)?;
        let uniform = solve_uniform(&prob)?.allocation;
        let savings = relative_power_savings(opt.objective, uniform.objective)?;
        return Ok(RunOutcome {
            savings,
            active: opt.active_count as f64,
            j_opt: opt.objective,
            j_uniform: uniform.objective,
            redraws: attempt,
        });
    }
    Err(Error::Configuration(format!(
        "no feasible topology in {MAX_ATTEMPTS} draws at R = {} (D0 = {:e})",
        cfg.r_values[ri], cfg.d0
    )))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Paired optimal-vs-uniform comparison over `runs` random topologies for each
/// spread in `r_values`.
///
/// Run `(i, j)` uses topology seeds `mix_seed(master, [i, j, attempt])`;
/// infeasible draws are redrawn with the next attempt index and counted. More
/// than half the draws at one spread being infeasible is a configuration
/// error.
pub fn sweep_r(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.runs == 0 {
        return Err(invalid("runs must be at least 1"));
    }
    if cfg.r_values.is_empty() {
        return Err(invalid("no R values to sweep"));
    }
    for &r in &cfg.r_values {
        cfg.params.with_r_ratio(r).validate()?;
    }
    let tasks: Vec<(usize, usize)> = (0..cfg.r_values.len())
        .flat_map(|ri| (0..cfg.runs).map(move |run| (ri, run)))
        .collect();
    let compute = || -> Result<Vec<RunOutcome>> {
        tasks
            .par_iter()
            .map(|&(ri, run)| run_once(cfg, ri, run))
            .collect()
    };
    let outcomes = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Configuration(format!("thread pool: {e}")))?
            .install(compute)?,
        None => compute()?,
    };

    cfg.r_values
        .iter()
        .enumerate()
        .map(|(ri, &r_ratio)| {
            let rows = &outcomes[ri * cfg.runs..(ri + 1) * cfg.runs];
            let redraws: usize = rows.iter().map(|o| o.redraws).sum();
            if 2 * redraws > redraws + cfg.runs {
                return Err(Error::Configuration(format!(
                    "{redraws} of {} draws infeasible at R = {r_ratio}; D0 = {:e} is too aggressive",
                    redraws + cfg.runs,
                    cfg.d0
                )));
            }
            let savings: Vec<f64> = rows.iter().map(|o| o.savings).collect();
            let active: Vec<f64> = rows.iter().map(|o| o.active).collect();
            let (mean_savings, std_savings) = mean_std(&savings);
            let (mean_active, std_active) = mean_std(&active);
            Ok(SweepRow {
                r_ratio,
                runs: cfg.runs,
                mean_savings,
                std_savings,
                mean_active,
                std_active,
                mean_j_opt: mean_std(&rows.iter().map(|o| o.j_opt).collect::<Vec<_>>()).0,
                mean_j_uniform: mean_std(&rows.iter().map(|o| o.j_uniform).collect::<Vec<_>>()).0,
                infeasible_redraws: redraws,
            })
        })
        .collect()
}
