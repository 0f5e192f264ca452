//! Experiment runner: seeds RNG hierarchies, sweeps one variable, runs the
//! per-trial pipeline (draw channel → SVD target → water-filling → fit →
//! metrics), and aggregates results for persistence.

pub mod config;
pub mod output;

use std::time::Instant;

use crate::channel::ChannelModel;
use crate::error::{Result, SimError};
use crate::metrics::{ber_bpsk, capacity_bounds, nmse, sim_capacity, LinkBudget};
use crate::optimizer::{fit, FitResult};
use crate::propagation::{end_to_end, PropagationOperators};
use crate::seeding::{child_seed, tag, trial_seed};
use crate::target::{ideal_capacity, truncated_svd_target, water_filling};

pub use config::{ExperimentConfig, ResolvedPoint, SweepVariable};

/// What a sweep computes per trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Run the SIM phase optimizer (NMSE and interference-aware capacity).
    pub fit: bool,
    /// Also run the BPSK bit-error simulation on the fitted phases.
    pub ber: bool,
    /// Worker threads; 1 selects the fully reproducible sequential path.
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { fit: true, ber: false, threads: 1 }
    }
}

/// One CSV data row: a single (sweep value, trial) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub nmse: Option<f64>,
    pub sim_capacity: Option<f64>,
    pub ideal_capacity: Option<f64>,
    pub bound_lower: Option<f64>,
    pub bound_upper: Option<f64>,
    pub ber: Option<f64>,
    pub iterations: Option<usize>,
    /// Measured fit wall time. Written as 0 in single-threaded mode so that
    /// repeated runs stay byte-identical; timing is reported only when
    /// parallelism already rules out byte-level reproducibility.
    pub wall_time_ms: f64,
}

/// Mean or standard-deviation summary over one sweep point's trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub sweep_value: f64,
    pub stat: AggregateStat,
    pub nmse: Option<f64>,
    pub sim_capacity: Option<f64>,
    pub ideal_capacity: Option<f64>,
    pub bound_lower: Option<f64>,
    pub bound_upper: Option<f64>,
    pub ber: Option<f64>,
    pub iterations: Option<f64>,
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateStat {
    Mean,
    Std,
}

impl AggregateStat {
    pub fn label(&self) -> &'static str {
        match self {
            AggregateStat::Mean => "mean",
            AggregateStat::Std => "std",
        }
    }
}

/// All rows of one sweep point, aggregates included.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutput {
    pub sweep_value: f64,
    pub rows: Vec<ResultRow>,
    pub mean: AggregateRow,
    pub std: AggregateRow,
}

/// Full sweep result in output order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub points: Vec<PointOutput>,
}

struct TrialOutcome {
    row: ResultRow,
    lambda_extremes: (f64, f64),
}

/// Runs the configured sweep: every sweep value × trial gets its own derived
/// seed, so results do not depend on execution order. Any trial failure
/// aborts the sweep, reporting the offending seed.
pub fn run_sweep(config: &ExperimentConfig, opts: &RunOptions) -> Result<SweepOutput> {
    if opts.threads == 0 {
        return Err(SimError::config("thread count must be at least 1"));
    }
    if opts.ber && !opts.fit {
        return Err(SimError::config("BER simulation requires fitting"));
    }
    let sweep = config.sweep()?;
    // Resolve every point up front: configuration errors must surface before
    // any trial runs.
    let points: Vec<(f64, ResolvedPoint)> = sweep
        .values
        .iter()
        .map(|&v| Ok((v, config.at_sweep_point(sweep.variable, v)?.resolve()?)))
        .collect::<Result<_>>()?;
    let ber_bits = opts
        .ber
        .then(|| config.ber.clone().unwrap_or_default().bits_per_stream);

    let mut output = SweepOutput { points: Vec::with_capacity(points.len()) };
    for (point_idx, (value, resolved)) in points.iter().enumerate() {
        let ops = PropagationOperators::new(&resolved.arch);
        let run_one = |trial: usize| -> Result<TrialOutcome> {
            let seed = trial_seed(config.master_seed, point_idx as u64, trial as u64);
            sim_trial(resolved, &ops, *value, trial, seed, opts, ber_bits)
                .map_err(|e| SimError::Trial { seed, source: Box::new(e) })
        };
        let outcomes: Vec<TrialOutcome> = if opts.threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| SimError::config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| {
                use rayon::prelude::*;
                (0..config.trials).into_par_iter().map(run_one).collect::<Result<Vec<_>>>()
            })?
        } else {
            (0..config.trials).map(run_one).collect::<Result<Vec<_>>>()?
        };

        // Eq.-style ensemble bounds over this point's trials; written onto
        // every row of the point so the plotting contract sees them next to
        // each capacity sample.
        let samples: Vec<(f64, f64)> = outcomes.iter().map(|o| o.lambda_extremes).collect();
        let bounds = capacity_bounds(&samples, resolved.arch.streams, &resolved.budget)?;
        let rows: Vec<ResultRow> = outcomes
            .into_iter()
            .map(|o| ResultRow {
                bound_lower: Some(bounds.lower),
                bound_upper: Some(bounds.upper),
                ..o.row
            })
            .collect();
        output.points.push(summarize_point(*value, rows));
    }
    Ok(output)
}

fn sim_trial(
    resolved: &ResolvedPoint,
    ops: &PropagationOperators,
    sweep_value: f64,
    trial: usize,
    seed: u64,
    opts: &RunOptions,
    ber_bits: Option<usize>,
) -> Result<TrialOutcome> {
    let realization = resolved.model.draw_channel(child_seed(seed, tag::CHANNEL));
    let svd = truncated_svd_target(&realization.g, resolved.arch.streams)?;
    let lambda_sq = svd.lambda_sq();
    let allocation =
        water_filling(&lambda_sq, resolved.budget.transmit_power, resolved.budget.noise_power)?;
    let ideal = ideal_capacity(&lambda_sq, &allocation, resolved.budget.noise_power);
    let lambda_extremes = (lambda_sq[0], lambda_sq[resolved.arch.streams - 1]);

    let mut row = ResultRow {
        sweep_value,
        trial,
        seed,
        nmse: None,
        sim_capacity: None,
        ideal_capacity: Some(ideal),
        bound_lower: None,
        bound_upper: None,
        ber: None,
        iterations: None,
        wall_time_ms: 0.0,
    };

    if opts.fit {
        let started = Instant::now();
        let result = fit(
            ops,
            &realization.g,
            &svd.target_matrix,
            &resolved.hyper,
            child_seed(seed, tag::FIT),
        );
        let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
        let h = end_to_end(ops, &result.phases, &realization.g);
        row.nmse = Some(nmse(&h, result.phases.alpha, &svd.target_matrix)?);
        row.sim_capacity = Some(sim_capacity(
            &h,
            result.phases.alpha,
            &allocation,
            resolved.budget.noise_power,
        ));
        row.iterations = Some(result.iterations);
        if opts.threads > 1 {
            row.wall_time_ms = elapsed_ms;
        }
        if let Some(bits) = ber_bits {
            let report = ber_bpsk(
                &result.phases,
                ops,
                &realization.g,
                &allocation,
                resolved.budget.noise_power,
                bits,
                child_seed(seed, tag::BER),
            );
            row.ber = Some(report.aggregate);
        }
    }
    check_finite(&row)?;
    Ok(TrialOutcome { row, lambda_extremes })
}

fn check_finite(row: &ResultRow) -> Result<()> {
    let fields = [
        ("nmse", row.nmse),
        ("sim_capacity", row.sim_capacity),
        ("ideal_capacity", row.ideal_capacity),
        ("ber", row.ber),
    ];
    for (name, value) in fields {
        if let Some(v) = value {
            if !v.is_finite() {
                return Err(SimError::domain(format!("metric {name} is not finite ({v})")));
            }
        }
    }
    Ok(())
}

fn summarize_point(sweep_value: f64, rows: Vec<ResultRow>) -> PointOutput {
    let mean = aggregate(sweep_value, AggregateStat::Mean, &rows);
    let std = aggregate(sweep_value, AggregateStat::Std, &rows);
    PointOutput { sweep_value, rows, mean, std }
}

fn aggregate(sweep_value: f64, stat: AggregateStat, rows: &[ResultRow]) -> AggregateRow {
    let over = |pick: &dyn Fn(&ResultRow) -> Option<f64>| -> Option<f64> {
        let values: Vec<f64> = rows.iter().filter_map(pick).collect();
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        match stat {
            AggregateStat::Mean => Some(mean),
            AggregateStat::Std => {
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / values.len() as f64;
                Some(var.sqrt())
            }
        }
    };
    AggregateRow {
        sweep_value,
        stat,
        nmse: over(&|r| r.nmse),
        sim_capacity: over(&|r| r.sim_capacity),
        ideal_capacity: over(&|r| r.ideal_capacity),
        bound_lower: over(&|r| r.bound_lower),
        bound_upper: over(&|r| r.bound_upper),
        ber: over(&|r| r.ber),
        iterations: over(&|r| r.iterations.map(|i| i as f64)),
        wall_time_ms: over(&|r| Some(r.wall_time_ms)),
    }
}

/// Outcome of a single `fit` command invocation.
#[derive(Debug, Clone)]
pub struct FitRunOutput {
    pub result: FitResult,
    pub ideal_capacity: f64,
    pub sim_capacity: f64,
    pub seed: u64,
}

/// Draws one channel under the base configuration (no sweep) and fits it.
pub fn run_fit(config: &ExperimentConfig) -> Result<FitRunOutput> {
    let resolved = config.resolve()?;
    let ops = PropagationOperators::new(&resolved.arch);
    let seed = trial_seed(config.master_seed, 0, 0);
    let realization = resolved.model.draw_channel(child_seed(seed, tag::CHANNEL));
    let svd = truncated_svd_target(&realization.g, resolved.arch.streams)?;
    let lambda_sq = svd.lambda_sq();
    let allocation =
        water_filling(&lambda_sq, resolved.budget.transmit_power, resolved.budget.noise_power)?;
    let result = fit(
        &ops,
        &realization.g,
        &svd.target_matrix,
        &resolved.hyper,
        child_seed(seed, tag::FIT),
    );
    let h = end_to_end(&ops, &result.phases, &realization.g);
    let sim_cap =
        sim_capacity(&h, result.phases.alpha, &allocation, resolved.budget.noise_power);
    Ok(FitRunOutput {
        ideal_capacity: ideal_capacity(&lambda_sq, &allocation, resolved.budget.noise_power),
        sim_capacity: sim_cap,
        result,
        seed,
    })
}

/// Ergodic capacity of a conventional MIMO array over i.i.d. Rayleigh fading
/// with the same path-loss model: full-precision SVD precoding/combining plus
/// water-filling. Returns the per-trial capacities and their mean.
pub fn mimo_baseline_capacity(
    model: &ChannelModel,
    streams: usize,
    budget: &LinkBudget,
    trials: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    if trials < 1 {
        return Err(SimError::domain("at least one trial required"));
    }
    let mut capacities = Vec::with_capacity(trials);
    for trial in 0..trials {
        let draw = model.draw_channel(child_seed(seed, trial as u64));
        let svd = truncated_svd_target(&draw.g, streams).map_err(|e| SimError::Trial {
            seed: draw.seed,
            source: Box::new(e),
        })?;
        let lambda_sq = svd.lambda_sq();
        let allocation = water_filling(&lambda_sq, budget.transmit_power, budget.noise_power)
            .map_err(|e| SimError::Trial { seed: draw.seed, source: Box::new(e) })?;
        capacities.push(ideal_capacity(&lambda_sq, &allocation, budget.noise_power));
    }
    let mean = capacities.iter().sum::<f64>() / trials as f64;
    Ok((capacities, mean))
}

/// Sweeps the massive-MIMO reference scheme. Only stream, distance, and power
/// sweeps apply; surface-geometry axes are a config error.
pub fn run_baseline(config: &ExperimentConfig, opts: &RunOptions) -> Result<SweepOutput> {
    let sweep = config.sweep()?;
    match sweep.variable {
        SweepVariable::Streams | SweepVariable::Distance | SweepVariable::Power => {}
        other => {
            return Err(SimError::config(format!(
                "sweep variable '{}' does not apply to the antenna-array baseline",
                other.name()
            )));
        }
    }
    let baseline = config
        .baseline
        .clone()
        .ok_or_else(|| SimError::config("the baseline command needs a [baseline] section"))?;

    let mut output = SweepOutput { points: Vec::with_capacity(sweep.values.len()) };
    for (point_idx, &value) in sweep.values.iter().enumerate() {
        let point = config.at_sweep_point(sweep.variable, value)?;
        let streams = point.architecture.streams;
        if streams > baseline.tx_antennas.min(baseline.rx_antennas) {
            return Err(SimError::config(format!(
                "streams {streams} exceed the {}x{} baseline array",
                baseline.tx_antennas, baseline.rx_antennas
            )));
        }
        let budget = point.budget.build()?;
        let model = ChannelModel::iid(
            baseline.rx_antennas,
            baseline.tx_antennas,
            point.channel.pathloss(),
            point.channel.shadowing,
            point.architecture.wavelength_m,
        )
        .map_err(|e| SimError::config(format!("invalid [channel]: {e}")))?;
        let mut rows = Vec::with_capacity(config.trials);
        for trial in 0..config.trials {
            let seed = trial_seed(config.master_seed, point_idx as u64, trial as u64);
            let (caps, _) =
                mimo_baseline_capacity(&model, streams, &budget, 1, child_seed(seed, tag::BASELINE))?;
            let row = ResultRow {
                sweep_value: value,
                trial,
                seed,
                nmse: None,
                sim_capacity: None,
                ideal_capacity: Some(caps[0]),
                bound_lower: None,
                bound_upper: None,
                ber: None,
                iterations: None,
                wall_time_ms: 0.0,
            };
            check_finite(&row).map_err(|e| SimError::Trial { seed, source: Box::new(e) })?;
            rows.push(row);
        }
        let _ = opts;
        output.points.push(summarize_point(value, rows));
    }
    Ok(output)
}

/// Bounds-only sweep: the ideal-policy pipeline without phase fitting.
pub fn run_bounds(config: &ExperimentConfig, opts: &RunOptions) -> Result<SweepOutput> {
    let opts = RunOptions { fit: false, ber: false, ..*opts };
    run_sweep(config, &opts)
}
