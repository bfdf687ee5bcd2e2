//! Replicated Monte-Carlo estimation of the scaled loss.
//!
//! Replications are embarrassingly parallel and deterministically seeded:
//! replication `i` draws from the stream seeded with
//! `derive_seed(master_seed, i)`, results are collected by replication
//! index and reduced sequentially with compensated summation. The
//! estimate is therefore bitwise identical whatever the worker count or
//! scheduling order.

use rayon::prelude::*;

use crate::bandit::{BatchGrid, BatchIncomeModel, ThetaParams};
use crate::error::{Error, Result};
use crate::policy::{argmax_first, ucb_bound, PolicyConfig, PolicyState};
use crate::rng::{derive_seed, KahanSum, NoiseStream, SeededStream};

/// Result of one replication: where the batches went and the realized
/// scaled loss.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationOutcome {
    /// Index of this replication under its master seed; 0 for episodes
    /// run standalone.
    pub rep_index: u64,
    /// Final per-arm batch counts; they sum to the batch count.
    pub final_counts: Vec<u64>,
    /// Realized scaled loss of the episode, always >= 0.
    pub scaled_loss: f64,
}

/// Parameter record echoed alongside every estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateConfig {
    pub exploration: f64,
    pub arms: usize,
    pub batch_size: u64,
    pub batch_count: u64,
    pub horizon: u64,
    pub drifts: Vec<f64>,
    pub master_seed: u64,
}

/// Monte-Carlo estimate of the scaled loss with its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub reps: u64,
    pub config: EstimateConfig,
}

/// Realized scaled loss of one episode:
/// `sum_l (d_max - d_l) * k_l / K`.
///
/// Exactly zero when all drifts are equal, whatever the counts.
pub fn scaled_loss(final_counts: &[u64], drifts: &[f64], batch_count: u64) -> Result<f64> {
    if final_counts.len() != drifts.len() {
        return Err(Error::config(format!(
            "{} counts for {} drifts",
            final_counts.len(),
            drifts.len()
        )));
    }
    debug_assert_eq!(final_counts.iter().sum::<u64>(), batch_count);
    let d_max = drifts.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d));
    let k = batch_count as f64;
    Ok(final_counts
        .iter()
        .zip(drifts)
        .map(|(&count, &d)| (d_max - d) * (count as f64 / k))
        .sum())
}

/// Map a scaled loss back to absolute income units:
/// `sqrt(variance * horizon) * scaled`.
pub fn unscale_loss(scaled: f64, variance: f64, horizon: u64) -> f64 {
    debug_assert!(variance > 0.0 && horizon > 0);
    (variance * horizon as f64).sqrt() * scaled
}

/// Episode loop shared by the harness, the coupling checker and the
/// trace writer. `observe` sees `(step, chosen arm, bounds)` before the
/// state update; the bounds slice is empty during round-robin.
pub(crate) fn drive_concrete<S: NoiseStream>(
    model: &BatchIncomeModel,
    config: &PolicyConfig,
    batch_count: u64,
    stream: &mut S,
    mut observe: impl FnMut(u64, usize, &[f64]),
) -> Result<PolicyState> {
    let arms = config.arms();
    let mut state = PolicyState::new(arms);
    let mut zetas = vec![0.0; arms];
    let mut bounds = Vec::with_capacity(arms);
    for step in 0..batch_count {
        for zeta in zetas.iter_mut() {
            *zeta = stream.perturbation();
        }
        bounds.clear();
        let arm = if state.initialized() {
            for (l, &zeta) in zetas.iter().enumerate() {
                bounds.push(ucb_bound(l, &state, config, zeta)?);
            }
            argmax_first(&bounds).expect("at least two arms")
        } else {
            state.batches() as usize
        };
        observe(step, arm, &bounds);
        let z = stream.normal();
        let income = model.sample(arm, z)?;
        state.update(arm, income)?;
    }
    Ok(state)
}

fn check_compatible(theta: &ThetaParams, grid: &BatchGrid, config: &PolicyConfig) -> Result<()> {
    if theta.arms() != grid.arms() || config.arms() != grid.arms() {
        return Err(Error::config(format!(
            "arm counts disagree: theta {}, grid {}, policy {}",
            theta.arms(),
            grid.arms(),
            config.arms()
        )));
    }
    if config.batch_size() != grid.batch_size() {
        return Err(Error::config(format!(
            "batch sizes disagree: grid {}, policy {}",
            grid.batch_size(),
            config.batch_size()
        )));
    }
    if config.variance() != theta.variance() {
        return Err(Error::config(format!(
            "variances disagree: theta {}, policy {}",
            theta.variance(),
            config.variance()
        )));
    }
    Ok(())
}

/// One row of an episode trace: the batch step (0-based), the chosen arm
/// and the bound vector the choice was made from (empty during the
/// round-robin phase, where no bounds are evaluated).
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub batch: u64,
    pub arm: usize,
    pub bounds: Vec<f64>,
}

/// Simulate one episode recording every selection; same draws, same
/// choices as [`run_episode`] under the same seed.
pub fn trace_episode(
    theta: &ThetaParams,
    grid: &BatchGrid,
    config: &PolicyConfig,
    rep_seed: u64,
) -> Result<Vec<TraceRow>> {
    check_compatible(theta, grid, config)?;
    let model = BatchIncomeModel::new(theta, grid)?;
    let mut rows = Vec::with_capacity(grid.batch_count() as usize);
    let mut stream = SeededStream::new(rep_seed);
    drive_concrete(&model, config, grid.batch_count(), &mut stream, |step, arm, bounds| {
        rows.push(TraceRow {
            batch: step,
            arm,
            bounds: bounds.to_vec(),
        });
    })?;
    Ok(rows)
}

/// Simulate one full episode on the given stream.
pub fn run_episode_with_stream<S: NoiseStream>(
    theta: &ThetaParams,
    grid: &BatchGrid,
    config: &PolicyConfig,
    stream: &mut S,
) -> Result<ReplicationOutcome> {
    check_compatible(theta, grid, config)?;
    let model = BatchIncomeModel::new(theta, grid)?;
    let state = drive_concrete(&model, config, grid.batch_count(), stream, |_, _, _| {})?;
    let loss = scaled_loss(state.counts(), theta.drifts(), grid.batch_count())?;
    Ok(ReplicationOutcome {
        rep_index: 0,
        final_counts: state.counts().to_vec(),
        scaled_loss: loss,
    })
}

/// Simulate one full episode; `rep_seed` fully determines both the
/// perturbation and the income noise draws.
pub fn run_episode(
    theta: &ThetaParams,
    grid: &BatchGrid,
    config: &PolicyConfig,
    rep_seed: u64,
) -> Result<ReplicationOutcome> {
    run_episode_with_stream(theta, grid, config, &mut SeededStream::new(rep_seed))
}

/// Run `reps` independent replications. `workers` bounds the thread
/// count; 0 means all available parallelism, 1 runs inline. The returned
/// outcomes are ordered by replication index.
pub fn run_replications(
    theta: &ThetaParams,
    grid: &BatchGrid,
    config: &PolicyConfig,
    reps: u64,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<ReplicationOutcome>> {
    check_compatible(theta, grid, config)?;
    let run_one = |rep_index: u64| -> Result<ReplicationOutcome> {
        let mut outcome = run_episode(theta, grid, config, derive_seed(master_seed, rep_index))?;
        outcome.rep_index = rep_index;
        Ok(outcome)
    };
    match workers {
        1 => (0..reps).map(run_one).collect(),
        0 => (0..reps).into_par_iter().map(run_one).collect(),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("cannot build {n}-thread pool: {e}")))?
            .install(|| (0..reps).into_par_iter().map(run_one).collect()),
    }
}

/// Monte-Carlo estimate over `reps >= 2` replications: the mean realized
/// scaled loss and its standard error.
pub fn estimate_loss(
    theta: &ThetaParams,
    grid: &BatchGrid,
    config: &PolicyConfig,
    reps: u64,
    master_seed: u64,
    workers: usize,
) -> Result<LossEstimate> {
    if reps < 2 {
        return Err(Error::config(format!(
            "need at least 2 replications for a standard error, got {reps}"
        )));
    }
    let outcomes = run_replications(theta, grid, config, reps, master_seed, workers)?;
    let (mean, stderr) = mean_and_stderr(outcomes.iter().map(|o| o.scaled_loss));
    Ok(LossEstimate {
        mean,
        stderr,
        reps,
        config: EstimateConfig {
            exploration: config.exploration(),
            arms: grid.arms(),
            batch_size: grid.batch_size(),
            batch_count: grid.batch_count(),
            horizon: grid.horizon(),
            drifts: theta.drifts().to_vec(),
            master_seed,
        },
    })
}

/// Sequential compensated reduction in index order; identical losses give
/// a standard error of exactly zero.
fn mean_and_stderr(losses: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut sum = KahanSum::default();
    let mut n = 0u64;
    let mut first = None;
    let mut all_equal = true;
    for x in losses.clone() {
        sum.add(x);
        n += 1;
        match first {
            None => first = Some(x),
            Some(f) => all_equal &= x == f,
        }
    }
    let mean = sum.value() / n as f64;
    if all_equal {
        return (mean, 0.0);
    }
    let mut sq = KahanSum::default();
    for x in losses {
        let d = x - mean;
        sq.add(d * d);
    }
    let sample_sd = (sq.value() / (n - 1) as f64).sqrt();
    (mean, sample_sd / (n as f64).sqrt())
}
