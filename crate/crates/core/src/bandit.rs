//! Gaussian bandit parameterization and batch-aggregate income sampling.
//!
//! Arm means differ from a shared baseline by drifts of order sqrt(D/N),
//! the hard regime where expected losses scale like sqrt(N). Incomes are
//! only ever materialized per batch: the sum of M independent N(mean, D)
//! draws is one N(M*mean, M*D) draw, so simulating at batch granularity
//! is distributionally exact and M times cheaper.

use crate::error::{Error, Result};

/// Validation bound on |drift| used when none is given explicitly.
pub const DEFAULT_DRIFT_BOUND: f64 = 10.0;

/// Arm-set parameters: a baseline mean, a known per-step variance, and
/// one dimensionless drift per arm. Arm means are
/// `baseline + drift * sqrt(variance / horizon)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaParams {
    baseline_mean: f64,
    variance: f64,
    drifts: Vec<f64>,
    drift_bound: f64,
}

impl ThetaParams {
    /// Build with the default drift bound.
    pub fn new(baseline_mean: f64, variance: f64, drifts: Vec<f64>) -> Result<Self> {
        Self::with_drift_bound(baseline_mean, variance, drifts, DEFAULT_DRIFT_BOUND)
    }

    pub fn with_drift_bound(
        baseline_mean: f64,
        variance: f64,
        drifts: Vec<f64>,
        drift_bound: f64,
    ) -> Result<Self> {
        if !baseline_mean.is_finite() {
            return Err(Error::config(format!(
                "baseline mean must be finite, got {baseline_mean}"
            )));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::config(format!(
                "variance must be positive and finite, got {variance}"
            )));
        }
        if !(drift_bound.is_finite() && drift_bound > 0.0) {
            return Err(Error::config(format!(
                "drift bound must be positive and finite, got {drift_bound}"
            )));
        }
        if drifts.len() < 2 {
            return Err(Error::config(format!(
                "need at least two arms, got {}",
                drifts.len()
            )));
        }
        for (arm, &d) in drifts.iter().enumerate() {
            if !d.is_finite() || d.abs() > drift_bound {
                return Err(Error::config(format!(
                    "drift {d} of arm {arm} outside [-{drift_bound}, {drift_bound}]"
                )));
            }
        }
        Ok(Self {
            baseline_mean,
            variance,
            drifts,
            drift_bound,
        })
    }

    pub fn baseline_mean(&self) -> f64 {
        self.baseline_mean
    }

    /// Per-step income variance (known, shared by all arms).
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn drifts(&self) -> &[f64] {
        &self.drifts
    }

    pub fn drift_bound(&self) -> f64 {
        self.drift_bound
    }

    pub fn arms(&self) -> usize {
        self.drifts.len()
    }

    /// Per-step arm means on the given grid:
    /// `mean_l = baseline + drift_l * sqrt(variance / horizon)`.
    pub fn arm_means(&self, grid: &BatchGrid) -> Vec<f64> {
        let scale = (self.variance / grid.horizon() as f64).sqrt();
        self.drifts
            .iter()
            .map(|d| self.baseline_mean + d * scale)
            .collect()
    }
}

/// Horizon bookkeeping: J arms, batches of M items, K batches, N = M*K
/// items in total, and the unit-horizon step epsilon = 1/K.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchGrid {
    arms: usize,
    batch_size: u64,
    batch_count: u64,
}

impl BatchGrid {
    /// Grid from the batch count; the horizon is `batch_size * batch_count`.
    pub fn from_batches(arms: usize, batch_size: u64, batch_count: u64) -> Result<Self> {
        if arms < 2 {
            return Err(Error::config(format!("need at least two arms, got {arms}")));
        }
        if batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        // The rule needs the full round-robin pass plus at least one
        // bound-driven selection.
        if batch_count < arms as u64 + 1 {
            return Err(Error::config(format!(
                "batch count {batch_count} must be at least arms + 1 = {}",
                arms as u64 + 1
            )));
        }
        if batch_size.checked_mul(batch_count).is_none() {
            return Err(Error::config(format!(
                "horizon {batch_size} * {batch_count} overflows"
            )));
        }
        Ok(Self {
            arms,
            batch_size,
            batch_count,
        })
    }

    /// Grid from the total item horizon, which must split into whole batches.
    pub fn from_horizon(arms: usize, batch_size: u64, horizon: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if horizon == 0 || !horizon.is_multiple_of(batch_size) {
            return Err(Error::config(format!(
                "horizon {horizon} is not a positive multiple of batch size {batch_size}"
            )));
        }
        Self::from_batches(arms, batch_size, horizon / batch_size)
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn batch_size(&self) -> u64 {
        self.batch_size
    }

    pub fn batch_count(&self) -> u64 {
        self.batch_count
    }

    pub fn horizon(&self) -> u64 {
        self.batch_size * self.batch_count
    }

    /// Unit-horizon step, 1 / batch_count.
    pub fn epsilon(&self) -> f64 {
        1.0 / self.batch_count as f64
    }
}

/// Precomputed batch-income distribution for one (theta, grid) pair:
/// a batch of arm `l` yields `batch_size * mean_l + sqrt(batch_size *
/// variance) * z` with `z` standard normal.
#[derive(Clone, Debug)]
pub struct BatchIncomeModel {
    batch_means: Vec<f64>,
    noise_scale: f64,
}

impl BatchIncomeModel {
    pub fn new(theta: &ThetaParams, grid: &BatchGrid) -> Result<Self> {
        if theta.arms() != grid.arms() {
            return Err(Error::config(format!(
                "theta has {} arms but grid has {}",
                theta.arms(),
                grid.arms()
            )));
        }
        let m = grid.batch_size() as f64;
        let batch_means = theta
            .arm_means(grid)
            .into_iter()
            .map(|mean| m * mean)
            .collect();
        Ok(Self {
            batch_means,
            noise_scale: (m * theta.variance()).sqrt(),
        })
    }

    pub fn arms(&self) -> usize {
        self.batch_means.len()
    }

    /// Batch-aggregate income of `arm` for the standard-normal draw `z`.
    pub fn sample(&self, arm: usize, z: f64) -> Result<f64> {
        match self.batch_means.get(arm) {
            Some(mean) => Ok(mean + self.noise_scale * z),
            None => Err(Error::ArmOutOfRange {
                arm,
                arms: self.batch_means.len(),
            }),
        }
    }
}

/// One batch-aggregate income draw; see [`BatchIncomeModel::sample`].
pub fn sample_batch_income(arm: usize, theta: &ThetaParams, grid: &BatchGrid, z: f64) -> Result<f64> {
    BatchIncomeModel::new(theta, grid)?.sample(arm, z)
}
