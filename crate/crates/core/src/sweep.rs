//! Drift-gap sweeps and their CSV schema.
//!
//! The default sweep mode is the symmetric two-arm family with drifts
//! `(+d/2, -d/2)` over a uniform gap grid; an explicit per-vector mode
//! covers more than two arms. Every grid point gets its own derived
//! master seed, so points are independent and the whole curve is a pure
//! function of the configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::bandit::{BatchGrid, ThetaParams, DEFAULT_DRIFT_BOUND};
use crate::error::{Error, Result};
use crate::harness::{estimate_loss, LossEstimate};
use crate::policy::PolicyConfig;
use crate::rng::derive_seed;

/// Golden CSV header; stable, tested verbatim.
pub const CURVE_CSV_HEADER: &str = "d,l_hat,stderr,reps,a,J,M,K,N,seed";

/// Baseline mean and per-step variance used by sweeps. The scaled loss
/// is invariant to both, so they are not configurable.
const SWEEP_BASELINE_MEAN: f64 = 0.0;
const SWEEP_VARIANCE: f64 = 1.0;

/// Total horizon given either as items N or as batches K; the other is
/// derived through the batch size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HorizonSpec {
    Items(u64),
    Batches(u64),
}

/// The drift grid: a symmetric two-arm gap range, or explicit per-arm
/// drift vectors listed in strictly increasing order of their gap
/// (largest drift minus smallest).
#[derive(Clone, Debug, PartialEq)]
pub enum DriftGridSpec {
    SymmetricGap { min: f64, max: f64, step: f64 },
    Explicit(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub exploration: f64,
    pub arms: usize,
    pub batch_size: u64,
    pub horizon: HorizonSpec,
    pub grid: DriftGridSpec,
    pub reps: u64,
    pub master_seed: u64,
    /// Thread bound for replications; 0 means all available parallelism.
    pub workers: usize,
    /// Destination the caller intends for the CSV; not used by
    /// [`run_sweep`] itself.
    pub out_path: Option<PathBuf>,
}

impl SweepConfig {
    pub fn batch_grid(&self) -> Result<BatchGrid> {
        match self.horizon {
            HorizonSpec::Items(n) => BatchGrid::from_horizon(self.arms, self.batch_size, n),
            HorizonSpec::Batches(k) => BatchGrid::from_batches(self.arms, self.batch_size, k),
        }
    }

    /// Expand the drift grid into `(gap, drift vector)` points.
    pub fn grid_points(&self) -> Result<Vec<(f64, Vec<f64>)>> {
        match &self.grid {
            DriftGridSpec::SymmetricGap { min, max, step } => {
                if self.arms != 2 {
                    return Err(Error::config(format!(
                        "the symmetric gap grid is a two-arm family, got {} arms",
                        self.arms
                    )));
                }
                if !(min.is_finite() && max.is_finite() && step.is_finite()) {
                    return Err(Error::config("gap grid bounds must be finite"));
                }
                if *step <= 0.0 {
                    return Err(Error::config(format!(
                        "gap step must be positive, got {step}"
                    )));
                }
                if min > max {
                    return Err(Error::config(format!(
                        "gap range is empty: min {min} > max {max}"
                    )));
                }
                let count = ((max - min) / step + 1e-9).floor() as usize + 1;
                Ok((0..count)
                    .map(|i| {
                        let gap = min + i as f64 * step;
                        (gap, vec![gap / 2.0, -gap / 2.0])
                    })
                    .collect())
            }
            DriftGridSpec::Explicit(vectors) => {
                if vectors.is_empty() {
                    return Err(Error::config("explicit drift grid is empty"));
                }
                let mut points = Vec::with_capacity(vectors.len());
                let mut last_gap = f64::NEG_INFINITY;
                for (i, v) in vectors.iter().enumerate() {
                    if v.len() != self.arms {
                        return Err(Error::config(format!(
                            "drift vector {i} has {} entries for {} arms",
                            v.len(),
                            self.arms
                        )));
                    }
                    if v.iter().any(|d| !d.is_finite()) {
                        return Err(Error::config(format!("drift vector {i} must be finite")));
                    }
                    let lo = v.iter().fold(f64::INFINITY, |m, &d| m.min(d));
                    let hi = v.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d));
                    let gap = hi - lo;
                    if gap <= last_gap {
                        return Err(Error::config(
                            "explicit drift vectors must come in strictly increasing gap order",
                        ));
                    }
                    last_gap = gap;
                    points.push((gap, v.clone()));
                }
                Ok(points)
            }
        }
    }
}

/// One estimated curve point: the drift gap and its loss estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub gap: f64,
    pub estimate: LossEstimate,
}

/// Estimated scaled loss over the drift grid, ordered by increasing gap.
#[derive(Clone, Debug, PartialEq)]
pub struct LossCurve {
    pub points: Vec<CurvePoint>,
}

/// Run the full sweep: one [`estimate_loss`] call per grid point, each
/// seeded with `derive_seed(master_seed, point_index)`.
pub fn run_sweep(config: &SweepConfig) -> Result<LossCurve> {
    let grid = config.batch_grid()?;
    let points = config.grid_points()?;
    let policy = PolicyConfig::new(
        config.exploration,
        config.arms,
        config.batch_size,
        SWEEP_VARIANCE,
    )?;
    if config.reps < 2 {
        return Err(Error::config(format!(
            "need at least 2 replications, got {}",
            config.reps
        )));
    }
    let mut curve = Vec::with_capacity(points.len());
    let total = points.len();
    for (index, (gap, drifts)) in points.into_iter().enumerate() {
        let bound = drifts
            .iter()
            .fold(DEFAULT_DRIFT_BOUND, |b, d| b.max(d.abs()));
        let theta =
            ThetaParams::with_drift_bound(SWEEP_BASELINE_MEAN, SWEEP_VARIANCE, drifts, bound)?;
        let estimate = estimate_loss(
            &theta,
            &grid,
            &policy,
            config.reps,
            derive_seed(config.master_seed, index as u64),
            config.workers,
        )?;
        log::info!(
            "sweep point {}/{}: d = {gap}, l_hat = {:.4} +- {:.4}",
            index + 1,
            total,
            estimate.mean,
            estimate.stderr
        );
        curve.push(CurvePoint { gap, estimate });
    }
    Ok(LossCurve { points: curve })
}

/// Render a real with 17 significant digits; parses back bit-exactly.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write the curve in the [`CURVE_CSV_HEADER`] schema: UTF-8, LF line
/// endings, reals with 17 significant digits.
pub fn write_csv<W: Write>(curve: &LossCurve, config: &SweepConfig, mut out: W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: PathBuf::from("<writer>"),
        source: e,
    };
    let grid = config.batch_grid()?;
    writeln!(out, "{CURVE_CSV_HEADER}").map_err(io_err)?;
    for point in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_real(point.gap),
            fmt_real(point.estimate.mean),
            fmt_real(point.estimate.stderr),
            point.estimate.reps,
            fmt_real(config.exploration),
            config.arms,
            config.batch_size,
            grid.batch_count(),
            grid.horizon(),
            config.master_seed,
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Write the curve CSV to a file.
pub fn emit_csv(curve: &LossCurve, config: &SweepConfig, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(curve, config, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// One parsed CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedRow {
    pub gap: f64,
    pub mean: f64,
    pub stderr: f64,
    pub reps: u64,
    pub exploration: f64,
    pub arms: u64,
    pub batch_size: u64,
    pub batch_count: u64,
    pub horizon: u64,
    pub seed: u64,
}

/// A parsed curve file.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCurve {
    pub rows: Vec<ParsedRow>,
}

/// Parse a file in the [`CURVE_CSV_HEADER`] schema. Errors carry the
/// 1-based line number.
pub fn parse_curve_csv(path: &Path) -> Result<ParsedCurve> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let parse_err = |line: usize, message: String| Error::CsvParse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CURVE_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(parse_err(1, format!("expected header `{CURVE_CSV_HEADER}`, got `{header}`")))
        }
        None => return Err(parse_err(1, "empty file".into())),
    }
    let mut rows = Vec::new();
    for (index, line) in lines {
        let lineno = index + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(parse_err(
                lineno,
                format!("expected 10 fields, got {}", fields.len()),
            ));
        }
        let real = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("field {}: {e}", i + 1)))
        };
        let int = |i: usize| -> Result<u64> {
            fields[i]
                .parse::<u64>()
                .map_err(|e| parse_err(lineno, format!("field {}: {e}", i + 1)))
        };
        rows.push(ParsedRow {
            gap: real(0)?,
            mean: real(1)?,
            stderr: real(2)?,
            reps: int(3)?,
            exploration: real(4)?,
            arms: int(5)?,
            batch_size: int(6)?,
            batch_count: int(7)?,
            horizon: int(8)?,
            seed: int(9)?,
        });
    }
    Ok(ParsedCurve { rows })
}
