//! Command-line driver for the batch UCB bandit simulator.
//!
//! Subcommands: `sweep` estimates the scaled-loss curve over a drift-gap
//! grid and writes CSV, `episode` traces one replication batch by batch,
//! `couple` verifies the concrete/invariant coupling across scale
//! settings, `plot` renders curve CSVs as standalone SVG.
//!
//! Exit status: 0 success (or coupling PASS), 1 coupling FAIL, 2 usage or
//! configuration error, 3 I/O error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use batch_ucb::{
    couple_check, emit_csv, emit_plot, fmt_real, run_sweep, trace_episode, ConcreteSetting,
    DriftGridSpec, Error, HorizonSpec, PolicyConfig, SweepConfig, ThetaParams, TraceRow,
};

#[derive(Parser)]
#[command(
    name = "batch-ucb",
    version,
    about = "Gaussian multi-armed bandit under the randomized batch UCB rule",
    long_about = "Monte-Carlo estimation of scaled expected losses for the randomized \
                  batch UCB rule on Gaussian bandits with close arm means, plus an exact \
                  stream-coupled check that the control process depends only on the batch \
                  count, drifts and exploration coefficient.\n\nExit status: 0 success or \
                  coupling PASS, 1 coupling FAIL, 2 usage/configuration error, 3 I/O error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the scaled-loss curve l(d) over a drift-gap grid, write CSV
    Sweep(SweepArgs),
    /// Trace a single replication: chosen arm and all bounds per batch
    Episode(EpisodeArgs),
    /// Check concrete/invariant coupling; exit 0 on PASS, 1 on FAIL
    Couple(CoupleArgs),
    /// Render one or more curve CSVs as a standalone SVG
    Plot(PlotArgs),
}

#[derive(Args)]
#[command(group = ArgGroup::new("span").required(true).args(["horizon", "batches"]))]
struct SweepArgs {
    /// Exploration coefficient a
    #[arg(long, default_value_t = 1.0 / 3.0)]
    a: f64,
    /// Number of arms J (the gap grid is a two-arm family)
    #[arg(long, default_value_t = 2)]
    arms: usize,
    /// Items per batch M
    #[arg(long, default_value_t = 1)]
    batch_size: u64,
    /// Total item horizon N (must be a multiple of the batch size)
    #[arg(long)]
    horizon: Option<u64>,
    /// Batch count K, as an alternative to --horizon
    #[arg(long)]
    batches: Option<u64>,
    /// Smallest drift gap d of the grid; arm drifts are +d/2 and -d/2
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    d_min: f64,
    /// Largest drift gap d of the grid
    #[arg(long, default_value_t = 8.0, allow_negative_numbers = true)]
    d_max: f64,
    /// Gap grid step
    #[arg(long, default_value_t = 0.25)]
    d_step: f64,
    /// Explicit drift vectors instead of the gap grid, e.g. "1,0,-1;2,0,-2"
    /// (semicolon-separated vectors in increasing gap order)
    #[arg(long, conflicts_with_all = ["d_min", "d_max", "d_step"], allow_hyphen_values = true)]
    d_list: Option<String>,
    /// Replications per grid point
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    /// Master seed; every grid point and replication derives from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for replications; 0 uses all available parallelism
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group = ArgGroup::new("span").required(true).args(["horizon", "batches"]))]
struct EpisodeArgs {
    /// Exploration coefficient a
    #[arg(long, default_value_t = 1.0 / 3.0)]
    a: f64,
    /// Items per batch M
    #[arg(long, default_value_t = 1)]
    batch_size: u64,
    /// Total item horizon N
    #[arg(long)]
    horizon: Option<u64>,
    /// Batch count K, as an alternative to --horizon
    #[arg(long)]
    batches: Option<u64>,
    /// Per-arm drifts, e.g. "1.75,-1.75"
    #[arg(long, allow_hyphen_values = true)]
    d: String,
    /// Baseline mean m
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    m: f64,
    /// Per-step income variance D
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    /// Replication seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoupleArgs {
    /// Batch count K shared by every run
    #[arg(long)]
    batches: u64,
    /// Exploration coefficient a
    #[arg(long, default_value_t = 1.0 / 3.0)]
    a: f64,
    /// Per-arm drifts, e.g. "1.75,-1.75"
    #[arg(long, allow_hyphen_values = true)]
    d: String,
    /// Concrete settings "M:D:m" separated by commas, e.g. "1:1:0,10:0.25:5"
    #[arg(long, allow_hyphen_values = true)]
    settings: String,
    /// Master seed shared by the invariant and every concrete run
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// Input curve CSVs, one line series each
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output SVG path
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Sweep(args) => {
            let grid = match args.d_list {
                Some(ref list) => DriftGridSpec::Explicit(parse_drift_vectors(list)?),
                None => DriftGridSpec::SymmetricGap {
                    min: args.d_min,
                    max: args.d_max,
                    step: args.d_step,
                },
            };
            let config = SweepConfig {
                exploration: args.a,
                arms: args.arms,
                batch_size: args.batch_size,
                horizon: horizon_spec(args.horizon, args.batches),
                grid,
                reps: args.reps,
                master_seed: args.seed,
                workers: args.workers,
                out_path: Some(args.out.clone()),
            };
            let curve = run_sweep(&config)?;
            emit_csv(&curve, &config, &args.out)?;
            eprintln!("wrote {} points to {}", curve.points.len(), args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Episode(args) => {
            let drifts = parse_reals(&args.d)?;
            let arms = drifts.len();
            let bound = drifts
                .iter()
                .fold(batch_ucb::bandit::DEFAULT_DRIFT_BOUND, |b, d| b.max(d.abs()));
            let theta = ThetaParams::with_drift_bound(args.m, args.variance, drifts, bound)?;
            let grid = match horizon_spec(args.horizon, args.batches) {
                HorizonSpec::Items(n) => {
                    batch_ucb::BatchGrid::from_horizon(arms, args.batch_size, n)?
                }
                HorizonSpec::Batches(k) => {
                    batch_ucb::BatchGrid::from_batches(arms, args.batch_size, k)?
                }
            };
            let policy = PolicyConfig::new(args.a, arms, args.batch_size, args.variance)?;
            let rows = trace_episode(&theta, &grid, &policy, args.seed)?;
            match args.out {
                Some(path) => {
                    let mut buf = Vec::new();
                    write_trace(&rows, arms, &mut buf).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    std::fs::write(&path, buf).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                }
                None => {
                    let stdout = std::io::stdout();
                    write_trace(&rows, arms, stdout.lock()).map_err(|e| Error::Io {
                        path: PathBuf::from("<stdout>"),
                        source: e,
                    })?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Couple(args) => {
            let drifts = parse_reals(&args.d)?;
            let settings = parse_settings(&args.settings)?;
            let report = couple_check(&drifts, args.a, args.batches, &settings, args.seed)?;
            println!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Plot(args) => {
            emit_plot(&args.inputs, &args.out)?;
            eprintln!("wrote {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn horizon_spec(horizon: Option<u64>, batches: Option<u64>) -> HorizonSpec {
    match (horizon, batches) {
        (Some(n), _) => HorizonSpec::Items(n),
        (_, Some(k)) => HorizonSpec::Batches(k),
        // clap's arg group guarantees one of the two.
        (None, None) => unreachable!("clap enforces --horizon or --batches"),
    }
}

fn parse_reals(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|field| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("bad real `{field}`: {e}")))
        })
        .collect()
}

fn parse_drift_vectors(text: &str) -> Result<Vec<Vec<f64>>, Error> {
    text.split(';').map(parse_reals).collect()
}

fn parse_settings(text: &str) -> Result<Vec<ConcreteSetting>, Error> {
    text.split(',')
        .map(|entry| {
            let parts: Vec<&str> = entry.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::InvalidConfig(format!(
                    "setting `{entry}` must be M:D:m"
                )));
            }
            Ok(ConcreteSetting {
                batch_size: parts[0].trim().parse().map_err(|e| {
                    Error::InvalidConfig(format!("bad batch size in `{entry}`: {e}"))
                })?,
                variance: parts[1].trim().parse().map_err(|e| {
                    Error::InvalidConfig(format!("bad variance in `{entry}`: {e}"))
                })?,
                baseline_mean: parts[2].trim().parse().map_err(|e| {
                    Error::InvalidConfig(format!("bad baseline mean in `{entry}`: {e}"))
                })?,
            })
        })
        .collect()
}

/// Trace CSV: `k,arm,bound1..boundJ` with 1-based batch numbers and arm
/// labels; bound cells are empty on round-robin rows.
fn write_trace<W: Write>(rows: &[TraceRow], arms: usize, mut out: W) -> std::io::Result<()> {
    write!(out, "k,arm")?;
    for l in 1..=arms {
        write!(out, ",bound{l}")?;
    }
    writeln!(out)?;
    for row in rows {
        write!(out, "{},{}", row.batch + 1, row.arm + 1)?;
        if row.bounds.is_empty() {
            for _ in 0..arms {
                write!(out, ",")?;
            }
        } else {
            for bound in &row.bounds {
                write!(out, ",{}", fmt_real(*bound))?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
