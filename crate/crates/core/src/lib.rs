//! Gaussian multi-armed bandit simulation under the randomized batch UCB
//! rule.
//!
//! The process: J arms with Gaussian per-step incomes whose means sit
//! within O(sqrt(D/N)) of a common baseline, applied in batches of M
//! items over K = N/M batches. After one round-robin pass, every batch
//! goes to the arm with the largest perturbed upper confidence bound;
//! the perturbations are fresh standard-exponential draws per arm per
//! batch. Rescaled to the unit horizon, the whole control process -- and
//! with it the scaled expected loss -- depends only on the batch count,
//! the dimensionless drifts and the exploration coefficient, not on M, D
//! or the baseline mean. [`invariant::couple_check`] verifies exactly
//! that, path by path on shared random draws.
//!
//! [`harness`] estimates scaled losses over replicated episodes with
//! deterministic parallel seeding, [`sweep`] maps the loss curve over a
//! drift-gap grid and writes it as CSV, and [`plot`] renders curves as
//! standalone SVG.

pub mod bandit;
pub mod error;
pub mod harness;
pub mod invariant;
pub mod plot;
pub mod policy;
pub mod rng;
pub mod sweep;

pub use bandit::{sample_batch_income, BatchGrid, BatchIncomeModel, ThetaParams};
pub use error::{Error, Result};
pub use harness::{
    estimate_loss, run_episode, run_replications, scaled_loss, trace_episode, unscale_loss,
    EstimateConfig, LossEstimate, ReplicationOutcome, TraceRow,
};
pub use invariant::{
    couple_check, invariant_bound, run_invariant_episode, transform_bound, ConcreteSetting,
    CoupleOutcome, CoupleReport, InvariantEpisode, InvariantState, COUPLING_TOLERANCE,
};
pub use plot::{emit_plot, render_plot, PlotSeries};
pub use policy::{sample_perturbation, select_arm, ucb_bound, PolicyConfig, PolicyState};
pub use sweep::{
    emit_csv, fmt_real, parse_curve_csv, run_sweep, write_csv, CurvePoint, DriftGridSpec,
    HorizonSpec, LossCurve, SweepConfig, CURVE_CSV_HEADER,
};
