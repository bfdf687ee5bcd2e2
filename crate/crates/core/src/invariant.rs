//! Unit-horizon invariant description of the batch UCB process, and the
//! stream-coupled checker tying it to the concrete process.
//!
//! Rescaling batch counts to occupation fractions `t_l = k_l / K` and
//! incomes to dimensionless noise sums turns the perturbed bounds into
//!
//! ```text
//! u_l(t) = d_l + S_l / t_l + a / sqrt(t_l) * (2 + zeta_l)
//! ```
//!
//! where `S_l` accumulates `sqrt(epsilon) * z` for each batch the arm
//! received. This is the concrete bound pushed through the affine map
//! `u = (U - M*m) * sqrt(K / (M*D))`, which never reorders bounds: given
//! shared draws, every concrete process with the same (drifts, a, K)
//! chooses the same arms as the unit-horizon one, whatever its batch
//! size, variance or baseline mean. [`couple_check`] verifies that
//! equivalence path by path, batch by batch.

use crate::bandit::{BatchGrid, BatchIncomeModel, ThetaParams, DEFAULT_DRIFT_BOUND};
use crate::error::{Error, Result};
use crate::harness::drive_concrete;
use crate::policy::{argmax_first, PolicyConfig};
use crate::rng::{KahanSum, NoiseStream, SeededStream};

/// Absolute tolerance on transformed-bound deviations in [`couple_check`].
/// The identity is exact in real arithmetic; this budget absorbs float
/// rounding over episodes up to about 1e4 batches.
pub const COUPLING_TOLERANCE: f64 = 1e-9;

/// State of the unit-horizon process: elapsed time `t = k/K`, per-arm
/// occupation fractions and accumulated dimensionless noise sums.
#[derive(Clone, Debug)]
pub struct InvariantState {
    epsilon: f64,
    sqrt_epsilon: f64,
    batch_count: u64,
    steps: u64,
    arm_steps: Vec<u64>,
    noise: Vec<KahanSum>,
}

impl InvariantState {
    pub fn new(arms: usize, batch_count: u64) -> Result<Self> {
        if arms < 2 {
            return Err(Error::config(format!("need at least two arms, got {arms}")));
        }
        if batch_count == 0 {
            return Err(Error::config("batch count must be at least 1"));
        }
        let epsilon = 1.0 / batch_count as f64;
        Ok(Self {
            epsilon,
            sqrt_epsilon: epsilon.sqrt(),
            batch_count,
            steps: 0,
            arm_steps: vec![0; arms],
            noise: vec![KahanSum::default(); arms],
        })
    }

    pub fn arms(&self) -> usize {
        self.arm_steps.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Batches processed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Unit-horizon time, `steps * epsilon`.
    pub fn t(&self) -> f64 {
        self.steps as f64 * self.epsilon
    }

    /// Occupation fraction `t_l` of one arm.
    pub fn occupancy(&self, arm: usize) -> f64 {
        self.arm_steps[arm] as f64 * self.epsilon
    }

    pub fn occupancies(&self) -> Vec<f64> {
        (0..self.arms()).map(|l| self.occupancy(l)).collect()
    }

    /// Accumulated noise sum of one arm.
    pub fn noise_sum(&self, arm: usize) -> f64 {
        self.noise[arm].value()
    }

    pub fn initialized(&self) -> bool {
        self.steps >= self.arms() as u64
    }

    /// Record one batch on `arm` with standard-normal draw `z`; the
    /// arm's noise sum gains `sqrt(epsilon) * z`. The unit horizon holds
    /// exactly `batch_count` batches.
    pub fn record(&mut self, arm: usize, z: f64) -> Result<()> {
        if arm >= self.arms() {
            return Err(Error::ArmOutOfRange {
                arm,
                arms: self.arms(),
            });
        }
        if self.steps == self.batch_count {
            return Err(Error::config(format!(
                "all {} batches of the unit horizon already processed",
                self.batch_count
            )));
        }
        self.steps += 1;
        self.arm_steps[arm] += 1;
        self.noise[arm].add(self.sqrt_epsilon * z);
        Ok(())
    }
}

/// Perturbed upper bound of one arm in the unit-horizon process.
pub fn invariant_bound(
    arm: usize,
    state: &InvariantState,
    drifts: &[f64],
    exploration: f64,
    zeta: f64,
) -> Result<f64> {
    if arm >= state.arms() || arm >= drifts.len() {
        return Err(Error::ArmOutOfRange {
            arm,
            arms: state.arms().min(drifts.len()),
        });
    }
    if state.arm_steps[arm] == 0 {
        return Err(Error::UnpulledArm { arm });
    }
    debug_assert!(zeta >= 0.0);
    let t_l = state.occupancy(arm);
    Ok(drifts[arm] + state.noise_sum(arm) / t_l + exploration / t_l.sqrt() * (2.0 + zeta))
}

/// Affine map from a concrete bound to its unit-horizon counterpart:
/// `(bound - batch_size * baseline_mean) * sqrt(batch_count / (batch_size * variance))`.
///
/// Strictly increasing, so applying it to every arm leaves the argmax
/// unchanged.
pub fn transform_bound(
    bound: f64,
    baseline_mean: f64,
    batch_size: u64,
    variance: f64,
    batch_count: u64,
) -> f64 {
    debug_assert!(variance > 0.0 && batch_size > 0 && batch_count > 0);
    let m = batch_size as f64;
    (bound - m * baseline_mean) * (batch_count as f64 / (m * variance)).sqrt()
}

/// Arm choices and final occupation fractions of one unit-horizon episode.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantEpisode {
    /// Chosen arm per batch, in order.
    pub arms: Vec<usize>,
    /// Final occupation fractions `t_l`; they sum to 1.
    pub occupancies: Vec<f64>,
}

/// Run the unit-horizon process for `batch_count` steps: round-robin over
/// the arms once, then argmax of [`invariant_bound`]. Consumes draws in
/// the canonical order (one perturbation per arm, then one normal for the
/// selected arm).
pub fn run_invariant_episode<S: NoiseStream>(
    drifts: &[f64],
    exploration: f64,
    batch_count: u64,
    stream: &mut S,
) -> Result<InvariantEpisode> {
    let mut arms = Vec::with_capacity(batch_count as usize);
    let state = drive_invariant(drifts, exploration, batch_count, stream, |_, arm, _| {
        arms.push(arm)
    })?;
    Ok(InvariantEpisode {
        arms,
        occupancies: state.occupancies(),
    })
}

/// Episode loop shared by the public runner and the coupling checker.
/// `observe` sees `(step, chosen arm, bounds)` before the state update;
/// the bounds slice is empty during the round-robin phase.
pub(crate) fn drive_invariant<S: NoiseStream>(
    drifts: &[f64],
    exploration: f64,
    batch_count: u64,
    stream: &mut S,
    mut observe: impl FnMut(u64, usize, &[f64]),
) -> Result<InvariantState> {
    let arms = drifts.len();
    validate_invariant_inputs(drifts, exploration, batch_count)?;
    let mut state = InvariantState::new(arms, batch_count)?;
    let mut zetas = vec![0.0; arms];
    let mut bounds = Vec::with_capacity(arms);
    for step in 0..batch_count {
        for zeta in zetas.iter_mut() {
            *zeta = stream.perturbation();
        }
        bounds.clear();
        let arm = if state.initialized() {
            for (l, &zeta) in zetas.iter().enumerate() {
                bounds.push(invariant_bound(l, &state, drifts, exploration, zeta)?);
            }
            argmax_first(&bounds).expect("at least two arms")
        } else {
            state.steps() as usize
        };
        observe(step, arm, &bounds);
        let z = stream.normal();
        state.record(arm, z)?;
    }
    Ok(state)
}

fn validate_invariant_inputs(drifts: &[f64], exploration: f64, batch_count: u64) -> Result<()> {
    if drifts.len() < 2 {
        return Err(Error::config(format!(
            "need at least two arms, got {}",
            drifts.len()
        )));
    }
    if drifts.iter().any(|d| !d.is_finite()) {
        return Err(Error::config("drifts must be finite"));
    }
    if !(exploration.is_finite() && exploration >= 0.0) {
        return Err(Error::config(format!(
            "exploration coefficient must be finite and >= 0, got {exploration}"
        )));
    }
    if batch_count < drifts.len() as u64 + 1 {
        return Err(Error::config(format!(
            "batch count {batch_count} must be at least arms + 1 = {}",
            drifts.len() as u64 + 1
        )));
    }
    Ok(())
}

/// One concrete process configuration compared against the invariant run:
/// batch size M, per-step variance D and baseline mean m.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcreteSetting {
    pub batch_size: u64,
    pub variance: f64,
    pub baseline_mean: f64,
}

/// Outcome of a coupling comparison.
#[derive(Clone, Debug, PartialEq)]
pub enum CoupleOutcome {
    /// Every setting chose the invariant arm sequence and every
    /// transformed bound matched within [`COUPLING_TOLERANCE`].
    Pass { max_deviation: f64 },
    /// First divergence: which setting, at which batch (0-based), and why.
    Fail {
        setting: usize,
        batch: u64,
        detail: String,
    },
}

#[derive(Clone, Debug)]
pub struct CoupleReport {
    pub arms: usize,
    pub batch_count: u64,
    pub exploration: f64,
    pub settings: Vec<ConcreteSetting>,
    pub outcome: CoupleOutcome,
}

impl CoupleReport {
    pub fn passed(&self) -> bool {
        matches!(self.outcome, CoupleOutcome::Pass { .. })
    }
}

impl std::fmt::Display for CoupleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "coupling check: {} arms, {} batches, a = {}",
            self.arms, self.batch_count, self.exploration
        )?;
        for (i, s) in self.settings.iter().enumerate() {
            writeln!(
                f,
                "  setting {}: M = {}, D = {}, m = {}",
                i, s.batch_size, s.variance, s.baseline_mean
            )?;
        }
        match &self.outcome {
            CoupleOutcome::Pass { max_deviation } => write!(
                f,
                "PASS: identical arm sequences; max transformed-bound deviation {max_deviation:.3e} (tolerance {COUPLING_TOLERANCE:.0e})"
            ),
            CoupleOutcome::Fail {
                setting,
                batch,
                detail,
            } => write!(f, "FAIL at batch {batch} (setting {setting}): {detail}"),
        }
    }
}

/// Record of one run used by the coupling comparison: the arm sequence
/// plus, for each post-initialization step, the full bound vector already
/// mapped to the unit-horizon scale.
struct RunRecord {
    arms_chosen: Vec<usize>,
    /// Row-major (batch_count - arms) x arms.
    bounds: Vec<f64>,
}

fn invariant_reference<S: NoiseStream>(
    drifts: &[f64],
    exploration: f64,
    batch_count: u64,
    stream: &mut S,
) -> Result<RunRecord> {
    let arms = drifts.len();
    let mut record = RunRecord {
        arms_chosen: Vec::with_capacity(batch_count as usize),
        bounds: Vec::with_capacity((batch_count as usize - arms) * arms),
    };
    drive_invariant(drifts, exploration, batch_count, stream, |_, arm, bounds| {
        record.arms_chosen.push(arm);
        record.bounds.extend_from_slice(bounds);
    })?;
    Ok(record)
}

enum SettingOutcome {
    Pass { max_deviation: f64 },
    Fail { batch: u64, detail: String },
}

/// Run one concrete setting on a fresh stream and compare it step by step
/// against the invariant reference.
fn check_setting<S: NoiseStream>(
    setting: &ConcreteSetting,
    drifts: &[f64],
    exploration: f64,
    batch_count: u64,
    stream: &mut S,
    reference: &RunRecord,
) -> Result<SettingOutcome> {
    let arms = drifts.len();
    let drift_bound = drifts
        .iter()
        .fold(DEFAULT_DRIFT_BOUND, |b, d| b.max(d.abs()));
    let theta = ThetaParams::with_drift_bound(
        setting.baseline_mean,
        setting.variance,
        drifts.to_vec(),
        drift_bound,
    )?;
    let grid = BatchGrid::from_batches(arms, setting.batch_size, batch_count)?;
    let config = PolicyConfig::new(exploration, arms, setting.batch_size, setting.variance)?;
    let model = BatchIncomeModel::new(&theta, &grid)?;

    let mut max_deviation = 0.0f64;
    let mut failure: Option<(u64, String)> = None;
    drive_concrete(&model, &config, batch_count, stream, |step, arm, bounds| {
        if failure.is_some() {
            return;
        }
        for (l, &bound) in bounds.iter().enumerate() {
            let u = transform_bound(
                bound,
                setting.baseline_mean,
                setting.batch_size,
                setting.variance,
                batch_count,
            );
            let row = (step as usize - arms) * arms;
            let deviation = (u - reference.bounds[row + l]).abs();
            max_deviation = max_deviation.max(deviation);
            if deviation > COUPLING_TOLERANCE {
                failure = Some((
                    step,
                    format!(
                        "transformed bound of arm {l} deviates by {deviation:.3e} (tolerance {COUPLING_TOLERANCE:.0e})"
                    ),
                ));
                return;
            }
        }
        let expected = reference.arms_chosen[step as usize];
        if arm != expected {
            failure = Some((
                step,
                format!("arm mismatch: invariant chose {expected}, concrete chose {arm}"),
            ));
        }
    })?;
    Ok(match failure {
        Some((batch, detail)) => SettingOutcome::Fail { batch, detail },
        None => SettingOutcome::Pass { max_deviation },
    })
}

/// Verify that every concrete setting, run on the same underlying draws,
/// couples exactly to the unit-horizon process: identical arm sequences
/// and transformed bounds equal within [`COUPLING_TOLERANCE`].
///
/// Each run re-derives its stream from `master_seed`, so all of them see
/// the same perturbations and the same normal draws; the concrete batch
/// noise is `sqrt(M*D) * z` exactly where the invariant one is
/// `sqrt(epsilon) * z`.
pub fn couple_check(
    drifts: &[f64],
    exploration: f64,
    batch_count: u64,
    settings: &[ConcreteSetting],
    master_seed: u64,
) -> Result<CoupleReport> {
    validate_invariant_inputs(drifts, exploration, batch_count)?;
    if settings.is_empty() {
        return Err(Error::config("need at least one concrete setting"));
    }
    for (i, s) in settings.iter().enumerate() {
        if s.batch_size == 0 {
            return Err(Error::config(format!("setting {i}: batch size must be at least 1")));
        }
        if !(s.variance.is_finite() && s.variance > 0.0) {
            return Err(Error::config(format!(
                "setting {i}: variance must be positive and finite, got {}",
                s.variance
            )));
        }
        if !s.baseline_mean.is_finite() {
            return Err(Error::config(format!(
                "setting {i}: baseline mean must be finite, got {}",
                s.baseline_mean
            )));
        }
    }

    let mut stream = SeededStream::new(master_seed);
    let reference = invariant_reference(drifts, exploration, batch_count, &mut stream)?;

    let mut max_deviation = 0.0f64;
    let mut outcome = None;
    for (i, setting) in settings.iter().enumerate() {
        let mut stream = SeededStream::new(master_seed);
        match check_setting(setting, drifts, exploration, batch_count, &mut stream, &reference)? {
            SettingOutcome::Pass { max_deviation: d } => max_deviation = max_deviation.max(d),
            SettingOutcome::Fail { batch, detail } => {
                outcome = Some(CoupleOutcome::Fail {
                    setting: i,
                    batch,
                    detail,
                });
                break;
            }
        }
    }
    Ok(CoupleReport {
        arms: drifts.len(),
        batch_count,
        exploration,
        settings: settings.to_vec(),
        outcome: outcome.unwrap_or(CoupleOutcome::Pass { max_deviation }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ZeroStream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn invariant_bound_direct_evaluation() {
        // t_l = 0.25 at K = 4, zero noise: d + (a / sqrt(t_l)) * 2.
        let mut state = InvariantState::new(2, 4).unwrap();
        state.record(0, 0.0).unwrap();
        let b = invariant_bound(0, &state, &[0.5, 0.0], 1.0 / 3.0, 0.0).unwrap();
        assert_relative_eq!(b, 0.5 + (1.0 / 3.0) * 2.0 * 2.0, max_relative = 1e-14);

        // a = 0 and zero noise: exactly the drift.
        let b = invariant_bound(0, &state, &[0.5, 0.0], 0.0, 7.0).unwrap();
        assert_eq!(b, 0.5);
    }

    #[test]
    fn invariant_bound_noise_term() {
        // noise_sum = 0.1 at t_l = 0.5 (K = 4, two batches), a = 0 -> 0.2.
        let mut state = InvariantState::new(2, 4).unwrap();
        state.record(0, 0.2).unwrap(); // sqrt(eps) = 0.5, contributes 0.1
        state.record(0, 0.0).unwrap();
        assert_relative_eq!(state.noise_sum(0), 0.1, max_relative = 1e-15);
        let b = invariant_bound(0, &state, &[0.0, 0.0], 0.0, 0.0).unwrap();
        assert_relative_eq!(b, 0.2, max_relative = 1e-14);
    }

    #[test]
    fn invariant_bound_requires_a_pull() {
        let state = InvariantState::new(2, 4).unwrap();
        assert!(matches!(
            invariant_bound(1, &state, &[0.0, 0.0], 1.0, 0.0),
            Err(Error::UnpulledArm { arm: 1 })
        ));
    }

    #[test]
    fn transform_examples() {
        assert_eq!(transform_bound(5.0, 5.0, 1, 1.0, 4), 0.0);
        assert_relative_eq!(transform_bound(7.0, 5.0, 1, 1.0, 4), 4.0, max_relative = 1e-15);
        assert_relative_eq!(
            transform_bound(2.0, 0.0, 4, 0.25, 9),
            6.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn episode_rejects_short_horizons_and_round_robins() {
        let mut stream = SeededStream::new(5);
        assert!(run_invariant_episode(&[1.0, -1.0], 0.5, 2, &mut stream).is_err());
        let episode = run_invariant_episode(&[1.0, -1.0], 0.5, 3, &mut stream).unwrap();
        assert_eq!(&episode.arms[..2], &[0, 1]);
        assert_eq!(episode.arms.len(), 3);
    }

    #[test]
    fn episode_is_deterministic_in_the_seed() {
        let run = |seed| {
            let mut stream = SeededStream::new(seed);
            run_invariant_episode(&[0.6, -0.6, 0.0], 1.0 / 3.0, 40, &mut stream).unwrap()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11).arms, run(12).arms);
    }

    #[test]
    fn occupancies_sum_to_elapsed_time() {
        let mut stream = SeededStream::new(3);
        let state = drive_invariant(&[1.0, -1.0, 0.3], 0.25, 64, &mut stream, |_, _, _| {}).unwrap();
        let total: f64 = state.occupancies().iter().sum();
        assert!((total - state.t()).abs() <= 4.0 * f64::EPSILON);
        assert_eq!(state.t(), 1.0);
    }

    #[test]
    fn zero_stream_keeps_noise_sums_zero() {
        let mut stream = ZeroStream;
        let state = drive_invariant(&[0.5, -0.5], 0.0, 8, &mut stream, |_, _, _| {}).unwrap();
        assert_eq!(state.noise_sum(0), 0.0);
        assert_eq!(state.noise_sum(1), 0.0);
        // Greedy on drifts alone: arm 0 after the round-robin pass.
        assert_eq!(state.arm_steps[0], 7);
    }

    #[test]
    fn wide_drift_gap_dominates_selection() {
        // With a = 0 and drifts (5, -5) the gap is 10 while the noise in
        // an arm's estimate after its single round-robin batch has
        // standard deviation sqrt(K). At K = 4 the first comparison is a
        // ~3.5-sigma event, so essentially every post-initialization
        // selection goes to arm 0; at K = 100 the noise matches the gap
        // and greedy selection only reaches ~0.90 pull fraction
        // (measured at 4e5 / 4e4 replications).
        let drifts = [5.0, -5.0];
        let mut pure = 0u64;
        let episodes = 100_000u64;
        for i in 0..episodes {
            let mut stream = SeededStream::new(crate::rng::derive_seed(0xD011, i));
            let ep = run_invariant_episode(&drifts, 0.0, 4, &mut stream).unwrap();
            if ep.arms[2..].iter().all(|&a| a == 0) {
                pure += 1;
            }
        }
        let fraction = pure as f64 / episodes as f64;
        assert!(fraction > 0.999, "pure-arm-0 fraction {fraction}");

        let mut good = 0u64;
        let mut total = 0u64;
        for i in 0..20_000u64 {
            let mut stream = SeededStream::new(crate::rng::derive_seed(0xD012, i));
            let ep = run_invariant_episode(&drifts, 0.0, 100, &mut stream).unwrap();
            good += ep.arms[2..].iter().filter(|&&a| a == 0).count() as u64;
            total += (ep.arms.len() - 2) as u64;
        }
        let pull_fraction = good as f64 / total as f64;
        assert!(pull_fraction > 0.88, "arm-0 pull fraction {pull_fraction}");
    }

    #[test]
    fn coupling_is_reflexive_for_the_invariant_run() {
        let drifts = [1.75, -1.75];
        let mut a = SeededStream::new(99);
        let ra = invariant_reference(&drifts, 1.0 / 3.0, 50, &mut a).unwrap();
        let mut b = SeededStream::new(99);
        let rb = invariant_reference(&drifts, 1.0 / 3.0, 50, &mut b).unwrap();
        assert_eq!(ra.arms_chosen, rb.arms_chosen);
        let max_dev = ra
            .bounds
            .iter()
            .zip(&rb.bounds)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert_eq!(max_dev, 0.0);
    }

    #[test]
    fn couple_check_passes_across_scales() {
        let settings = [
            ConcreteSetting {
                batch_size: 1,
                variance: 1.0,
                baseline_mean: 0.0,
            },
            ConcreteSetting {
                batch_size: 10,
                variance: 0.25,
                baseline_mean: 5.0,
            },
            ConcreteSetting {
                batch_size: 50,
                variance: 4.0,
                baseline_mean: -3.0,
            },
        ];
        let report = couple_check(&[1.75, -1.75], 1.0 / 3.0, 200, &settings, 7).unwrap();
        assert!(report.passed(), "{report}");
        if let CoupleOutcome::Pass { max_deviation } = report.outcome {
            assert!(max_deviation <= COUPLING_TOLERANCE);
        }
    }

    #[test]
    fn couple_check_validates_inputs() {
        let ok = ConcreteSetting {
            batch_size: 1,
            variance: 1.0,
            baseline_mean: 0.0,
        };
        assert!(couple_check(&[1.0, -1.0], 1.0 / 3.0, 200, &[], 1).is_err());
        assert!(couple_check(&[1.0, -1.0], 1.0 / 3.0, 2, &[ok], 1).is_err());
        let bad = ConcreteSetting {
            batch_size: 0,
            ..ok
        };
        assert!(couple_check(&[1.0, -1.0], 1.0 / 3.0, 200, &[bad], 1).is_err());
    }

    #[test]
    fn mismatched_exploration_widths_are_detected() {
        // A reference built with a different exploration coefficient must
        // fail the comparison: the confidence widths disagree on every
        // post-initialization bound.
        let drifts = [1.75, -1.75];
        let setting = ConcreteSetting {
            batch_size: 1,
            variance: 1.0,
            baseline_mean: 0.0,
        };
        for seed in 0..100 {
            let mut s = SeededStream::new(seed);
            let reference = invariant_reference(&drifts, 2.0 / 15.0, 60, &mut s).unwrap();
            let mut s = SeededStream::new(seed);
            let outcome =
                check_setting(&setting, &drifts, 1.0 / 3.0, 60, &mut s, &reference).unwrap();
            assert!(
                matches!(outcome, SettingOutcome::Fail { .. }),
                "seed {seed} unexpectedly passed"
            );
        }
    }

    proptest! {
        /// Occupation conservation holds at every step, not only at the end.
        #[test]
        fn occupancy_conservation_at_every_step(
            seed in any::<u64>(),
            k in 4u64..80,
        ) {
            let drifts = [0.9, -0.9, 0.1];
            prop_assume!(k > drifts.len() as u64);
            let mut stream = SeededStream::new(seed);
            let mut state = InvariantState::new(drifts.len(), k).unwrap();
            let mut zetas = vec![0.0; drifts.len()];
            for step in 0..k {
                for z in zetas.iter_mut() {
                    *z = stream.perturbation();
                }
                let arm = if state.initialized() {
                    let bounds: Vec<f64> = (0..drifts.len())
                        .map(|l| invariant_bound(l, &state, &drifts, 0.3, zetas[l]).unwrap())
                        .collect();
                    argmax_first(&bounds).unwrap()
                } else {
                    step as usize
                };
                state.record(arm, stream.normal()).unwrap();
                let total: f64 = state.occupancies().iter().sum();
                prop_assert!((total - state.t()).abs() <= 4.0 * f64::EPSILON * state.t().max(1.0));
            }
        }

        /// The coupling identity holds for arbitrary single settings.
        #[test]
        fn coupling_holds_for_random_settings(
            seed in any::<u64>(),
            batch_size in 1u64..64,
            variance in 0.01f64..16.0,
            baseline in -20.0f64..20.0,
        ) {
            let setting = ConcreteSetting { batch_size, variance, baseline_mean: baseline };
            let report = couple_check(&[1.2, -0.4], 1.0 / 3.0, 40, &[setting], seed).unwrap();
            prop_assert!(report.passed(), "{}", report);
        }
    }
}
