//! The randomized batch UCB rule.
//!
//! After one round-robin pass over the arms, each batch goes to the arm
//! with the largest perturbed upper confidence bound
//!
//! ```text
//! U_l = X_l / k_l + a * sqrt(M * D) / sqrt(k_l) * (2 + zeta_l)
//! ```
//!
//! where `X_l` is the arm's cumulative income over its `k_l` batches and
//! `zeta_l` is a fresh standard-exponential perturbation drawn for every
//! arm every batch. Ties break to the lowest index; under continuous
//! perturbations they have probability zero, and a fixed rule keeps runs
//! reproducible.

use crate::error::{Error, Result};
use crate::rng::KahanSum;

/// Static inputs of the selection rule: exploration coefficient `a`,
/// arm count, batch size and the known per-step income variance.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyConfig {
    exploration: f64,
    arms: usize,
    batch_size: u64,
    variance: f64,
}

impl PolicyConfig {
    pub fn new(exploration: f64, arms: usize, batch_size: u64, variance: f64) -> Result<Self> {
        if !(exploration.is_finite() && exploration >= 0.0) {
            return Err(Error::config(format!(
                "exploration coefficient must be finite and >= 0, got {exploration}"
            )));
        }
        if exploration == 0.0 {
            // Permitted as a test hook; the rule is meant to run with a > 0.
            log::warn!("exploration coefficient a = 0: the rule degenerates to greedy argmax");
        }
        if arms < 2 {
            return Err(Error::config(format!("need at least two arms, got {arms}")));
        }
        if batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::config(format!(
                "variance must be positive and finite, got {variance}"
            )));
        }
        Ok(Self {
            exploration,
            arms,
            batch_size,
            variance,
        })
    }

    pub fn exploration(&self) -> f64 {
        self.exploration
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn batch_size(&self) -> u64 {
        self.batch_size
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Running tallies of the rule: batches processed so far, per-arm batch
/// counts and per-arm cumulative incomes (compensated).
#[derive(Clone, Debug)]
pub struct PolicyState {
    batches: u64,
    counts: Vec<u64>,
    sums: Vec<KahanSum>,
}

impl PolicyState {
    pub fn new(arms: usize) -> Self {
        Self {
            batches: 0,
            counts: vec![0; arms],
            sums: vec![KahanSum::default(); arms],
        }
    }

    /// Rebuild a state from per-arm tallies; the batch counter is the
    /// count total. Arms with zero batches must have zero income.
    pub fn from_parts(counts: Vec<u64>, incomes: Vec<f64>) -> Result<Self> {
        if counts.len() != incomes.len() || counts.len() < 2 {
            return Err(Error::config(format!(
                "counts and incomes must agree on at least two arms, got {} and {}",
                counts.len(),
                incomes.len()
            )));
        }
        let mut sums = Vec::with_capacity(counts.len());
        for (arm, (&k, &x)) in counts.iter().zip(&incomes).enumerate() {
            if k == 0 && x != 0.0 {
                return Err(Error::config(format!(
                    "arm {arm} has zero batches but income {x}"
                )));
            }
            let mut s = KahanSum::default();
            s.add(x);
            sums.push(s);
        }
        Ok(Self {
            batches: counts.iter().sum(),
            counts,
            sums,
        })
    }

    pub fn arms(&self) -> usize {
        self.counts.len()
    }

    /// Batches processed so far.
    pub fn batches(&self) -> u64 {
        self.batches
    }

    pub fn count(&self, arm: usize) -> u64 {
        self.counts[arm]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Cumulative income of `arm`.
    pub fn income(&self, arm: usize) -> f64 {
        self.sums[arm].value()
    }

    /// True once every arm has been applied at least once.
    pub fn initialized(&self) -> bool {
        self.batches >= self.counts.len() as u64
    }

    /// Record one processed batch: `arm` received `batch_income`.
    pub fn update(&mut self, arm: usize, batch_income: f64) -> Result<()> {
        if arm >= self.counts.len() {
            return Err(Error::ArmOutOfRange {
                arm,
                arms: self.counts.len(),
            });
        }
        self.batches += 1;
        self.counts[arm] += 1;
        self.sums[arm].add(batch_income);
        Ok(())
    }
}

/// Standard exponential perturbation from a uniform draw in (0, 1]:
/// the inverse CDF, `-ln(u)`.
pub fn sample_perturbation(u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::config(format!(
            "perturbation needs a uniform draw in (0, 1], got {u}"
        )));
    }
    Ok(-u.ln())
}

/// Perturbed upper confidence bound of one arm.
pub fn ucb_bound(arm: usize, state: &PolicyState, config: &PolicyConfig, zeta: f64) -> Result<f64> {
    if arm >= state.arms() {
        return Err(Error::ArmOutOfRange {
            arm,
            arms: state.arms(),
        });
    }
    let k = state.count(arm);
    if k == 0 {
        return Err(Error::UnpulledArm { arm });
    }
    debug_assert!(zeta >= 0.0);
    let k = k as f64;
    let width = (config.batch_size() as f64 * config.variance()).sqrt();
    Ok(state.income(arm) / k + config.exploration() * width / k.sqrt() * (2.0 + zeta))
}

/// First index attaining the maximum. Empty input gives `None`.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut iter = values.iter().enumerate();
    let (_, &first) = iter.next()?;
    let mut best = 0;
    let mut best_value = first;
    for (i, &v) in iter {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    Some(best)
}

/// Choose the arm for the next batch.
///
/// During initialization (fewer processed batches than arms) the arms are
/// applied in index order; afterwards the arm with the largest perturbed
/// bound wins, lowest index on ties. One perturbation per arm must be
/// supplied every batch, including the round-robin phase, so that random
/// streams advance uniformly.
pub fn select_arm(state: &PolicyState, config: &PolicyConfig, perturbations: &[f64]) -> Result<usize> {
    if perturbations.len() != state.arms() {
        return Err(Error::config(format!(
            "got {} perturbations for {} arms",
            perturbations.len(),
            state.arms()
        )));
    }
    if state.batches() < state.arms() as u64 {
        return Ok(state.batches() as usize);
    }
    let mut best = 0;
    let mut best_bound = ucb_bound(0, state, config, perturbations[0])?;
    for (arm, &zeta) in perturbations.iter().enumerate().skip(1) {
        let bound = ucb_bound(arm, state, config, zeta)?;
        if bound > best_bound {
            best = arm;
            best_bound = bound;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{NoiseStream, SeededStream};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn config(a: f64) -> PolicyConfig {
        PolicyConfig::new(a, 2, 1, 1.0).unwrap()
    }

    #[test]
    fn perturbation_inverse_cdf() {
        assert_relative_eq!(
            sample_perturbation((-2.0f64).exp()).unwrap(),
            2.0,
            max_relative = 1e-12
        );
        assert_eq!(sample_perturbation(1.0).unwrap(), 0.0);
        assert!(sample_perturbation(0.0).is_err());
        assert!(sample_perturbation(1.5).is_err());
        assert!(sample_perturbation(-0.5).is_err());
    }

    #[test]
    fn perturbation_empirical_mean() {
        // Mean of 1e5 standard exponential draws within 4 sigma of 1.
        let mut stream = SeededStream::new(31337);
        let n = 100_000;
        let mut sum = crate::rng::KahanSum::default();
        for _ in 0..n {
            sum.add(stream.perturbation());
        }
        let mean = sum.value() / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn bound_direct_evaluation() {
        // X=2, k_l=4, M=1, D=1, a=1/3, zeta=0.5 -> 0.5 + (1/3)(1/2)(2.5)
        let state = PolicyState::from_parts(vec![4, 1], vec![2.0, 0.0]).unwrap();
        let b = ucb_bound(0, &state, &config(1.0 / 3.0), 0.5).unwrap();
        assert_relative_eq!(b, 2.0 / 4.0 + (1.0 / 3.0) * (2.5 / 2.0), max_relative = 1e-14);

        // a = 0 erases the confidence term.
        let b = ucb_bound(0, &state, &config(0.0), 7.0).unwrap();
        assert_eq!(b, 0.5);

        // X=0, k_l=1, a=1/3, zeta=0 -> 2a = 2/3
        let state = PolicyState::from_parts(vec![1, 1], vec![0.0, 0.0]).unwrap();
        let b = ucb_bound(0, &state, &config(1.0 / 3.0), 0.0).unwrap();
        assert_relative_eq!(b, 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn bound_undefined_before_first_pull() {
        let state = PolicyState::new(2);
        assert!(matches!(
            ucb_bound(0, &state, &config(1.0), 0.0),
            Err(Error::UnpulledArm { arm: 0 })
        ));
        assert!(ucb_bound(5, &state, &config(1.0), 0.0).is_err());
    }

    #[test]
    fn round_robin_phase() {
        let cfg = PolicyConfig::new(1.0 / 3.0, 3, 1, 1.0).unwrap();
        let mut state = PolicyState::new(3);
        let zetas = [0.0, 0.0, 0.0];
        assert_eq!(select_arm(&state, &cfg, &zetas).unwrap(), 0);
        state.update(0, 0.0).unwrap();
        state.update(1, 0.0).unwrap();
        assert_eq!(select_arm(&state, &cfg, &zetas).unwrap(), 2);
        state.update(2, 0.0).unwrap();
        assert_eq!(state.counts(), &[1, 1, 1]);
        assert!(state.initialized());
    }

    #[test]
    fn selects_largest_bound_after_initialization() {
        // Bounds evaluate to (0.9167, 1.2) -> arm index 1.
        // Arm 0: X=0.25, k=1, zeta=0 -> 0.25 + 2/3 = 0.916666...
        // Arm 1: X=0.533333..., k=1, zeta=0 -> 1.2
        let x1 = 1.2 - 2.0 / 3.0;
        let state = PolicyState::from_parts(vec![1, 1], vec![0.25, x1]).unwrap();
        let cfg = config(1.0 / 3.0);
        let b0 = ucb_bound(0, &state, &cfg, 0.0).unwrap();
        let b1 = ucb_bound(1, &state, &cfg, 0.0).unwrap();
        assert_relative_eq!(b0, 0.25 + 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(b1, 1.2, max_relative = 1e-14);
        assert_eq!(select_arm(&state, &cfg, &[0.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn exact_ties_break_to_lowest_index() {
        let state = PolicyState::from_parts(vec![3, 3], vec![1.5, 1.5]).unwrap();
        assert_eq!(select_arm(&state, &config(0.5), &[0.25, 0.25]).unwrap(), 0);
    }

    #[test]
    fn update_bookkeeping() {
        let mut state = PolicyState::new(2);
        state.update(0, 1.5).unwrap();
        assert_eq!(state.batches(), 1);
        assert_eq!(state.counts(), &[1, 0]);
        assert_eq!(state.income(0), 1.5);
        assert_eq!(state.income(1), 0.0);
        assert!(state.update(2, 0.0).is_err());
    }

    #[test]
    fn from_parts_rejects_income_without_batches() {
        assert!(PolicyState::from_parts(vec![0, 1], vec![1.0, 0.0]).is_err());
        assert!(PolicyState::from_parts(vec![1], vec![1.0]).is_err());
    }

    #[test]
    fn zero_exploration_is_greedy_on_empirical_means() {
        let state = PolicyState::from_parts(vec![4, 2], vec![2.0, 1.2]).unwrap();
        // Means are 0.5 and 0.6; greedy picks arm 1 whatever the zetas.
        assert_eq!(select_arm(&state, &config(0.0), &[9.0, 0.0]).unwrap(), 1);
    }

    proptest! {
        /// Conservation and coverage: after any update sequence the batch
        /// counter equals the count total, and after `arms` round-robin
        /// selections every arm has count 1.
        #[test]
        fn conservation_under_random_updates(
            incomes in proptest::collection::vec(-10.0..10.0f64, 1..60),
            arms in 2usize..5,
        ) {
            let cfg = PolicyConfig::new(0.25, arms, 1, 1.0).unwrap();
            let mut state = PolicyState::new(arms);
            let mut stream = SeededStream::new(7);
            let mut zetas = vec![0.0; arms];
            for (i, income) in incomes.iter().enumerate() {
                for z in zetas.iter_mut() {
                    *z = stream.perturbation();
                }
                let arm = select_arm(&state, &cfg, &zetas).unwrap();
                state.update(arm, *income).unwrap();
                prop_assert_eq!(state.counts().iter().sum::<u64>(), state.batches());
                if i + 1 == arms {
                    prop_assert!(state.counts().iter().all(|&c| c == 1));
                }
            }
        }

        /// Determinism: identical inputs select identical arms.
        #[test]
        fn selection_is_deterministic(
            counts in proptest::collection::vec(1u64..50, 2..5),
            seed in any::<u64>(),
        ) {
            let arms = counts.len();
            let mut stream = SeededStream::new(seed);
            let incomes: Vec<f64> = counts.iter().map(|&c| c as f64 * stream.normal()).collect();
            let zetas: Vec<f64> = (0..arms).map(|_| stream.perturbation()).collect();
            let state = PolicyState::from_parts(counts, incomes).unwrap();
            let cfg = PolicyConfig::new(1.0 / 3.0, arms, 1, 1.0).unwrap();
            let a = select_arm(&state, &cfg, &zetas).unwrap();
            let b = select_arm(&state, &cfg, &zetas).unwrap();
            prop_assert_eq!(a, b);
        }

        /// Argmax invariance: scaling well-separated bounds by s > 0 and
        /// shifting by c never changes the winner.
        #[test]
        fn argmax_invariant_under_affine_maps(
            bounds in proptest::collection::vec(-1e3..1e3f64, 2..6),
            c in -1e3..1e3f64,
            s in 1e-3..1e3f64,
        ) {
            let scale = bounds.iter().fold(1.0f64, |m, b| m.max(b.abs())).max(c.abs());
            let mut sorted = bounds.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let min_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);
            prop_assume!(min_gap > 1e-9 * scale);
            let transformed: Vec<f64> = bounds.iter().map(|b| s * (b - c)).collect();
            prop_assert_eq!(argmax_first(&bounds), argmax_first(&transformed));
        }
    }
}
