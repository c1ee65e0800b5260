//! Non-causal baseline: successive-reject best-arm identification, which
//! treats every intervention as an opaque arm.
//!
//! The budget is split into K−1 phases; each phase tops every surviving
//! arm up to a common pull count and then permanently eliminates the one
//! with the lowest running mean. Whatever structure the arms share is
//! invisible to it, which is exactly what makes it the comparison point.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The fixed phase schedule for K arms and budget T.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrSchedule {
    pub arm_count: usize,
    /// Cumulative per-arm pull targets n_1 ≤ n_2 ≤ … ≤ n_{K−1}.
    pub targets: Vec<usize>,
}

impl SrSchedule {
    /// n_k = ceil((T − K) / (logbar(K) · (K + 1 − k))) with
    /// logbar(K) = 1/2 + Σ_{i=2}^K 1/i. The induced total never exceeds
    /// T.
    pub fn new(arm_count: usize, t: usize) -> Result<Self> {
        if arm_count < 2 {
            return Err(Error::Domain(format!("need at least 2 arms, got {arm_count}")));
        }
        if t < arm_count {
            return Err(Error::Domain(format!(
                "budget {t} is below the arm count {arm_count}"
            )));
        }
        let logbar: f64 = 0.5 + (2..=arm_count).map(|i| 1.0 / i as f64).sum::<f64>();
        let spare = (t - arm_count) as f64;
        let targets: Vec<usize> = (1..arm_count)
            .map(|k| (spare / (logbar * (arm_count + 1 - k) as f64)).ceil() as usize)
            .collect();
        Ok(SrSchedule { arm_count, targets })
    }

    /// Total pulls the schedule consumes if run to completion.
    pub fn total_pulls(&self) -> usize {
        let mut total = 0;
        let mut previous = 0;
        for (phase, &target) in self.targets.iter().enumerate() {
            let survivors = self.arm_count - phase;
            total += survivors * (target - previous);
            previous = target;
        }
        total
    }
}

/// Outcome of one successive-reject run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrResult {
    /// The surviving arm.
    pub chosen: usize,
    /// Final running means (arms never pulled score 0).
    pub estimates: Vec<f64>,
    pub pulls: Vec<usize>,
    /// Arms in elimination order, worst first.
    pub eliminated: Vec<usize>,
}

/// Runs successive reject over `arm_count` arms with budget `t`, drawing
/// rewards through `pull`.
///
/// Elimination always removes a surviving arm with the lowest running
/// mean, the lowest index among ties. Means accumulate across phases.
pub fn successive_reject<R, F>(
    arm_count: usize,
    t: usize,
    mut pull: F,
    rng: &mut R,
) -> Result<SrResult>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut R) -> Result<f64>,
{
    let schedule = SrSchedule::new(arm_count, t)?;
    let mut sums = vec![0.0f64; arm_count];
    let mut pulls = vec![0usize; arm_count];
    let mut surviving: Vec<usize> = (0..arm_count).collect();
    let mut eliminated = Vec::with_capacity(arm_count - 1);
    let mut previous = 0;
    for &target in &schedule.targets {
        for &arm in &surviving {
            for _ in previous..target {
                sums[arm] += pull(arm, rng)?;
                pulls[arm] += 1;
            }
        }
        previous = target;
        let mut worst = surviving[0];
        let mut worst_mean = f64::INFINITY;
        for &arm in &surviving {
            let mean = if pulls[arm] > 0 { sums[arm] / pulls[arm] as f64 } else { 0.0 };
            if mean < worst_mean {
                worst_mean = mean;
                worst = arm;
            }
        }
        surviving.retain(|&arm| arm != worst);
        eliminated.push(worst);
    }
    debug_assert_eq!(surviving.len(), 1);
    let estimates: Vec<f64> = sums
        .iter()
        .zip(&pulls)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    Ok(SrResult { chosen: surviving[0], estimates, pulls, eliminated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_matches_hand_computation() {
        // K=3, T=9: logbar = 1/2 + 1/2 + 1/3 = 4/3, spare = 6, so
        // n_1 = ceil(6 / (4/3 · 3)) = 2 and n_2 = ceil(6 / (4/3 · 2)) = 3.
        let s = SrSchedule::new(3, 9).unwrap();
        assert_eq!(s.targets, vec![2, 3]);
        assert_eq!(s.total_pulls(), 3 * 2 + 2);
        // K=2 degenerates to a single uniform comparison phase.
        let s = SrSchedule::new(2, 20).unwrap();
        assert_eq!(s.targets, vec![9]);
    }

    #[test]
    fn domain_errors() {
        assert!(SrSchedule::new(1, 10).is_err());
        assert!(SrSchedule::new(5, 4).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(successive_reject(5, 4, |_, _| Ok(0.0), &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn budget_is_never_exceeded_and_targets_grow(
            arm_count in 2usize..12,
            slack in 0usize..600,
        ) {
            let t = arm_count + slack;
            let s = SrSchedule::new(arm_count, t).unwrap();
            prop_assert!(s.total_pulls() <= t, "{} > {t}", s.total_pulls());
            for w in s.targets.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            // Running the procedure consumes exactly the schedule total.
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let result = successive_reject(arm_count, t, |_, r| {
                Ok(f64::from(r.random::<bool>()))
            }, &mut rng).unwrap();
            prop_assert_eq!(result.pulls.iter().sum::<usize>(), s.total_pulls());
            // Elimination order and phase targets line up.
            for (phase, &arm) in result.eliminated.iter().enumerate() {
                prop_assert_eq!(result.pulls[arm], s.targets[phase]);
            }
            prop_assert_eq!(result.pulls[result.chosen], *s.targets.last().unwrap());
        }
    }

    #[test]
    fn noiseless_distinct_means_always_find_the_best() {
        let means = [0.1, 0.9, 0.5, 0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let result =
            successive_reject(4, 40, |arm, _| Ok(means[arm]), &mut rng).unwrap();
        assert_eq!(result.chosen, 1);
        assert_eq!(result.eliminated, vec![0, 3, 2]);
    }

    #[test]
    fn ties_eliminate_the_lowest_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let result = successive_reject(4, 44, |_, _| Ok(0.5), &mut rng).unwrap();
        assert_eq!(result.eliminated, vec![0, 1, 2]);
        assert_eq!(result.chosen, 3);
    }

    #[test]
    fn minimal_budget_pulls_nothing_and_scores_zero() {
        // T = K makes every phase target 0: no pulls, every estimate 0,
        // elimination walks up the indices.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let result =
            successive_reject(5, 5, |_, _| panic!("no pulls expected"), &mut rng).unwrap();
        assert_eq!(result.pulls, vec![0; 5]);
        assert_eq!(result.estimates, vec![0.0; 5]);
        assert_eq!(result.chosen, 4);
    }
}
