//! Independent reference implementations and worst-case instances.
//!
//! Everything here re-derives a quantity the main modules also compute,
//! deliberately by a different route: literal definition scans instead of
//! sorted sweeps, explicit grid search instead of subgradient steps,
//! Monte-Carlo measurement instead of closed forms. Clarity beats speed
//! throughout; nothing is cached, shared, or vectorized. Tests compare
//! the fast paths against these.

use rand::Rng;
use serde::Serialize;

use crate::causal_model::{Action, CausalModel, ParentFactor};
use crate::error::{Error, Result};
use crate::general_bandit::{
    optimize_eta, run_fixed_design, EtaDistribution, TruncationLevels,
};
use crate::parallel_bandit::{ParallelEnv, RewardRule};

/// Grid searches larger than this many points are refused.
pub const GRID_POINT_CAP: u128 = 5_000_000;

/// Literal-definition effective arm count: for each candidate τ in
/// ascending order, count causes whose rarer value has probability
/// strictly below 1/τ and stop at the first τ that covers the count.
pub fn oracle_m_q(q: &[f64]) -> Result<usize> {
    let n = q.len();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 causes, got {n}")));
    }
    for &qi in q {
        if !(0.0..=1.0).contains(&qi) {
            return Err(Error::Domain(format!("q entry {qi} is not a probability")));
        }
    }
    for tau in 2..=n {
        let mut below = 0;
        for &qi in q {
            let rarer = if qi < 1.0 - qi { qi } else { 1.0 - qi };
            if rarer < 1.0 / tau as f64 {
                below += 1;
            }
        }
        if below <= tau {
            return Ok(tau);
        }
    }
    Ok(n)
}

/// Literal-definition design objective: for every action, sum
/// P_a(row)²/Q(row) over rows the mixture reaches, recomputing Q from
/// scratch each time, and take the worst action.
pub fn oracle_m_eta(factors: &[ParentFactor], eta: &EtaDistribution) -> Result<f64> {
    if factors.is_empty() || eta.len() != factors.len() {
        return Err(Error::Domain("factor and design lengths disagree".into()));
    }
    let rows = factors[0].probs().len();
    let mut worst = f64::NEG_INFINITY;
    for f in factors {
        let mut sum = 0.0;
        for row in 0..rows {
            let mut q = 0.0;
            for (other, &weight) in factors.iter().zip(eta.weights()) {
                q += weight * other.probs()[row];
            }
            if q > 0.0 {
                let p = f.probs()[row];
                sum += p * p / q;
            }
        }
        if sum > worst {
            worst = sum;
        }
    }
    Ok(worst)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result * (n - i) / (i + 1);
    }
    result
}

fn for_each_composition(
    units: usize,
    slots: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if slots == 1 {
        current.push(units);
        visit(current);
        current.pop();
        return;
    }
    // Descending first coordinate, so all-mass-on-the-first-action is the
    // first point visited and ties resolve toward it.
    for c in (0..=units).rev() {
        current.push(c);
        for_each_composition(units - c, slots - 1, current, visit);
        current.pop();
    }
}

/// Exhaustive design search over the simplex grid with the given step
/// (0.05 or 0.02), minimizing [`oracle_m_eta`]. The earliest grid point
/// wins ties. Refuses grids beyond [`GRID_POINT_CAP`] points.
pub fn grid_eta(factors: &[ParentFactor], step: f64) -> Result<EtaDistribution> {
    if factors.is_empty() {
        return Err(Error::Domain("no actions".into()));
    }
    let units = if step == 0.05 {
        20usize
    } else if step == 0.02 {
        50usize
    } else {
        return Err(Error::Domain(format!("grid step {step} is not 0.05 or 0.02")));
    };
    let slots = factors.len();
    let points = binomial((units + slots - 1) as u128, (slots - 1) as u128);
    if points > GRID_POINT_CAP {
        return Err(Error::CapacityExceeded {
            size: points.min(usize::MAX as u128) as usize,
            cap: GRID_POINT_CAP as usize,
        });
    }
    let mut best_value = f64::INFINITY;
    let mut best_weights: Option<Vec<f64>> = None;
    let mut scratch = Vec::with_capacity(slots);
    for_each_composition(units, slots, &mut scratch, &mut |counts| {
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / units as f64).collect();
        let eta = EtaDistribution::new(weights).expect("grid point is a distribution");
        let value = oracle_m_eta(factors, &eta).expect("lengths match");
        if value < best_value {
            best_value = value;
            best_weights = Some(eta.weights().to_vec());
        }
    });
    EtaDistribution::new(best_weights.expect("grid is never empty"))
}

// ── worst-case instances ────────────────────────────────────────────────

/// A parallel-graph instance whose reward gap sits on one designated
/// cause: P(Y=1) = 1/2 + ε·1{X_target = 1}, or exactly 1/2 everywhere
/// when `target` is 0. `target` is 1-based.
#[derive(Debug, Clone, Serialize)]
pub struct HardInstance {
    pub q: Vec<f64>,
    pub target: usize,
    pub epsilon: f64,
}

impl HardInstance {
    pub fn build(&self) -> Result<ParallelEnv> {
        if self.target > self.q.len() {
            return Err(Error::Domain(format!(
                "target {} exceeds the cause count {}",
                self.target,
                self.q.len()
            )));
        }
        let reward = if self.target == 0 {
            RewardRule::Constant(0.5)
        } else {
            if !(self.epsilon > 0.0 && self.epsilon <= 0.25) {
                return Err(Error::Domain(format!(
                    "gap {} must lie in (0, 1/4]",
                    self.epsilon
                )));
            }
            RewardRule::Split { var: self.target - 1, on: 0.5 + self.epsilon, off: 0.5 }
        };
        ParallelEnv::new(self.q.clone(), reward)
    }
}

/// Builds the gap-on-one-cause instance directly.
pub fn hard_instance(n: usize, q: Vec<f64>, target: usize, epsilon: f64) -> Result<ParallelEnv> {
    if q.len() != n {
        return Err(Error::Domain(format!("q has {} entries for {n} causes", q.len())));
    }
    HardInstance { q, target, epsilon }.build()
}

// ── measurement harnesses ───────────────────────────────────────────────

/// Monte-Carlo estimate of an estimator's bias for one action.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BiasEstimate {
    /// true mean minus the average estimate (positive = downward bias).
    pub bias: f64,
    pub std_error: f64,
}

/// Measures μ_a − E[μ̂_a] for the fixed-design estimator by running it
/// `reps` times at budget `t` and averaging the target action's estimate.
#[allow(clippy::too_many_arguments)]
pub fn empirical_bias<R: Rng + ?Sized>(
    model: &CausalModel,
    actions: &[Action],
    target: &Action,
    eta: &EtaDistribution,
    trunc: &TruncationLevels,
    t: usize,
    reps: usize,
    rng: &mut R,
) -> Result<BiasEstimate> {
    if reps < 2 {
        return Err(Error::Domain("need at least 2 replications".into()));
    }
    let index = actions
        .iter()
        .position(|a| a == target)
        .ok_or_else(|| Error::InvalidAction(format!("{target} is not in the action set")))?;
    let truth = model.true_mean(target)?;
    let mut estimates = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (_, state) = run_fixed_design(model, actions, eta, trunc, t, rng)?;
        estimates.push(state.mu_hat[index]);
    }
    let mean = estimates.iter().sum::<f64>() / reps as f64;
    let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
        / (reps - 1) as f64;
    Ok(BiasEstimate { bias: truth - mean, std_error: (var / reps as f64).sqrt() })
}

// ── anchor-value report ─────────────────────────────────────────────────

/// Hand-checkable anchor values for the worked examples in the test
/// suite, regenerated on demand by `verify`.
#[derive(Debug, Clone, Serialize)]
pub struct DerivedReport {
    pub effective_arms_uniform_half_n5: usize,
    pub effective_arms_all_zero_n7: usize,
    pub effective_arms_mixed_n6: usize,
    /// P(X1, X2 | do(X2=1)) rows (0,0),(0,1),(1,0),(1,1) in the
    /// confounded fixture with P(X1=1)=0.3 and X2 copying X1.
    pub confounded_intervened_joint: [f64; 4],
    pub confounded_intervened_mean: f64,
    pub confounded_observational_conditional: f64,
    pub observe_phase_trace: ObservePhaseTrace,
    /// Ratio of observing (1,0) under do(X1=1) when all sampling mass
    /// sits on do(), two fair causes.
    pub ratio_all_mass_observational: f64,
    /// Shared truncation level at m(η)=2, T=400, 101 actions.
    pub budget_truncation_level: f64,
    pub design_uniform_half_pair: Vec<f64>,
    pub design_all_zero_n4: Vec<f64>,
    pub design_objective_all_zero_n4: f64,
    pub optimized_objective_n3: f64,
    pub grid_objective_n3: f64,
    /// ε′ and the resulting soft-arm mean at q_1 = 1/2, ε = 0.1.
    pub soft_arm_gap_q_half: f64,
    pub soft_arm_mean_q_half: f64,
    /// Gap instance with q = (1/2,…), target 3, ε = 0.1.
    pub gap_instance_target_mean: f64,
    pub gap_instance_observational_mean: f64,
    pub reject_schedule_k3_t9: Vec<usize>,
}

/// The worked four-sample observation trace on two fair causes.
#[derive(Debug, Clone, Serialize)]
pub struct ObservePhaseTrace {
    pub occurrence_rate: f64,
    pub effective_arms: usize,
    pub kept_arms: usize,
    pub even_share: usize,
    pub leftover_rounds: usize,
}

/// Recomputes every worked-example value from definitions, mostly by
/// literal arithmetic spelled out inline.
pub fn derived_report() -> Result<DerivedReport> {
    // Effective arm counts by definition scan.
    let uniform_half = oracle_m_q(&[0.5; 5])?;
    let all_zero = oracle_m_q(&[0.0; 7])?;
    let mixed = oracle_m_q(&[0.0, 0.0, 0.4, 0.5, 0.5, 0.5])?;

    // Confounded fixture, by explicit enumeration of the two worlds:
    // X1=0 (weight 0.7) forces X2=0, X1=1 (weight 0.3) forces X2=1;
    // intervening do(X2=1) keeps the X1 weights and pins X2.
    let p_x1 = [0.7, 0.3];
    let p_y_given = [[0.1, 0.2], [0.7, 0.9]]; // [x1][x2]
    let joint = [0.0, p_x1[0], 0.0, p_x1[1]];
    let intervened_mean = p_x1[0] * p_y_given[0][1] + p_x1[1] * p_y_given[1][1];
    // Observationally X2=1 happens only alongside X1=1.
    let observational_conditional = p_y_given[1][1];

    // Observation trace: 4 samples on 2 fair causes give every arm rate
    // 1/2, the definition scan stops at τ=2, all 5 arms stay, and the 4
    // second-half rounds spread one apiece.
    let budget = 8usize;
    let kept = 5usize;
    let even_share = budget / (2 * kept);
    let trace = ObservePhaseTrace {
        occurrence_rate: 2.0 / 4.0,
        effective_arms: oracle_m_q(&[0.5, 0.5])?,
        kept_arms: kept,
        even_share,
        leftover_rounds: budget / 2 - even_share * kept,
    };

    // Ratio fixture: P_{do(X1=1)}(x=(1,0)) = 1/2 against Q = P_do() = 1/4.
    let ratio = 0.5 / 0.25;

    let truncation = (2.0f64 * 400.0 / (2.0f64 * 400.0 * 101.0).ln()).sqrt();

    // Low-probability designs, straight from the rule: weight 1/(2m) on
    // every arm whose event probability is strictly below 1/m.
    let design_half_pair = vec![1.0, 0.0, 0.0, 0.0, 0.0];
    let m4 = oracle_m_q(&[0.0; 4])? as f64;
    let mut design_zero = vec![0.0; 9];
    for i in 0..4 {
        design_zero[2 + 2 * i] = 1.0 / (2.0 * m4); // only X_i=1 is rare
    }
    design_zero[0] = 1.0 - 4.0 / (2.0 * m4);
    let factors_zero = dense_factors(&[0.0; 4])?;
    let design_objective =
        oracle_m_eta(&factors_zero, &EtaDistribution::new(design_zero.clone())?)?;

    // Optimizer against the exhaustive grid on the 3-cause fixture.
    let factors_n3 = dense_factors(&[0.1, 0.5, 0.5])?;
    let optimized = optimize_eta(&factors_n3, 1e-4, 5000)?;
    let optimized_objective = oracle_m_eta(&factors_n3, &optimized.eta)?;
    let grid_objective = oracle_m_eta(&factors_n3, &grid_eta(&factors_n3, 0.05)?)?;

    // Soft-arm calibration at q1 = 1/2, ε = 0.1: ε' = q1·ε/(1−q1) = 0.1,
    // so the do(X1=0) mean is 0.4.
    let soft_gap = 0.5 * 0.1 / (1.0 - 0.5);
    let soft_mean = 0.5 - soft_gap;

    // Gap instance: target mean 1/2 + ε, observational mean 1/2 + q·ε.
    let gap_target = 0.5 + 0.1;
    let gap_observational = 0.5 + 0.5 * 0.1;

    // Phase schedule K=3, T=9: logbar = 4/3, spare = 6.
    let logbar: f64 = 0.5 + 1.0 / 2.0 + 1.0 / 3.0;
    let schedule = vec![
        (6.0 / (logbar * 3.0)).ceil() as usize,
        (6.0 / (logbar * 2.0)).ceil() as usize,
    ];

    Ok(DerivedReport {
        effective_arms_uniform_half_n5: uniform_half,
        effective_arms_all_zero_n7: all_zero,
        effective_arms_mixed_n6: mixed,
        confounded_intervened_joint: joint,
        confounded_intervened_mean: intervened_mean,
        confounded_observational_conditional: observational_conditional,
        observe_phase_trace: trace,
        ratio_all_mass_observational: ratio,
        budget_truncation_level: truncation,
        design_uniform_half_pair: design_half_pair,
        design_all_zero_n4: design_zero,
        design_objective_all_zero_n4: design_objective,
        optimized_objective_n3: optimized_objective,
        grid_objective_n3: grid_objective,
        soft_arm_gap_q_half: soft_gap,
        soft_arm_mean_q_half: soft_mean,
        gap_instance_target_mean: gap_target,
        gap_instance_observational_mean: gap_observational,
        reject_schedule_k3_t9: schedule,
    })
}

/// Dense factors for all 2N+1 canonical actions of a parallel instance
/// with a flat reward (the reward table does not enter any factor).
fn dense_factors(q: &[f64]) -> Result<Vec<ParentFactor>> {
    let model = crate::causal_model::parallel_model(q, &vec![0.5; 1 << q.len()])?;
    let mut actions = vec![Action::empty()];
    for i in 0..q.len() {
        actions.push(Action::single(i, 0));
        actions.push(Action::single(i, 1));
    }
    actions.iter().map(|a| model.interventional_parent_dist(a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn definition_scan_matches_anchors() {
        assert_eq!(oracle_m_q(&[0.5; 5]).unwrap(), 2);
        assert_eq!(oracle_m_q(&[0.0; 7]).unwrap(), 7);
        assert_eq!(oracle_m_q(&[0.0, 0.0, 0.4, 0.5, 0.5, 0.5]).unwrap(), 3);
        assert!(oracle_m_q(&[0.5]).is_err());
    }

    #[test]
    fn gap_instances_match_their_examples() {
        // No target: every action's mean is exactly 1/2.
        let env = hard_instance(3, vec![0.2, 0.5, 0.9], 0, 0.0).unwrap();
        assert!(env.true_means().iter().all(|&mu| mu == 0.5));
        // Target 3 with ε = 0.1 on fair causes.
        let env = hard_instance(4, vec![0.5; 4], 3, 0.1).unwrap();
        assert_eq!(env.true_mean(&Action::single(2, 1)).unwrap(), 0.6);
        assert_eq!(env.true_mean(&Action::empty()).unwrap(), 0.55);
        assert_eq!(env.true_mean(&Action::single(2, 0)).unwrap(), 0.5);
        // ε = 1/4 with a never-firing target: observing costs exactly 1/4.
        let env = hard_instance(2, vec![0.0, 0.5], 1, 0.25).unwrap();
        let regret =
            crate::parallel_bandit::simple_regret(&env, &Action::empty()).unwrap();
        assert_eq!(regret, 0.25);
    }

    #[test]
    fn gap_instances_reject_bad_arguments() {
        assert!(hard_instance(2, vec![0.5; 2], 1, 0.3).is_err());
        assert!(hard_instance(2, vec![0.5; 2], 1, 0.0).is_err());
        assert!(hard_instance(2, vec![0.5; 2], 3, 0.1).is_err());
        assert!(hard_instance(3, vec![0.5; 2], 1, 0.1).is_err());
    }

    #[test]
    fn grid_search_validates_and_resolves_ties_to_the_first_point() {
        let factors = dense_factors(&[0.3, 0.3]).unwrap();
        assert!(grid_eta(&factors, 0.03).is_err());
        // Two copies of one action: every design scores 1, so the first
        // grid point (all mass on the first slot) wins.
        let model = crate::causal_model::parallel_model(&[0.3], &[0.5, 0.5]).unwrap();
        let f = model.interventional_parent_dist(&Action::single(0, 1)).unwrap();
        let twins = vec![f.clone(), f];
        let eta = grid_eta(&twins, 0.05).unwrap();
        assert_eq!(eta.weights(), &[1.0, 0.0]);
        assert_eq!(oracle_m_eta(&twins, &eta).unwrap(), 1.0);
    }

    #[test]
    fn untruncated_estimator_measures_as_unbiased() {
        let model = crate::causal_model::parallel_model(&[0.4, 0.6], &{
            let mut t = vec![0.3; 4];
            t[3] = 0.9;
            t
        })
        .unwrap();
        let mut actions = vec![Action::empty()];
        for i in 0..2 {
            actions.push(Action::single(i, 0));
            actions.push(Action::single(i, 1));
        }
        let eta = EtaDistribution::uniform(5).unwrap();
        let trunc = TruncationLevels::infinite(5);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let estimate = empirical_bias(
            &model,
            &actions,
            &Action::single(0, 1),
            &eta,
            &trunc,
            60,
            2000,
            &mut rng,
        )
        .unwrap();
        assert!(
            estimate.bias.abs() <= 4.0 * estimate.std_error,
            "bias {} vs se {}",
            estimate.bias,
            estimate.std_error
        );
    }

    #[test]
    fn report_regenerates_the_anchor_values() {
        // The cheap fields only; the optimizer-versus-grid comparison runs
        // in the full suite already.
        assert_eq!(oracle_m_q(&[0.5, 0.5]).unwrap(), 2);
        let logbar: f64 = 0.5 + 0.5 + 1.0 / 3.0;
        assert_eq!((6.0 / (logbar * 3.0)).ceil() as usize, 2);
        assert_eq!((6.0 / (logbar * 2.0)).ceil() as usize, 3);
        let b = (2.0f64 * 400.0 / (2.0f64 * 400.0 * 101.0).ln()).sqrt();
        assert!((b - 8.4142).abs() < 5e-4);
    }
}
