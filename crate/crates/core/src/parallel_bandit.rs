//! The parallel causal graph: N independent binary causes X_1..X_N of a
//! binary reward Y, with the 2N+1 single-variable interventions plus
//! `do()` as the action set.
//!
//! The two-phase algorithm spends half its budget observing, counts how
//! often each arm's event occurred naturally, and then splits the second
//! half evenly across the arms that observation couldn't resolve. How many
//! such arms there can be is governed by [`compute_m`], the instance's
//! effective arm count.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::causal_model::{
    parallel_model, sample_categorical, Action, CausalModel, DEFAULT_ENUM_CAP,
};
use crate::error::{Error, Result};
use crate::util::{argmax_lowest, split_budget};

/// Largest N for which dense 2^N reward tables are accepted.
pub const MAX_TABLE_VARS: usize = 20;

/// Reward distribution P(Y = 1 | X) for a [`ParallelEnv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RewardRule {
    /// Dense table with 2^N rows, X_1 most significant.
    Table(Vec<f64>),
    /// Y depends on a single designated cause: P(Y=1) is `on` when
    /// X_var = 1 and `off` otherwise. Scales to large N where a dense
    /// table cannot.
    Split { var: usize, on: f64, off: f64 },
    /// Y ignores X entirely.
    Constant(f64),
}

/// N independent Bernoulli causes and a reward rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelEnv {
    q: Vec<f64>,
    reward: RewardRule,
}

fn require_prob(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidModel(format!("{what} = {p} is not a probability")));
    }
    Ok(())
}

impl ParallelEnv {
    pub fn new(q: Vec<f64>, reward: RewardRule) -> Result<Self> {
        let n = q.len();
        if n == 0 {
            return Err(Error::InvalidModel("need at least one cause".into()));
        }
        for &qi in &q {
            require_prob(qi, "cause probability")?;
        }
        match &reward {
            RewardRule::Table(t) => {
                if n > MAX_TABLE_VARS {
                    return Err(Error::CapacityExceeded { size: usize::MAX, cap: 1 << MAX_TABLE_VARS });
                }
                if t.len() != 1 << n {
                    return Err(Error::InvalidModel(format!(
                        "reward table must have 2^{n} rows, has {}",
                        t.len()
                    )));
                }
                for &p in t {
                    require_prob(p, "reward probability")?;
                }
            }
            RewardRule::Split { var, on, off } => {
                if *var >= n {
                    return Err(Error::InvalidModel(format!("split variable {var} out of range")));
                }
                require_prob(*on, "reward probability")?;
                require_prob(*off, "reward probability")?;
            }
            RewardRule::Constant(c) => require_prob(*c, "reward probability")?,
        }
        Ok(ParallelEnv { q, reward })
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn reward_rule(&self) -> &RewardRule {
        &self.reward
    }

    pub fn var_count(&self) -> usize {
        self.q.len()
    }

    /// Size of the canonical action set: do() plus both values of every
    /// cause.
    pub fn action_count(&self) -> usize {
        2 * self.q.len() + 1
    }

    /// Canonical action order: index 0 is do(), index 1 + 2i + j is
    /// do(X_{i+1} = j).
    pub fn action(&self, index: usize) -> Action {
        match self.forced(index) {
            None => Action::empty(),
            Some((var, value)) => Action::single(var, value),
        }
    }

    /// Index of a canonical action, if it is one.
    pub fn action_index(&self, action: &Action) -> Option<usize> {
        match *action.assignments() {
            [] => Some(0),
            [(var, value)] if var < self.q.len() && value < 2 => Some(1 + 2 * var + value),
            _ => None,
        }
    }

    fn forced(&self, index: usize) -> Option<(usize, usize)> {
        debug_assert!(index < self.action_count());
        if index == 0 {
            None
        } else {
            Some(((index - 1) / 2, (index - 1) % 2))
        }
    }

    pub fn reward_prob(&self, x: &[u8]) -> f64 {
        match &self.reward {
            RewardRule::Constant(c) => *c,
            RewardRule::Split { var, on, off } => {
                if x[*var] == 1 {
                    *on
                } else {
                    *off
                }
            }
            RewardRule::Table(t) => {
                let code = x.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                t[code]
            }
        }
    }

    /// Draws all causes (pinned one excepted) and then the reward. Pinned
    /// coordinates consume no randomness.
    fn draw<R: Rng + ?Sized>(
        &self,
        forced: Option<(usize, usize)>,
        x: &mut [u8],
        rng: &mut R,
    ) -> u8 {
        for (k, &qk) in self.q.iter().enumerate() {
            x[k] = match forced {
                Some((var, value)) if var == k => value as u8,
                _ => sample_categorical(rng, &[1.0 - qk, qk]) as u8,
            };
        }
        let r = self.reward_prob(x);
        sample_categorical(rng, &[1.0 - r, r]) as u8
    }

    /// Samples (assignment, reward) under a canonical action index.
    pub fn sample_by_index<R: Rng + ?Sized>(
        &self,
        index: usize,
        rng: &mut R,
    ) -> Result<(Vec<u8>, u8)> {
        if index >= self.action_count() {
            return Err(Error::InvalidAction(format!("action index {index} out of range")));
        }
        let mut x = vec![0u8; self.q.len()];
        let y = self.draw(self.forced(index), &mut x, rng);
        Ok((x, y))
    }

    /// As [`Self::sample_by_index`] into a caller-provided buffer of
    /// length N, avoiding the per-sample allocation in tight loops.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        index: usize,
        x: &mut [u8],
        rng: &mut R,
    ) -> Result<u8> {
        if index >= self.action_count() || x.len() != self.q.len() {
            return Err(Error::InvalidAction(format!("action index {index} out of range")));
        }
        Ok(self.draw(self.forced(index), x, rng))
    }

    /// Samples under an arbitrary (possibly multi-variable) intervention.
    pub fn sample<R: Rng + ?Sized>(&self, action: &Action, rng: &mut R) -> Result<(Vec<u8>, u8)> {
        self.validate_action(action)?;
        let mut x = vec![0u8; self.q.len()];
        for (k, &qk) in self.q.iter().enumerate() {
            x[k] = match action.value_for(k) {
                Some(value) => value as u8,
                None => sample_categorical(rng, &[1.0 - qk, qk]) as u8,
            };
        }
        let r = self.reward_prob(&x);
        Ok((x, sample_categorical(rng, &[1.0 - r, r]) as u8))
    }

    pub fn validate_action(&self, action: &Action) -> Result<()> {
        for &(var, value) in action.assignments() {
            if var >= self.q.len() {
                return Err(Error::InvalidAction(format!("unknown variable {var}")));
            }
            if value >= 2 {
                return Err(Error::InvalidAction(format!("value {value} for binary variable")));
            }
        }
        Ok(())
    }

    /// Exact E[Y | do(action)] in closed form (table rules enumerate their
    /// 2^N rows, which construction has already bounded).
    pub fn true_mean(&self, action: &Action) -> Result<f64> {
        self.validate_action(action)?;
        match &self.reward {
            RewardRule::Constant(c) => Ok(*c),
            RewardRule::Split { var, on, off } => {
                let p1 = action.value_for(*var).map_or(self.q[*var], |v| v as f64);
                Ok(p1 * on + (1.0 - p1) * off)
            }
            RewardRule::Table(t) => {
                let n = self.q.len();
                let mut mean = 0.0;
                'rows: for (code, &r) in t.iter().enumerate() {
                    let mut w = 1.0;
                    for k in 0..n {
                        let xk = (code >> (n - 1 - k)) & 1;
                        match action.value_for(k) {
                            Some(v) if v != xk => continue 'rows,
                            Some(_) => {}
                            None => w *= if xk == 1 { self.q[k] } else { 1.0 - self.q[k] },
                        }
                    }
                    mean += w * r;
                }
                Ok(mean)
            }
        }
    }

    /// Means of all canonical actions, in action order.
    pub fn true_means(&self) -> Vec<f64> {
        (0..self.action_count())
            .map(|a| self.true_mean(&self.action(a)).expect("canonical action is valid"))
            .collect()
    }

    /// Expands this environment into an explicit [`CausalModel`]. Requires
    /// N small enough for a dense reward table.
    pub fn to_causal_model(&self) -> Result<CausalModel> {
        let n = self.q.len();
        if n > MAX_TABLE_VARS {
            return Err(Error::CapacityExceeded { size: usize::MAX, cap: DEFAULT_ENUM_CAP });
        }
        let table: Vec<f64> = match &self.reward {
            RewardRule::Table(t) => t.clone(),
            RewardRule::Constant(c) => vec![*c; 1 << n],
            RewardRule::Split { var, on, off } => (0..1usize << n)
                .map(|code| if (code >> (n - 1 - var)) & 1 == 1 { *on } else { *off })
                .collect(),
        };
        parallel_model(&self.q, &table)
    }
}

// ── the effective arm count m(q) ────────────────────────────────────────

/// The instance-dependent effective number of arms.
///
/// For each candidate τ, count the causes whose rarer value has
/// probability strictly below 1/τ; m(q) is the smallest τ ∈ {2, …, N}
/// for which that count is at most τ. The count can only shrink as τ
/// grows, and at τ = N it is trivially ≤ N, so the scan always lands.
pub fn compute_m(q: &[f64]) -> Result<usize> {
    let n = q.len();
    if n < 2 {
        return Err(Error::Domain(format!("m(q) needs at least 2 causes, got {n}")));
    }
    for &qi in q {
        if !(0.0..=1.0).contains(&qi) {
            return Err(Error::Domain(format!("q entry {qi} is not a probability")));
        }
    }
    let mut rarer: Vec<f64> = q.iter().map(|&qi| qi.min(1.0 - qi)).collect();
    rarer.sort_unstable_by(f64::total_cmp);
    for tau in 2..=n {
        let below = rarer.partition_point(|&v| v < 1.0 / tau as f64);
        if below <= tau {
            return Ok(tau);
        }
    }
    Ok(n)
}

// ── the two-phase algorithm ─────────────────────────────────────────────

/// Everything the observational half of the budget produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Phase1Summary {
    /// Times each arm's event occurred: rounds for do(), occurrences of
    /// X_i = j for the others. The two arms of one cause sum to the round
    /// count.
    pub counts: Vec<usize>,
    /// Observational reward means per arm (0 where an arm never
    /// occurred).
    pub mu_hat: Vec<f64>,
    /// Empirical occurrence rates, with do() pinned to 0 so it is always
    /// retained for the interventional phase.
    pub p_hat: Vec<f64>,
    /// Estimated cause probabilities q̂_i = p̂_{do(X_i=1)}.
    pub q_hat: Vec<f64>,
    /// m(q̂).
    pub m_hat: usize,
    /// Arms with p̂ ≤ 1/m̂, ascending. Observation alone cannot pin these
    /// down, so they get fresh interventional samples.
    pub low_prob_arms: Vec<usize>,
}

/// Summarizes observational (assignment, reward) pairs for the parallel
/// graph with `n` causes.
pub fn summarize_phase1(n: usize, samples: &[(Vec<u8>, u8)]) -> Result<Phase1Summary> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 causes, got {n}")));
    }
    if samples.is_empty() {
        return Err(Error::Domain("no observational samples".into()));
    }
    let rounds = samples.len();
    let action_count = 2 * n + 1;
    let mut counts = vec![0usize; action_count];
    let mut sums = vec![0f64; action_count];
    counts[0] = rounds;
    for (x, y) in samples {
        debug_assert_eq!(x.len(), n);
        sums[0] += f64::from(*y);
        for (i, &xi) in x.iter().enumerate() {
            let arm = 1 + 2 * i + xi as usize;
            counts[arm] += 1;
            sums[arm] += f64::from(*y);
        }
    }
    let mu_hat: Vec<f64> = counts
        .iter()
        .zip(&sums)
        .map(|(&c, &s)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let mut p_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / rounds as f64).collect();
    p_hat[0] = 0.0;
    let q_hat: Vec<f64> = (0..n).map(|i| p_hat[2 + 2 * i]).collect();
    let m_hat = compute_m(&q_hat)?;
    let threshold = 1.0 / m_hat as f64;
    let low_prob_arms: Vec<usize> =
        (0..action_count).filter(|&a| p_hat[a] <= threshold).collect();
    Ok(Phase1Summary { counts, mu_hat, p_hat, q_hat, m_hat, low_prob_arms })
}

/// Full record of one two-phase run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoPhaseState {
    /// Total budget (phase 1 used t/2 rounds).
    pub t: usize,
    /// Phase-1 occurrence counts per arm.
    pub counts: Vec<usize>,
    /// Final reward estimates: fresh interventional means for flagged
    /// arms, observational means for the rest.
    pub mu_hat: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub m_hat: usize,
    pub low_prob_arms: Vec<usize>,
    /// Even share floor(t / (2·|A|)) each flagged arm is guaranteed.
    pub t_a: usize,
    /// Actual phase-2 pulls per action (leftover rounds go one apiece to
    /// the first flagged arms in action order).
    pub phase2_budget: Vec<usize>,
    /// Index of the selected action.
    pub chosen: usize,
}

/// Runs the two-phase observe-then-intervene algorithm with total budget
/// `t` (even) and returns the selected action with the full run record.
pub fn run_two_phase<R: Rng + ?Sized>(
    env: &ParallelEnv,
    t: usize,
    rng: &mut R,
) -> Result<(Action, TwoPhaseState)> {
    if t < 2 || !t.is_multiple_of(2) {
        return Err(Error::Domain(format!("budget must be even and positive, got {t}")));
    }
    let n = env.var_count();
    if n < 2 {
        return Err(Error::Domain("need at least 2 causes".into()));
    }

    let mut samples = Vec::with_capacity(t / 2);
    for _ in 0..t / 2 {
        samples.push(env.sample_by_index(0, rng)?);
    }
    let summary = summarize_phase1(n, &samples)?;

    let arms = &summary.low_prob_arms;
    let t_a = (t / 2) / arms.len();
    let shares = split_budget(t / 2, arms.len());
    let mut phase2_budget = vec![0usize; env.action_count()];
    let mut mu_hat = summary.mu_hat.clone();
    let mut x = vec![0u8; n];
    for (&arm, &share) in arms.iter().zip(&shares) {
        phase2_budget[arm] = share;
        let mut sum = 0.0;
        for _ in 0..share {
            sum += f64::from(env.sample_into(arm, &mut x, rng)?);
        }
        // Fresh-sample estimate only; an arm that got no interventional
        // rounds scores 0 rather than reusing phase-1 data.
        mu_hat[arm] = if share > 0 { sum / share as f64 } else { 0.0 };
    }

    let chosen = argmax_lowest(&mu_hat);
    let state = TwoPhaseState {
        t,
        counts: summary.counts,
        mu_hat,
        p_hat: summary.p_hat,
        q_hat: summary.q_hat,
        m_hat: summary.m_hat,
        low_prob_arms: summary.low_prob_arms,
        t_a,
        phase2_budget,
        chosen,
    };
    Ok((env.action(chosen), state))
}

/// Exact simple regret of a chosen action: best canonical mean minus the
/// chosen action's mean.
pub fn simple_regret(env: &ParallelEnv, chosen: &Action) -> Result<f64> {
    let best = env.true_means().into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(best - env.true_mean(chosen)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn split_env(n: usize, epsilon: f64) -> ParallelEnv {
        let mut q = vec![0.5; n];
        q[0] = 0.0;
        q[1] = 0.0;
        ParallelEnv::new(q, RewardRule::Split { var: 0, on: 0.5 + epsilon, off: 0.5 }).unwrap()
    }

    #[test]
    fn action_indexing_round_trips() {
        let env = split_env(4, 0.3);
        for index in 0..env.action_count() {
            assert_eq!(env.action_index(&env.action(index)), Some(index));
        }
        assert_eq!(env.action_index(&Action::new(vec![(0, 1), (1, 0)]).unwrap()), None);
    }

    #[test]
    fn m_matches_hand_checked_anchors() {
        assert_eq!(compute_m(&[0.5; 5]).unwrap(), 2);
        assert_eq!(compute_m(&[0.0; 7]).unwrap(), 7);
        assert_eq!(compute_m(&[0.0, 0.0, 0.4, 0.5, 0.5, 0.5]).unwrap(), 3);
        assert!(compute_m(&[0.5]).is_err());
        assert!(compute_m(&[0.5, 1.5]).is_err());
    }

    proptest! {
        #[test]
        fn m_is_invariant_to_flips_and_permutations(
            q in proptest::collection::vec(0.0f64..=1.0, 2..=12),
            seed in 0u64..100,
        ) {
            let m = compute_m(&q).unwrap();
            let flipped: Vec<f64> = q.iter().map(|&v| 1.0 - v).collect();
            prop_assert_eq!(compute_m(&flipped).unwrap(), m);
            let mut permuted = q.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..permuted.len()).rev() {
                let j = rng.random_range(0..=i);
                permuted.swap(i, j);
            }
            prop_assert_eq!(compute_m(&permuted).unwrap(), m);
            prop_assert!((2..=q.len()).contains(&m));
        }
    }

    #[test]
    fn split_reward_means_are_exact() {
        let env = split_env(6, 0.3);
        let means = env.true_means();
        assert_eq!(means[0], 0.5);
        assert_eq!(means[1], 0.5); // do(X1=0)
        assert_eq!(means[2], 0.8); // do(X1=1)
        for &mu in &means[3..] {
            assert_eq!(mu, 0.5);
        }
        let chosen = Action::single(0, 1);
        assert_eq!(simple_regret(&env, &chosen).unwrap(), 0.0);
        let regret = simple_regret(&env, &Action::single(0, 0)).unwrap();
        assert!((regret - 0.3).abs() < 1e-15);
    }

    #[test]
    fn phase1_summary_matches_hand_trace() {
        // Four observational samples covering each cause value twice:
        // every arm has count 2, rate 1/2, so m̂ = 2 and all five arms
        // stay flagged.
        let samples: Vec<(Vec<u8>, u8)> = vec![
            (vec![0, 0], 0),
            (vec![1, 1], 0),
            (vec![0, 1], 0),
            (vec![1, 0], 0),
        ];
        let s = summarize_phase1(2, &samples).unwrap();
        assert_eq!(s.counts, vec![4, 2, 2, 2, 2]);
        assert_eq!(s.p_hat, vec![0.0, 0.5, 0.5, 0.5, 0.5]);
        assert_eq!(s.q_hat, vec![0.5, 0.5]);
        assert_eq!(s.m_hat, 2);
        assert_eq!(s.low_prob_arms, vec![0, 1, 2, 3, 4]);
        assert_eq!(crate::util::split_budget(4, 5), vec![1, 1, 1, 1, 0]);
    }

    #[test]
    fn rejects_odd_budgets_and_single_cause() {
        let env = split_env(3, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(run_two_phase(&env, 7, &mut rng).is_err());
        assert!(run_two_phase(&env, 0, &mut rng).is_err());
        let tiny = ParallelEnv::new(vec![0.4], RewardRule::Constant(0.5)).unwrap();
        assert!(run_two_phase(&tiny, 10, &mut rng).is_err());
    }

    #[test]
    fn ties_resolve_to_lowest_action_index() {
        // Constant reward 1: every sampled arm estimates exactly 1, and
        // do() is always flagged, so the winner is do() itself.
        let env = ParallelEnv::new(vec![0.5, 0.5], RewardRule::Constant(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (chosen, state) = run_two_phase(&env, 20, &mut rng).unwrap();
        assert_eq!(chosen, Action::empty());
        assert_eq!(state.chosen, 0);
    }

    #[test]
    fn budget_bookkeeping_is_exact() {
        let env = split_env(5, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (_, state) = run_two_phase(&env, 60, &mut rng).unwrap();
        for i in 0..5 {
            assert_eq!(state.counts[1 + 2 * i] + state.counts[2 + 2 * i], 30);
        }
        assert_eq!(state.phase2_budget.iter().sum::<usize>(), 30);
        let budgets: Vec<usize> =
            state.low_prob_arms.iter().map(|&a| state.phase2_budget[a]).collect();
        for &b in &budgets {
            assert!(b == state.t_a || b == state.t_a + 1);
        }
        for (a, &b) in state.phase2_budget.iter().enumerate() {
            if !state.low_prob_arms.contains(&a) {
                assert_eq!(b, 0);
            }
        }
    }

    #[test]
    fn environment_and_expanded_model_sample_identically() {
        let q = vec![0.2, 0.5, 0.8];
        let table: Vec<f64> = (0..8).map(|r| (r as f64 + 0.5) / 10.0).collect();
        let env = ParallelEnv::new(q, RewardRule::Table(table)).unwrap();
        let model = env.to_causal_model().unwrap();
        for index in 0..env.action_count() {
            let action = env.action(index);
            let mu_env = env.true_mean(&action).unwrap();
            let mu_model = model.true_mean(&action).unwrap();
            assert!((mu_env - mu_model).abs() < 1e-12, "action {index}");
            let mut rng_env = ChaCha8Rng::seed_from_u64(1000 + index as u64);
            let mut rng_model = ChaCha8Rng::seed_from_u64(1000 + index as u64);
            for _ in 0..50 {
                let (x_env, y_env) = env.sample_by_index(index, &mut rng_env).unwrap();
                let full = model.sample(&action, &mut rng_model).unwrap();
                let x_model: Vec<u8> = full[..3].iter().map(|&v| v as u8).collect();
                assert_eq!(x_env, x_model);
                assert_eq!(y_env as usize, full[3]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn run_invariants_hold(
            q in proptest::collection::vec(0.0f64..=1.0, 2..=6),
            half in 1usize..60,
            seed in 0u64..500,
        ) {
            let env = ParallelEnv::new(q, RewardRule::Constant(0.5)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (chosen, state) = run_two_phase(&env, 2 * half, &mut rng).unwrap();
            prop_assert!(env.action_index(&chosen) == Some(state.chosen));
            for &p in &state.p_hat {
                prop_assert!((0.0..=1.0).contains(&p));
            }
            for &mu in &state.mu_hat {
                prop_assert!((0.0..=1.0).contains(&mu));
            }
            for i in 0..env.var_count() {
                prop_assert_eq!(state.counts[1 + 2 * i] + state.counts[2 + 2 * i], half);
            }
            prop_assert_eq!(state.phase2_budget.iter().sum::<usize>(), half);
            prop_assert!(state.low_prob_arms.contains(&0));
        }
    }
}
