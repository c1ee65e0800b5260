//! Best-arm identification on arbitrary causal models from one pooled
//! sample log.
//!
//! Actions are sampled from a fixed design η; every logged round is then
//! reweighted toward each action a by the likelihood ratio
//! R_a(x) = P_a(pa(x)) / Q(pa(x)), where Q is the η-mixture of the
//! interventional parent distributions. Ratios above an action's
//! truncation level are dropped, which caps the variance at the price of
//! a small downward bias. The quality of a design is measured by
//! m(η) = max_a Σ_pa P_a(pa)²/Q(pa), the worst-case second moment of the
//! ratios; this module also provides a projected-subgradient optimizer
//! for it and closed forms for the parallel graph at any width.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::causal_model::{sample_categorical, Action, CausalModel, ParentFactor};
use crate::error::{Error, Result};
use crate::parallel_bandit::{compute_m, ParallelEnv};
use crate::util::argmax_lowest;

/// η weights must sum to 1 within this tolerance.
pub const ETA_SUM_TOL: f64 = 1e-9;

/// Branch-enumeration width limit for [`parallel_m_eta`].
pub const MAX_ACTIVE_VARS: usize = 20;

// ── designs and truncation ──────────────────────────────────────────────

/// A sampling design: one probability per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaDistribution {
    weights: Vec<f64>,
}

impl EtaDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("design over zero actions".into()));
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Domain(format!("design weight {w} is negative")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > ETA_SUM_TOL {
            return Err(Error::Domain(format!("design weights sum to {sum}")));
        }
        Ok(EtaDistribution { weights })
    }

    pub fn uniform(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Domain("design over zero actions".into()));
        }
        EtaDistribution::new(vec![1.0 / count as f64; count])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(rng, &self.weights)
    }
}

/// Per-action ratio truncation levels. `f64::INFINITY` disables
/// truncation for an action.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationLevels {
    levels: Vec<f64>,
    m_eta: Option<f64>,
}

impl TruncationLevels {
    /// No truncation anywhere.
    pub fn infinite(count: usize) -> Self {
        TruncationLevels { levels: vec![f64::INFINITY; count], m_eta: None }
    }

    /// One shared finite level for every action.
    pub fn uniform(level: f64, count: usize) -> Result<Self> {
        if level.is_nan() || level < 0.0 {
            return Err(Error::Domain(format!("truncation level {level} is negative")));
        }
        Ok(TruncationLevels { levels: vec![level; count], m_eta: None })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// The m(η) the levels were derived from, when applicable.
    pub fn m_eta(&self) -> Option<f64> {
        self.m_eta
    }
}

/// The variance-optimal single truncation level for a budget: all actions
/// share B = sqrt(m(η)·T / ln(2·T·|A|)).
pub fn budget_truncation(
    m_eta_value: f64,
    t: usize,
    action_count: usize,
) -> Result<TruncationLevels> {
    if !(m_eta_value > 0.0 && m_eta_value.is_finite()) {
        return Err(Error::Domain(format!("m(eta) must be positive and finite, got {m_eta_value}")));
    }
    if t == 0 || action_count == 0 {
        return Err(Error::Domain("need a positive budget and at least one action".into()));
    }
    let log_arg = 2.0 * t as f64 * action_count as f64;
    if log_arg <= 1.0 {
        return Err(Error::Domain(format!("log argument {log_arg} must exceed 1")));
    }
    let b = (m_eta_value * t as f64 / log_arg.ln()).sqrt();
    Ok(TruncationLevels { levels: vec![b; action_count], m_eta: Some(m_eta_value) })
}

// ── ratios and the design objective ─────────────────────────────────────

fn check_family(factors: &[ParentFactor], eta: &EtaDistribution) -> Result<usize> {
    if factors.is_empty() {
        return Err(Error::Domain("no actions".into()));
    }
    if eta.len() != factors.len() {
        return Err(Error::Domain(format!(
            "design has {} weights for {} actions",
            eta.len(),
            factors.len()
        )));
    }
    let domain = factors[0].parent_vars();
    for f in factors {
        if f.parent_vars() != domain {
            return Err(Error::Domain("factors disagree on the parent domain".into()));
        }
    }
    Ok(factors[0].probs().len())
}

/// Mixture probability Q(row) = Σ_b η_b P_b(row) for every row.
fn mixture_rows(factors: &[ParentFactor], eta: &EtaDistribution) -> Vec<f64> {
    let rows = factors[0].probs().len();
    let mut q = vec![0.0; rows];
    for (f, &w) in factors.iter().zip(eta.weights()) {
        if w == 0.0 {
            continue;
        }
        for (qr, &p) in q.iter_mut().zip(f.probs()) {
            *qr += w * p;
        }
    }
    q
}

fn ratio_from_row(p_a: f64, q: f64) -> Result<f64> {
    if q > 0.0 {
        Ok(p_a / q)
    } else if p_a == 0.0 {
        // Both the target and the mixture miss this state; it carries no
        // information and no weight.
        Ok(0.0)
    } else {
        Err(Error::RatioInconsistency { p_a })
    }
}

/// Likelihood ratio R_a(x) = P_a(pa(x)) / Q(pa(x)) of one full assignment
/// for action `a`, which must be one of the factors' actions.
pub fn ratio(
    factors: &[ParentFactor],
    eta: &EtaDistribution,
    a: &Action,
    x: &[usize],
) -> Result<f64> {
    check_family(factors, eta)?;
    let idx = factors
        .iter()
        .position(|f| f.action() == a)
        .ok_or_else(|| Error::InvalidAction(format!("{a} is not in the factor family")))?;
    let row = factors[idx].row_of(x);
    let q: f64 = factors
        .iter()
        .zip(eta.weights())
        .map(|(f, &w)| w * f.probs()[row])
        .sum();
    ratio_from_row(factors[idx].probs()[row], q)
}

/// The design objective m(η) = max_a Σ_pa P_a(pa)² / Q(pa), summing only
/// over states the mixture can reach.
pub fn m_eta(factors: &[ParentFactor], eta: &EtaDistribution) -> Result<f64> {
    check_family(factors, eta)?;
    let q = mixture_rows(factors, eta);
    let mut worst = f64::NEG_INFINITY;
    for f in factors {
        let mut sum = 0.0;
        for (&p, &qr) in f.probs().iter().zip(&q) {
            if qr > 0.0 {
                sum += p * p / qr;
            }
        }
        worst = worst.max(sum);
    }
    Ok(worst)
}

// ── the fixed-design algorithm ──────────────────────────────────────────

/// One logged round: which action was played, the full assignment
/// observed, and the reward it carried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub action: usize,
    pub assignment: Vec<usize>,
    pub reward: u8,
}

/// Estimates and the complete sample log of one fixed-design run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedDesignState {
    /// Truncated importance-weighted mean estimates, one per action. Not
    /// clamped: an estimate may exceed 1, but never its truncation level.
    pub mu_hat: Vec<f64>,
    pub samples: Vec<SampleRecord>,
    /// The m(η) the truncation levels were derived from, if any.
    pub m_eta: Option<f64>,
    /// Index of the selected action.
    pub chosen: usize,
}

fn validate_run_inputs(
    action_count: usize,
    eta: &EtaDistribution,
    trunc: &TruncationLevels,
) -> Result<()> {
    if action_count == 0 {
        return Err(Error::Domain("no actions".into()));
    }
    if eta.len() != action_count || trunc.levels().len() != action_count {
        return Err(Error::Domain(format!(
            "{action_count} actions with {} design weights and {} truncation levels",
            eta.len(),
            trunc.levels().len()
        )));
    }
    Ok(())
}

/// Runs the fixed-design algorithm on an explicit model: T rounds of
/// actions drawn from η, then a single estimation pass over the log.
///
/// With T = 0 every estimate is 0 and the first action wins by the
/// lowest-index rule.
pub fn run_fixed_design<R: Rng + ?Sized>(
    model: &CausalModel,
    actions: &[Action],
    eta: &EtaDistribution,
    trunc: &TruncationLevels,
    t: usize,
    rng: &mut R,
) -> Result<(Action, FixedDesignState)> {
    validate_run_inputs(actions.len(), eta, trunc)?;
    let factors: Vec<ParentFactor> = actions
        .iter()
        .map(|a| model.interventional_parent_dist(a))
        .collect::<Result<_>>()?;
    check_family(&factors, eta)?;

    let mut samples = Vec::with_capacity(t);
    for _ in 0..t {
        let a = eta.sample_index(rng);
        let assignment = model.sample(&actions[a], rng)?;
        let reward = assignment[model.reward_var()] as u8;
        samples.push(SampleRecord { action: a, assignment, reward });
    }

    let mu_hat = estimate_from_log(&factors, eta, trunc, t, &samples)?;
    let chosen = argmax_lowest(&mu_hat);
    let state = FixedDesignState { mu_hat, samples, m_eta: trunc.m_eta(), chosen };
    Ok((actions[chosen].clone(), state))
}

/// The estimation pass: μ̂_a = (1/T) Σ_t Y_t R_a(X_t) 1{R_a(X_t) ≤ B_a}.
fn estimate_from_log(
    factors: &[ParentFactor],
    eta: &EtaDistribution,
    trunc: &TruncationLevels,
    t: usize,
    samples: &[SampleRecord],
) -> Result<Vec<f64>> {
    let q = mixture_rows(factors, eta);
    let mut sums = vec![0.0; factors.len()];
    for rec in samples {
        let row = factors[0].row_of(&rec.assignment);
        for (a, f) in factors.iter().enumerate() {
            let r = ratio_from_row(f.probs()[row], q[row])?;
            if r <= trunc.levels()[a] {
                sums[a] += f64::from(rec.reward) * r;
            }
        }
    }
    if t == 0 {
        return Ok(sums);
    }
    Ok(sums.into_iter().map(|s| s / t as f64).collect())
}

/// Fixed-design run specialized to the parallel graph.
///
/// Produces the same estimates as [`run_fixed_design`] on the expanded
/// model (and consumes randomness identically), but computes every ratio
/// in O(N) from prefix/suffix products of the cause probabilities, so it
/// runs at widths where the 2^N parent tables cannot exist. Logged
/// assignments list the causes and then the reward, matching the expanded
/// model's variable order.
pub fn run_fixed_design_parallel<R: Rng + ?Sized>(
    env: &ParallelEnv,
    eta: &EtaDistribution,
    trunc: &TruncationLevels,
    t: usize,
    rng: &mut R,
) -> Result<(Action, FixedDesignState)> {
    let count = env.action_count();
    validate_run_inputs(count, eta, trunc)?;
    let n = env.var_count();

    let mut samples = Vec::with_capacity(t);
    let mut x = vec![0u8; n];
    for _ in 0..t {
        let a = eta.sample_index(rng);
        let y = env.sample_into(a, &mut x, rng)?;
        let mut assignment: Vec<usize> = x.iter().map(|&b| b as usize).collect();
        assignment.push(y as usize);
        samples.push(SampleRecord { action: a, assignment, reward: y });
    }

    let mu_hat = estimate_parallel_log(env, eta, trunc, t, &samples)?;
    let chosen = argmax_lowest(&mu_hat);
    let state = FixedDesignState { mu_hat, samples, m_eta: trunc.m_eta(), chosen };
    Ok((env.action(chosen), state))
}

fn estimate_parallel_log(
    env: &ParallelEnv,
    eta: &EtaDistribution,
    trunc: &TruncationLevels,
    t: usize,
    samples: &[SampleRecord],
) -> Result<Vec<f64>> {
    let n = env.var_count();
    let q = env.q();
    let w = eta.weights();
    let b = trunc.levels();
    let mut sums = vec![0.0; env.action_count()];
    // pre[k] = Π_{l<k} f_l, suf[k] = Π_{l≥k} f_l, so the leave-one-out
    // product h_k = pre[k]·suf[k+1] needs no division and stays exact
    // when some f is 0.
    let mut f = vec![0.0; n];
    let mut pre = vec![1.0; n + 1];
    let mut suf = vec![1.0; n + 1];
    for rec in samples {
        // A zero reward contributes nothing to any sum.
        if rec.reward == 0 {
            continue;
        }
        let xs = &rec.assignment[..n];
        for k in 0..n {
            f[k] = if xs[k] == 1 { q[k] } else { 1.0 - q[k] };
            pre[k + 1] = pre[k] * f[k];
        }
        for k in (0..n).rev() {
            suf[k] = f[k] * suf[k + 1];
        }
        let h = pre[n];
        let mut qmix = w[0] * h;
        for k in 0..n {
            qmix += w[1 + 2 * k + xs[k]] * pre[k] * suf[k + 1];
        }
        if qmix <= 0.0 {
            // Unreachable for a log this design produced; a foreign log
            // can hit it only if the mixture misses a state it contains.
            if h > 0.0 || (0..n).any(|k| pre[k] * suf[k + 1] > 0.0) {
                return Err(Error::RatioInconsistency { p_a: h });
            }
            continue;
        }
        let r0 = h / qmix;
        if r0 <= b[0] {
            sums[0] += r0;
        }
        // Only the N realized arms have P_a(x) > 0; the opposite-value
        // arms contribute exactly 0.
        for k in 0..n {
            let arm = 1 + 2 * k + xs[k];
            let r = pre[k] * suf[k + 1] / qmix;
            if r <= b[arm] {
                sums[arm] += r;
            }
        }
    }
    if t == 0 {
        return Ok(sums);
    }
    Ok(sums.into_iter().map(|s| s / t as f64).collect())
}

// ── designs for the parallel graph ──────────────────────────────────────

/// The low-probability design for the parallel graph: every arm whose
/// event has probability strictly below 1/m(q) gets weight 1/(2m(q)),
/// and do() absorbs the remainder so the weights sum to 1.
///
/// At most m(q) arms can qualify (one value per cause, |I_m| ≤ m), so the
/// arm mass is at most 1/2 and do() keeps weight ≥ 1/2.
pub fn parallel_eta(q: &[f64]) -> Result<EtaDistribution> {
    let m = compute_m(q)? as f64;
    let n = q.len();
    let mut weights = vec![0.0; 2 * n + 1];
    let mut arm_mass = 0.0;
    for (i, &qi) in q.iter().enumerate() {
        for j in 0..2 {
            let event_prob = if j == 1 { qi } else { 1.0 - qi };
            if event_prob < 1.0 / m {
                weights[1 + 2 * i + j] = 1.0 / (2.0 * m);
                arm_mass += 1.0 / (2.0 * m);
            }
        }
    }
    debug_assert!(arm_mass <= 0.5 + 1e-12);
    weights[0] = 1.0 - arm_mass;
    EtaDistribution::new(weights)
}

/// Exact m(η) for the parallel graph at any width.
///
/// On the support of action a the ratio denominator collapses to
/// D(x) = η_a + η_0·f_i(j) + f_i(j)·Σ_{k≠i} η_{(k,x_k)}/f_k(x_k)
/// (and D(x) = η_0 + Σ_k η_{(k,x_k)}/f_k(x_k) for do()), a constant plus
/// independent per-coordinate terms. Coordinates whose two branch values
/// coincide, including deterministic causes, fold into the constant;
/// m(η)_a = E[1/D] is then an exact enumeration over the at most
/// [`MAX_ACTIVE_VARS`] coordinates that genuinely branch. States with
/// D = 0 are unreachable by the mixture and contribute 0, matching
/// [`m_eta`].
pub fn parallel_m_eta(q: &[f64], eta: &EtaDistribution) -> Result<f64> {
    let n = q.len();
    if eta.len() != 2 * n + 1 {
        return Err(Error::Domain(format!(
            "design has {} weights for {} actions",
            eta.len(),
            2 * n + 1
        )));
    }
    for &qi in q {
        if !(0.0..=1.0).contains(&qi) {
            return Err(Error::Domain(format!("q entry {qi} is not a probability")));
        }
    }
    let w = eta.weights();
    let mut worst = f64::NEG_INFINITY;
    // Per-coordinate contribution of x_k to D, scaled by `scale`
    // (f_i(j) for an intervention on i, 1 for do()); None marks the
    // excluded coordinate.
    for target in std::iter::once(None).chain((0..n).flat_map(|i| (0..2).map(move |j| Some((i, j)))))
    {
        let (mut base, scale) = match target {
            None => (w[0], 1.0),
            Some((i, j)) => {
                let fij = if j == 1 { q[i] } else { 1.0 - q[i] };
                (w[1 + 2 * i + j] + w[0] * fij, fij)
            }
        };
        let mut branches: Vec<(f64, f64, f64)> = Vec::new(); // (prob of 1, c0, c1)
        for k in 0..n {
            if let Some((i, _)) = target {
                if i == k {
                    continue;
                }
            }
            let contribution = |value: usize| -> f64 {
                let fk = if value == 1 { q[k] } else { 1.0 - q[k] };
                if fk == 0.0 {
                    // This value never occurs under P_a; its branch is
                    // dead and the other one is certain.
                    0.0
                } else {
                    scale * w[1 + 2 * k + value] / fk
                }
            };
            if q[k] == 0.0 {
                base += contribution(0);
            } else if q[k] == 1.0 {
                base += contribution(1);
            } else {
                let c0 = contribution(0);
                let c1 = contribution(1);
                if c0 == c1 {
                    base += c0;
                } else {
                    branches.push((q[k], c0, c1));
                }
            }
        }
        if branches.len() > MAX_ACTIVE_VARS {
            return Err(Error::CapacityExceeded {
                size: usize::MAX,
                cap: 1 << MAX_ACTIVE_VARS,
            });
        }
        let mut expectation = 0.0;
        for combo in 0..1usize << branches.len() {
            let mut prob = 1.0;
            let mut d = base;
            for (bit, &(p1, c0, c1)) in branches.iter().enumerate() {
                if (combo >> bit) & 1 == 1 {
                    prob *= p1;
                    d += c1;
                } else {
                    prob *= 1.0 - p1;
                    d += c0;
                }
            }
            if d > 0.0 {
                expectation += prob / d;
            }
        }
        worst = worst.max(expectation);
    }
    Ok(worst)
}

// ── design optimization ─────────────────────────────────────────────────

/// Result of [`optimize_eta`]: the best design seen, its objective, and
/// the per-iteration objective trace.
#[derive(Debug, Clone)]
pub struct EtaOptimization {
    pub eta: EtaDistribution,
    pub objective: f64,
    /// False when the iteration cap was hit before the objective
    /// plateaued.
    pub converged: bool,
    pub iterations: usize,
    /// (iteration, objective at that iterate).
    pub trace: Vec<(usize, f64)>,
}

/// Minimizes m(η) over the simplex by projected subgradient descent with
/// step 1/√k, following the subgradient of the currently worst action
/// (lowest index on ties). The best iterate is tracked and returned; the
/// search stops early once 50 iterations pass without improving it by
/// tol/10.
///
/// The objective only counts states the mixture reaches, so a design
/// that leaves part of an action's support uncovered scores as if that
/// mass were absent; concentrated designs can therefore win. Estimates
/// for such an action likewise omit the unreachable mass.
pub fn optimize_eta(
    factors: &[ParentFactor],
    tol: f64,
    max_iters: usize,
) -> Result<EtaOptimization> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    if max_iters == 0 {
        return Err(Error::Domain("need at least one iteration".into()));
    }
    let a_count = factors.len();
    let probe = EtaDistribution::uniform(a_count)?;
    let rows = check_family(factors, &probe)?;

    let mut eta = vec![1.0 / a_count as f64; a_count];
    let mut best = f64::INFINITY;
    let mut best_eta = eta.clone();
    let mut best_by_iter: Vec<f64> = Vec::with_capacity(max_iters.min(1 << 16));
    let mut trace = Vec::with_capacity(max_iters.min(1 << 16));
    let mut converged = false;
    let mut iterations = 0;
    let mut grad = vec![0.0; a_count];
    let mut q = vec![0.0; rows];

    for k in 1..=max_iters {
        iterations = k;
        q.iter_mut().for_each(|v| *v = 0.0);
        for (f, &w) in factors.iter().zip(&eta) {
            if w == 0.0 {
                continue;
            }
            for (qr, &p) in q.iter_mut().zip(f.probs()) {
                *qr += w * p;
            }
        }
        let mut objective = f64::NEG_INFINITY;
        let mut worst_action = 0;
        for (a, f) in factors.iter().enumerate() {
            let mut sum = 0.0;
            for (&p, &qr) in f.probs().iter().zip(&q) {
                if qr > 0.0 {
                    sum += p * p / qr;
                }
            }
            if sum > objective {
                objective = sum;
                worst_action = a;
            }
        }
        if objective < best {
            best = objective;
            best_eta.copy_from_slice(&eta);
        }
        trace.push((k, objective));
        best_by_iter.push(best);
        if k > 50 && best_by_iter[k - 51] - best < tol / 10.0 {
            converged = true;
            break;
        }

        grad.iter_mut().for_each(|v| *v = 0.0);
        let pa = factors[worst_action].probs();
        for (row, &qr) in q.iter().enumerate() {
            if qr <= 0.0 {
                continue;
            }
            let s = pa[row] * pa[row] / (qr * qr);
            for (g, f) in grad.iter_mut().zip(factors) {
                *g -= s * f.probs()[row];
            }
        }
        let step = 1.0 / (k as f64).sqrt();
        let moved: Vec<f64> = eta.iter().zip(&grad).map(|(&e, &g)| e - step * g).collect();
        eta = project_to_simplex(&moved);
    }

    Ok(EtaOptimization {
        eta: EtaDistribution::new(best_eta)?,
        objective: best,
        converged,
        iterations,
        trace,
    })
}

/// Euclidean projection onto the probability simplex.
fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal_model::parallel_model;
    use crate::parallel_bandit::RewardRule;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn canonical_actions(n: usize) -> Vec<Action> {
        let mut actions = vec![Action::empty()];
        for i in 0..n {
            actions.push(Action::single(i, 0));
            actions.push(Action::single(i, 1));
        }
        actions
    }

    fn factors_for(q: &[f64], reward_p1: &[f64]) -> Vec<ParentFactor> {
        let model = parallel_model(q, reward_p1).unwrap();
        canonical_actions(q.len())
            .iter()
            .map(|a| model.interventional_parent_dist(a).unwrap())
            .collect()
    }

    #[test]
    fn eta_distribution_validates_weights() {
        assert!(EtaDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(EtaDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(EtaDistribution::new(vec![]).is_err());
        let u = EtaDistribution::uniform(4).unwrap();
        assert!((u.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_matches_hand_value() {
        // q = (1/2, 1/2), all mass on do(): observing x = (1, 0) under
        // do(X1=1) gives P_a = 1/2 against Q = P_do() = 1/4, ratio 2.
        let factors = factors_for(&[0.5, 0.5], &[0.5; 4]);
        let eta = EtaDistribution::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let r = ratio(&factors, &eta, &Action::single(0, 1), &[1, 0, 0]).unwrap();
        assert_eq!(r, 2.0);
        let r = ratio(&factors, &eta, &Action::empty(), &[1, 0, 0]).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn ratio_at_unreachable_states() {
        let factors = factors_for(&[0.5, 0.5], &[0.5; 4]);
        // All sampling mass on do(X1=1): states with x1 = 0 never occur.
        let eta = EtaDistribution::new(vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        // The probed action also misses the state: harmless zero.
        let r = ratio(&factors, &eta, &Action::single(0, 1), &[0, 0, 0]).unwrap();
        assert_eq!(r, 0.0);
        // The probed action reaches it but the design cannot: inconsistent.
        let err = ratio(&factors, &eta, &Action::empty(), &[0, 0, 0]).unwrap_err();
        assert!(matches!(err, Error::RatioInconsistency { .. }), "got {err:?}");
    }

    #[test]
    fn m_eta_of_a_single_action_is_one() {
        let model = parallel_model(&[0.5, 0.5], &[0.5; 4]).unwrap();
        let factors = vec![model.interventional_parent_dist(&Action::empty()).unwrap()];
        let eta = EtaDistribution::new(vec![1.0]).unwrap();
        assert_eq!(m_eta(&factors, &eta).unwrap(), 1.0);
    }

    #[test]
    fn m_eta_matches_hand_enumeration() {
        // One cause with q = 1/3, uniform design over 3 actions:
        // Q(x=0) = 5/9, Q(x=1) = 4/9, and the worst action is do(X=1)
        // with m = 1/(4/9) = 2.25.
        let factors = factors_for(&[1.0 / 3.0], &[0.5, 0.5]);
        let eta = EtaDistribution::uniform(3).unwrap();
        assert!((m_eta(&factors, &eta).unwrap() - 2.25).abs() < 1e-12);
    }

    #[test]
    fn uniform_design_ratios_stay_below_action_count() {
        let factors = factors_for(&[0.3, 0.7], &[0.5; 4]);
        let eta = EtaDistribution::uniform(5).unwrap();
        let q = mixture_rows(&factors, &eta);
        for f in &factors {
            for (&p, &qr) in f.probs().iter().zip(&q) {
                if qr > 0.0 {
                    assert!(p / qr <= 5.0 + 1e-12);
                }
            }
        }
        assert!(m_eta(&factors, &eta).unwrap() <= 5.0 + 1e-12);
    }

    #[test]
    fn budget_truncation_matches_frozen_value() {
        let trunc = budget_truncation(2.0, 400, 101).unwrap();
        assert!((trunc.levels()[0] - 8.4142).abs() < 5e-4);
        assert!(trunc.levels().iter().all(|&b| (b - trunc.levels()[0]).abs() == 0.0));
        assert_eq!(trunc.m_eta(), Some(2.0));
        // When m·T equals the log term the level collapses to exactly 1.
        let m = (2.0f64 * 5.0 * 3.0).ln() / 5.0;
        let unit = budget_truncation(m, 5, 3).unwrap();
        assert!((unit.levels()[0] - 1.0).abs() < 1e-12);
        assert!(budget_truncation(0.0, 5, 3).is_err());
        assert!(budget_truncation(2.0, 0, 3).is_err());
    }

    #[test]
    fn zero_budget_returns_zero_estimates_and_first_action() {
        let model = parallel_model(&[0.4, 0.4], &[0.5; 4]).unwrap();
        let actions = canonical_actions(2);
        let eta = EtaDistribution::uniform(5).unwrap();
        let trunc = TruncationLevels::infinite(5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (chosen, state) = run_fixed_design(&model, &actions, &eta, &trunc, 0, &mut rng).unwrap();
        assert_eq!(chosen, Action::empty());
        assert!(state.mu_hat.iter().all(|&m| m == 0.0));
        assert!(state.samples.is_empty());
    }

    #[test]
    fn noiseless_model_identifies_best_action() {
        // Y copies X1 exactly, causes stay interior, no truncation: at a
        // healthy budget the argmax lands on do(X1=1) essentially always.
        let env = ParallelEnv::new(
            vec![0.3, 0.6],
            RewardRule::Table(vec![0.0, 0.0, 1.0, 1.0]),
        )
        .unwrap();
        let model = env.to_causal_model().unwrap();
        let actions = canonical_actions(2);
        let eta = EtaDistribution::uniform(5).unwrap();
        let trunc = TruncationLevels::infinite(5);
        let mut hits = 0;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (chosen, _) = run_fixed_design(&model, &actions, &eta, &trunc, 400, &mut rng).unwrap();
            if chosen == Action::single(0, 1) {
                hits += 1;
            }
        }
        assert!(hits >= 198, "best action found in only {hits}/200 runs");
    }

    #[test]
    fn estimates_replay_from_the_log_and_respect_levels() {
        let q = [0.25, 0.5];
        let factors = factors_for(&q, &[0.5; 4]);
        let env = ParallelEnv::new(q.to_vec(), RewardRule::Constant(0.75)).unwrap();
        let model = env.to_causal_model().unwrap();
        let actions = canonical_actions(2);
        let eta = EtaDistribution::uniform(5).unwrap();
        let trunc = TruncationLevels::uniform(2.5, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (_, state) = run_fixed_design(&model, &actions, &eta, &trunc, 200, &mut rng).unwrap();
        for (a, action) in actions.iter().enumerate() {
            let mut sum = 0.0;
            for rec in &state.samples {
                let r = ratio(&factors, &eta, action, &rec.assignment).unwrap();
                assert!(r >= 0.0);
                if r <= 2.5 {
                    let summand = f64::from(rec.reward) * r;
                    assert!(summand <= 2.5 + 1e-12);
                    sum += summand;
                }
            }
            let replayed = sum / 200.0;
            assert!((replayed - state.mu_hat[a]).abs() < 1e-12);
            assert!(state.mu_hat[a] <= 2.5 + 1e-12);
        }
    }

    #[test]
    fn parallel_and_general_paths_agree() {
        let q = vec![0.2, 0.5, 0.7];
        let table: Vec<f64> = (0..8).map(|r| f64::from(r % 3 == 0) * 0.5 + 0.25).collect();
        let env = ParallelEnv::new(q, RewardRule::Table(table)).unwrap();
        let model = env.to_causal_model().unwrap();
        let actions = canonical_actions(3);
        let eta = EtaDistribution::uniform(7).unwrap();
        let trunc = budget_truncation(3.0, 300, 7).unwrap();
        let mut rng_a = ChaCha8Rng::seed_from_u64(5);
        let mut rng_b = ChaCha8Rng::seed_from_u64(5);
        let (chosen_a, state_a) =
            run_fixed_design(&model, &actions, &eta, &trunc, 300, &mut rng_a).unwrap();
        let (chosen_b, state_b) =
            run_fixed_design_parallel(&env, &eta, &trunc, 300, &mut rng_b).unwrap();
        assert_eq!(chosen_a, chosen_b);
        assert_eq!(state_a.samples, state_b.samples);
        for (a, b) in state_a.mu_hat.iter().zip(&state_b.mu_hat) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn low_probability_design_matches_hand_values() {
        // Both causes fair: nothing is rare, do() takes all the mass.
        let eta = parallel_eta(&[0.5, 0.5]).unwrap();
        assert_eq!(eta.weights(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        // All causes never fire: each do(X_i=1) is rare, m(q) = 4.
        let eta = parallel_eta(&[0.0; 4]).unwrap();
        assert_eq!(eta.weights()[0], 0.5);
        for i in 0..4 {
            assert_eq!(eta.weights()[1 + 2 * i], 0.0);
            assert_eq!(eta.weights()[2 + 2 * i], 0.125);
        }
        // Its exact design objective: 2 for do(), 8 for the rare arms.
        let m = parallel_m_eta(&[0.0; 4], &eta).unwrap();
        assert!((m - 8.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn branch_enumeration_matches_dense_m_eta(
            raw_q in proptest::collection::vec(0.0f64..=1.0, 2..=5),
            seed in 0u64..10_000,
        ) {
            // Mix in exact 0/1 coordinates and zero design weights, the
            // places where the support bookkeeping could diverge.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q: Vec<f64> = raw_q
                .iter()
                .map(|&v| {
                    if v < 0.15 { 0.0 } else if v > 0.85 { 1.0 } else { v }
                })
                .collect();
            let count = 2 * q.len() + 1;
            let mut weights: Vec<f64> = (0..count)
                .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() })
                .collect();
            let total: f64 = weights.iter().sum();
            if total == 0.0 {
                weights[0] = 1.0;
            } else {
                weights.iter_mut().for_each(|w| *w /= total);
            }
            let eta = EtaDistribution::new(weights).unwrap();
            let factors = factors_for(&q, &vec![0.5; 1 << q.len()]);
            let dense = m_eta(&factors, &eta).unwrap();
            let fast = parallel_m_eta(&q, &eta).unwrap();
            prop_assert!((dense - fast).abs() < 1e-10, "dense {dense} vs fast {fast}");
        }
    }

    #[test]
    fn projection_lands_on_the_simplex() {
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(project_to_simplex(&[0.6, 0.6]), vec![0.5, 0.5]);
        assert_eq!(project_to_simplex(&[-1.0, 1.0]), vec![0.0, 1.0]);
        let p = project_to_simplex(&[0.2, -0.4, 1.7, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn optimizer_improves_on_uniform_and_stays_bounded() {
        let factors = factors_for(&[0.1, 0.5, 0.5], &[0.5; 8]);
        let uniform = EtaDistribution::uniform(7).unwrap();
        let m_uniform = m_eta(&factors, &uniform).unwrap();
        let result = optimize_eta(&factors, 1e-4, 5000).unwrap();
        assert!(result.objective <= m_uniform + 1e-4);
        assert!(result.objective <= 7.0 + 1e-6);
        assert_eq!(result.trace.len(), result.iterations);
        let recheck = m_eta(&factors, &result.eta).unwrap();
        assert!((recheck - result.objective).abs() < 1e-9);
    }

    #[test]
    fn duplicated_actions_make_the_objective_one() {
        // Q equals the common factor no matter how mass is split, so
        // m(η) = 1 identically and the optimizer reports it.
        let model = parallel_model(&[0.3], &[0.5, 0.5]).unwrap();
        let f = model.interventional_parent_dist(&Action::single(0, 1)).unwrap();
        let factors = vec![f.clone(), f];
        let result = optimize_eta(&factors, 1e-4, 200).unwrap();
        assert!((result.objective - 1.0).abs() < 1e-4);
    }
}
