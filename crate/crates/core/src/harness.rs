//! Experiment harness: named benchmark sweeps over the parallel-graph
//! family, replicated regret measurement, and CSV summaries.
//!
//! A sweep is a grid over (m, T) cells. Each cell builds one environment,
//! fixes any sampling design once, then replays every algorithm `reps`
//! times from per-replication seeds. With the `parallel` feature the
//! replications of a cell fan out across threads; results are collected
//! in replication order either way, so the two paths emit byte-identical
//! summaries.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::successive_reject;
use crate::causal_model::Action;
use crate::error::{Error, Result};
use crate::general_bandit::{
    budget_truncation, optimize_eta, parallel_eta, parallel_m_eta, run_fixed_design_parallel,
    EtaDistribution, TruncationLevels,
};
use crate::parallel_bandit::{run_two_phase, simple_regret, ParallelEnv, RewardRule};
use crate::util::mean_and_stderr;

/// Largest cause count for which the optimizing design source is allowed;
/// beyond this the dense parent-state tables it needs stop fitting.
pub const MAX_OPTIMIZED_CAUSES: usize = 12;

// ── identifiers ─────────────────────────────────────────────────────────

/// The named benchmark sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    /// Fixed horizon, sweeping the effective arm count m.
    MSweep,
    /// Horizon sweep with the reward gap shrunk adversarially per budget.
    WorstCaseSweep,
    /// Horizon sweep at a fixed reward gap.
    HorizonSweep,
    /// Caller-specified grid; starts from small defaults.
    Custom,
}

impl ExperimentId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::MSweep => "m-sweep",
            ExperimentId::WorstCaseSweep => "worst-case-sweep",
            ExperimentId::HorizonSweep => "horizon-sweep",
            ExperimentId::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m-sweep" => Ok(ExperimentId::MSweep),
            "worst-case-sweep" => Ok(ExperimentId::WorstCaseSweep),
            "horizon-sweep" => Ok(ExperimentId::HorizonSweep),
            "custom" => Ok(ExperimentId::Custom),
            other => Err(Error::Config(format!(
                "unknown experiment {other:?}; expected m-sweep, worst-case-sweep, \
                 horizon-sweep, or custom"
            ))),
        }
    }
}

/// The algorithms the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Observe-then-act: first half on do(), second half split over the
    /// low-occurrence arms.
    TwoPhase,
    /// Importance-weighted estimation from one designed sample, with
    /// truncated weights.
    FixedDesign,
    /// The same estimator with truncation disabled.
    FixedDesignUntruncated,
    /// The best-arm baseline that ignores causal structure.
    SuccessiveReject,
}

pub const ALL_ALGORITHMS: [Algorithm; 4] = [
    Algorithm::TwoPhase,
    Algorithm::FixedDesign,
    Algorithm::FixedDesignUntruncated,
    Algorithm::SuccessiveReject,
];

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::TwoPhase => "two-phase",
            Algorithm::FixedDesign => "fixed-design",
            Algorithm::FixedDesignUntruncated => "fixed-design-untruncated",
            Algorithm::SuccessiveReject => "successive-reject",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-phase" => Ok(Algorithm::TwoPhase),
            "fixed-design" => Ok(Algorithm::FixedDesign),
            "fixed-design-untruncated" => Ok(Algorithm::FixedDesignUntruncated),
            "successive-reject" => Ok(Algorithm::SuccessiveReject),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?}; expected two-phase, fixed-design, \
                 fixed-design-untruncated, or successive-reject"
            ))),
        }
    }
}

/// How the reward gap ε is chosen per cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonRule {
    Fixed(f64),
    /// ε = min(√(N/8T), 1/4), the gap a budget-T learner finds hardest.
    WorstCase,
}

/// Where the fixed-design sampling distribution comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaSource {
    /// Subgradient minimization of the design objective.
    Optimized,
    /// Closed-form weights on the low-occurrence arms.
    LowProbability,
    Uniform,
    Explicit(Vec<f64>),
}

/// Where the truncation level comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BSource {
    /// B = √(m(η)·T / ln(2T|A|)), growing with the budget.
    BudgetScaled,
    Infinity,
    Fixed(f64),
}

// ── configuration ───────────────────────────────────────────────────────

/// A fully resolved sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    /// Number of causes N; the action count is 2N+1.
    pub n: usize,
    pub m_values: Vec<usize>,
    pub t_values: Vec<usize>,
    pub epsilon: EpsilonRule,
    pub reps: u32,
    pub base_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub eta_source: EtaSource,
    pub b_source: BSource,
}

/// Partial configuration as read from a JSON file; every field optional,
/// merged over the experiment's preset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentId>,
    pub n: Option<usize>,
    pub m_values: Option<Vec<usize>>,
    pub t_values: Option<Vec<usize>>,
    pub epsilon: Option<EpsilonRule>,
    pub reps: Option<u32>,
    pub base_seed: Option<u64>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub eta_source: Option<EtaSource>,
    pub b_source: Option<BSource>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))
    }

    /// Fills every missing field from the preset for `experiment`
    /// (the file's own experiment field wins over the argument).
    pub fn resolve(self, experiment: ExperimentId) -> ExperimentConfig {
        let id = self.experiment.unwrap_or(experiment);
        let base = preset(id);
        ExperimentConfig {
            experiment: id,
            n: self.n.unwrap_or(base.n),
            m_values: self.m_values.unwrap_or(base.m_values),
            t_values: self.t_values.unwrap_or(base.t_values),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            reps: self.reps.unwrap_or(base.reps),
            base_seed: self.base_seed.unwrap_or(base.base_seed),
            algorithms: self.algorithms.unwrap_or(base.algorithms),
            eta_source: self.eta_source.unwrap_or(base.eta_source),
            b_source: self.b_source.unwrap_or(base.b_source),
        }
    }
}

/// The stock configuration for each named sweep.
pub fn preset(experiment: ExperimentId) -> ExperimentConfig {
    let horizon_grid = vec![50, 100, 200, 400, 800, 1600];
    match experiment {
        ExperimentId::MSweep => ExperimentConfig {
            experiment,
            n: 50,
            m_values: (2..=50).collect(),
            t_values: vec![400],
            epsilon: EpsilonRule::Fixed(0.3),
            reps: 1000,
            base_seed: 1,
            algorithms: ALL_ALGORITHMS.to_vec(),
            eta_source: EtaSource::LowProbability,
            b_source: BSource::BudgetScaled,
        },
        ExperimentId::WorstCaseSweep => ExperimentConfig {
            experiment,
            n: 50,
            m_values: vec![2],
            t_values: horizon_grid,
            epsilon: EpsilonRule::WorstCase,
            reps: 1000,
            base_seed: 1,
            algorithms: ALL_ALGORITHMS.to_vec(),
            eta_source: EtaSource::LowProbability,
            b_source: BSource::BudgetScaled,
        },
        ExperimentId::HorizonSweep => ExperimentConfig {
            experiment,
            n: 50,
            m_values: vec![2],
            t_values: horizon_grid,
            epsilon: EpsilonRule::Fixed(0.3),
            reps: 1000,
            base_seed: 1,
            algorithms: ALL_ALGORITHMS.to_vec(),
            eta_source: EtaSource::LowProbability,
            b_source: BSource::BudgetScaled,
        },
        ExperimentId::Custom => ExperimentConfig {
            experiment,
            n: 50,
            m_values: vec![2],
            t_values: vec![400],
            epsilon: EpsilonRule::Fixed(0.3),
            reps: 1000,
            base_seed: 1,
            algorithms: ALL_ALGORITHMS.to_vec(),
            eta_source: EtaSource::LowProbability,
            b_source: BSource::BudgetScaled,
        },
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("need at least 2 causes, got {}", self.n)));
        }
        if self.m_values.is_empty() || self.t_values.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Config("empty sweep grid".into()));
        }
        for &m in &self.m_values {
            if m < 1 || m > self.n {
                return Err(Error::Config(format!(
                    "m = {m} outside 1..={} for N = {}",
                    self.n, self.n
                )));
            }
        }
        for &t in &self.t_values {
            // Budgets are shared across algorithms and the observe/act
            // split needs them even.
            if t < 2 || !t.is_multiple_of(2) {
                return Err(Error::Config(format!("budget {t} must be even and at least 2")));
            }
        }
        if let EpsilonRule::Fixed(e) = self.epsilon {
            if !(e > 0.0 && e < 0.5) {
                return Err(Error::Config(format!("gap {e} must lie in (0, 1/2)")));
            }
        }
        if self.reps < 1 {
            return Err(Error::Config("need at least 1 replication".into()));
        }
        match &self.eta_source {
            EtaSource::Explicit(w) => {
                if w.len() != 2 * self.n + 1 {
                    return Err(Error::Config(format!(
                        "explicit design has {} weights for {} actions",
                        w.len(),
                        2 * self.n + 1
                    )));
                }
                EtaDistribution::new(w.clone())?;
            }
            EtaSource::Optimized if self.n > MAX_OPTIMIZED_CAUSES => {
                return Err(Error::Config(format!(
                    "optimized designs need at most {MAX_OPTIMIZED_CAUSES} causes, got {}; \
                     use low-probability instead",
                    self.n
                )));
            }
            _ => {}
        }
        if let BSource::Fixed(b) = self.b_source {
            if b.is_nan() || b <= 0.0 {
                return Err(Error::Config(format!("truncation level {b} must be positive")));
            }
        }
        Ok(())
    }
}

// ── environment construction ────────────────────────────────────────────

/// The benchmark occurrence profile: the first `m` causes never fire,
/// the rest are fair coins.
pub fn benchmark_q(n: usize, m: usize) -> Vec<f64> {
    (0..n).map(|i| if i < m { 0.0 } else { 0.5 }).collect()
}

/// Builds the benchmark environment: Y pays 1/2 + ε when the first cause
/// fires and 1/2 − ε′ otherwise, with ε′ = q₁ε/(1−q₁) chosen so that
/// observation is worth exactly 1/2. Forcing the first cause on is then
/// the unique best action.
pub fn experiment_env(q: &[f64], epsilon: f64) -> Result<ParallelEnv> {
    let q1 = *q.first().ok_or_else(|| Error::Domain("no causes".into()))?;
    if q1 >= 1.0 {
        return Err(Error::Domain(
            "the first cause always fires, so no soft arm exists".into(),
        ));
    }
    let off_gap = q1 * epsilon / (1.0 - q1);
    let on = 0.5 + epsilon;
    let off = 0.5 - off_gap;
    if epsilon.is_nan() || epsilon <= 0.0 || on > 1.0 || off < 0.0 {
        return Err(Error::Domain(format!(
            "gap {epsilon} with q1 = {q1} pushes a reward rate outside [0, 1]"
        )));
    }
    ParallelEnv::new(q.to_vec(), RewardRule::Split { var: 0, on, off })
}

/// Resolves the per-cell reward gap.
pub fn epsilon_for(rule: EpsilonRule, n: usize, t: usize) -> f64 {
    match rule {
        EpsilonRule::Fixed(e) => e,
        EpsilonRule::WorstCase => (n as f64 / (8.0 * t as f64)).sqrt().min(0.25),
    }
}

// ── results ─────────────────────────────────────────────────────────────

/// One (experiment, algorithm, m, T) cell of the summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: ExperimentId,
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub epsilon: f64,
    pub reps: u32,
    pub mean_regret: f64,
    pub stderr: f64,
}

/// A cell the sweep could not run, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCell {
    pub algorithm: Algorithm,
    pub m: usize,
    pub t: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct RegretSummary {
    pub rows: Vec<SummaryRow>,
    pub skipped: Vec<SkippedCell>,
}

// ── execution ───────────────────────────────────────────────────────────

enum CellPlan {
    TwoPhase,
    FixedDesign { eta: EtaDistribution, trunc: TruncationLevels },
    Sr,
}

fn canonical_actions(n: usize) -> Vec<Action> {
    let mut actions = Vec::with_capacity(2 * n + 1);
    actions.push(Action::empty());
    for i in 0..n {
        actions.push(Action::single(i, 0));
        actions.push(Action::single(i, 1));
    }
    actions
}

fn design_for(config: &ExperimentConfig, env: &ParallelEnv) -> Result<EtaDistribution> {
    match &config.eta_source {
        EtaSource::LowProbability => parallel_eta(env.q()),
        EtaSource::Uniform => EtaDistribution::uniform(env.action_count()),
        EtaSource::Explicit(w) => EtaDistribution::new(w.clone()),
        EtaSource::Optimized => {
            let model = env.to_causal_model()?;
            let actions = canonical_actions(env.var_count());
            let factors: Result<Vec<_>> = actions
                .iter()
                .map(|a| model.interventional_parent_dist(a))
                .collect();
            Ok(optimize_eta(&factors?, 1e-4, 5000)?.eta)
        }
    }
}

fn truncation_for(
    config: &ExperimentConfig,
    env: &ParallelEnv,
    eta: &EtaDistribution,
    t: usize,
) -> Result<TruncationLevels> {
    match config.b_source {
        BSource::Infinity => Ok(TruncationLevels::infinite(env.action_count())),
        BSource::Fixed(b) => TruncationLevels::uniform(b, env.action_count()),
        BSource::BudgetScaled => {
            let m_eta = parallel_m_eta(env.q(), eta)?;
            budget_truncation(m_eta, t, env.action_count())
        }
    }
}

fn run_one(env: &ParallelEnv, plan: &CellPlan, t: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = match plan {
        CellPlan::TwoPhase => run_two_phase(env, t, &mut rng)?.0,
        CellPlan::FixedDesign { eta, trunc } => {
            run_fixed_design_parallel(env, eta, trunc, t, &mut rng)?.0
        }
        CellPlan::Sr => {
            let mut assignment = vec![0u8; env.var_count()];
            let result = successive_reject(
                env.action_count(),
                t,
                |arm, rng: &mut ChaCha8Rng| Ok(env.sample_into(arm, &mut assignment, rng)? as f64),
                &mut rng,
            )?;
            env.action(result.chosen)
        }
    };
    simple_regret(env, &chosen)
}

fn replicate_sequential(
    env: &ParallelEnv,
    plan: &CellPlan,
    t: usize,
    reps: u32,
    base_seed: u64,
) -> Result<Vec<f64>> {
    (0..reps)
        .map(|rep| run_one(env, plan, t, base_seed ^ u64::from(rep)))
        .collect()
}

#[cfg(feature = "parallel")]
fn replicate_parallel(
    env: &ParallelEnv,
    plan: &CellPlan,
    t: usize,
    reps: u32,
    base_seed: u64,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    // collect() preserves replication order, so the summary is identical
    // to the sequential path's.
    (0..reps)
        .into_par_iter()
        .map(|rep| run_one(env, plan, t, base_seed ^ u64::from(rep)))
        .collect()
}

fn run_impl(config: &ExperimentConfig, parallel: bool) -> Result<RegretSummary> {
    config.validate()?;
    let mut summary = RegretSummary::default();
    for &m in &config.m_values {
        let q = benchmark_q(config.n, m);
        for &t in &config.t_values {
            let epsilon = epsilon_for(config.epsilon, config.n, t);
            let env = experiment_env(&q, epsilon)?;
            for &algorithm in &config.algorithms {
                let plan = match algorithm {
                    Algorithm::TwoPhase => CellPlan::TwoPhase,
                    Algorithm::SuccessiveReject => {
                        if t < env.action_count() {
                            summary.skipped.push(SkippedCell {
                                algorithm,
                                m,
                                t,
                                reason: format!(
                                    "budget {t} is below the arm count {}",
                                    env.action_count()
                                ),
                            });
                            continue;
                        }
                        CellPlan::Sr
                    }
                    Algorithm::FixedDesign => {
                        let eta = design_for(config, &env)?;
                        let trunc = truncation_for(config, &env, &eta, t)?;
                        CellPlan::FixedDesign { eta, trunc }
                    }
                    Algorithm::FixedDesignUntruncated => {
                        let eta = design_for(config, &env)?;
                        CellPlan::FixedDesign {
                            eta,
                            trunc: TruncationLevels::infinite(env.action_count()),
                        }
                    }
                };
                let regrets = if parallel {
                    #[cfg(feature = "parallel")]
                    {
                        replicate_parallel(&env, &plan, t, config.reps, config.base_seed)?
                    }
                    #[cfg(not(feature = "parallel"))]
                    {
                        replicate_sequential(&env, &plan, t, config.reps, config.base_seed)?
                    }
                } else {
                    replicate_sequential(&env, &plan, t, config.reps, config.base_seed)?
                };
                let (mean_regret, stderr) = mean_and_stderr(&regrets);
                summary.rows.push(SummaryRow {
                    experiment: config.experiment,
                    algorithm,
                    n: config.n,
                    m,
                    t,
                    epsilon,
                    reps: config.reps,
                    mean_regret,
                    stderr,
                });
            }
        }
    }
    Ok(summary)
}

/// Runs the sweep, fanning replications across threads when the
/// `parallel` feature is enabled.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RegretSummary> {
    run_impl(config, true)
}

/// Runs the sweep on one thread regardless of features. Produces the
/// same summary as [`run_experiment`], byte for byte.
pub fn run_experiment_sequential(config: &ExperimentConfig) -> Result<RegretSummary> {
    run_impl(config, false)
}

// ── CSV ─────────────────────────────────────────────────────────────────

pub const CSV_HEADER: &str = "experiment,algorithm,N,m,T,epsilon,reps,mean_regret,stderr";

pub fn csv_string(summary: &RegretSummary) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &summary.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.experiment,
            row.algorithm,
            row.n,
            row.m,
            row.t,
            row.epsilon,
            row.reps,
            row.mean_regret,
            row.stderr
        ));
    }
    out
}

pub fn write_csv(summary: &RegretSummary, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, csv_string(summary))?)
}

/// Parses a summary CSV produced by [`csv_string`]. Round-trips exactly:
/// re-serializing the parsed rows reproduces the input.
pub fn parse_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "bad summary header {:?}",
                other.unwrap_or_default()
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Config(format!(
                "row {} has {} fields, expected 9",
                i + 2,
                fields.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad {what} {s:?} on row {}", i + 2)))
        };
        let int = |s: &str, what: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad {what} {s:?} on row {}", i + 2)))
        };
        rows.push(SummaryRow {
            experiment: fields[0].parse()?,
            algorithm: fields[1].parse()?,
            n: int(fields[2], "N")?,
            m: int(fields[3], "m")?,
            t: int(fields[4], "T")?,
            epsilon: num(fields[5], "epsilon")?,
            reps: int(fields[6], "reps")? as u32,
            mean_regret: num(fields[7], "mean_regret")?,
            stderr: num(fields[8], "stderr")?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for id in [
            ExperimentId::MSweep,
            ExperimentId::WorstCaseSweep,
            ExperimentId::HorizonSweep,
            ExperimentId::Custom,
        ] {
            preset(id).validate().unwrap();
        }
    }

    #[test]
    fn identifier_strings_round_trip() {
        for id in [
            ExperimentId::MSweep,
            ExperimentId::WorstCaseSweep,
            ExperimentId::HorizonSweep,
            ExperimentId::Custom,
        ] {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        for alg in ALL_ALGORITHMS {
            assert_eq!(alg.as_str().parse::<Algorithm>().unwrap(), alg);
        }
        assert!("alg-17".parse::<Algorithm>().is_err());
    }

    #[test]
    fn worst_case_gap_caps_then_shrinks() {
        assert_eq!(epsilon_for(EpsilonRule::WorstCase, 50, 50), 0.25);
        let e200 = epsilon_for(EpsilonRule::WorstCase, 50, 200);
        assert!((e200 - (50.0f64 / 1600.0).sqrt()).abs() < 1e-15);
        assert_eq!(epsilon_for(EpsilonRule::Fixed(0.3), 50, 200), 0.3);
    }

    #[test]
    fn benchmark_profile_zeroes_then_halves() {
        assert_eq!(benchmark_q(5, 2), vec![0.0, 0.0, 0.5, 0.5, 0.5]);
        assert_eq!(benchmark_q(3, 3), vec![0.0; 3]);
    }

    #[test]
    fn benchmark_env_means_match_hand_values() {
        let env = experiment_env(&[0.5, 0.5], 0.1).unwrap();
        let means = env.true_means();
        assert!((means[0] - 0.5).abs() < 1e-15); // do()
        assert!((means[1] - 0.4).abs() < 1e-15); // do(X1=0), the soft arm
        assert!((means[2] - 0.6).abs() < 1e-15); // do(X1=1), optimal
        assert!((means[3] - 0.5).abs() < 1e-15);
        assert!((means[4] - 0.5).abs() < 1e-15);
        assert!(experiment_env(&[1.0, 0.5], 0.1).is_err());
        assert!(experiment_env(&[0.5, 0.5], 0.6).is_err());
    }

    #[test]
    fn config_file_overrides_only_named_fields() {
        let file = ConfigFile::from_json(r#"{"reps": 7, "t_values": [10]}"#).unwrap();
        let config = file.resolve(ExperimentId::HorizonSweep);
        assert_eq!(config.reps, 7);
        assert_eq!(config.t_values, vec![10]);
        assert_eq!(config.n, 50);
        assert_eq!(config.epsilon, EpsilonRule::Fixed(0.3));
        assert!(ConfigFile::from_json(r#"{"repz": 7}"#).is_err());
        // Tagged variants spell out as kebab-case.
        let file =
            ConfigFile::from_json(r#"{"epsilon": "worst-case", "b_source": {"fixed": 3.5}}"#)
                .unwrap();
        assert_eq!(file.epsilon, Some(EpsilonRule::WorstCase));
        assert_eq!(file.b_source, Some(BSource::Fixed(3.5)));
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let mut config = preset(ExperimentId::Custom);
        config.t_values = vec![401];
        assert!(config.validate().is_err());
        let mut config = preset(ExperimentId::Custom);
        config.m_values = vec![0];
        assert!(config.validate().is_err());
        let mut config = preset(ExperimentId::Custom);
        config.m_values = vec![51];
        assert!(config.validate().is_err());
        let mut config = preset(ExperimentId::Custom);
        config.epsilon = EpsilonRule::Fixed(0.5);
        assert!(config.validate().is_err());
        let mut config = preset(ExperimentId::Custom);
        config.reps = 0;
        assert!(config.validate().is_err());
        let mut config = preset(ExperimentId::Custom);
        config.eta_source = EtaSource::Explicit(vec![0.5, 0.5]);
        assert!(config.validate().is_err());
        let mut config = preset(ExperimentId::Custom);
        config.eta_source = EtaSource::Optimized;
        assert!(config.validate().is_err(), "50 causes is past the dense-table cap");
        config.n = 4;
        config.m_values = vec![2];
        config.validate().unwrap();
    }

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentId::Custom,
            n: 2,
            m_values: vec![1],
            t_values: vec![8],
            epsilon: EpsilonRule::Fixed(0.3),
            reps: 8,
            base_seed: 99,
            algorithms: ALL_ALGORITHMS.to_vec(),
            eta_source: EtaSource::LowProbability,
            b_source: BSource::BudgetScaled,
        }
    }

    #[test]
    fn reruns_are_deterministic() {
        let config = tiny_config();
        let a = csv_string(&run_experiment_sequential(&config).unwrap());
        let b = csv_string(&run_experiment_sequential(&config).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 1 + 4, "header plus one row per algorithm");
    }

    #[test]
    fn short_budgets_skip_the_arm_baseline() {
        let mut config = tiny_config();
        config.n = 4; // 9 arms
        config.t_values = vec![8];
        let summary = run_experiment_sequential(&config).unwrap();
        assert_eq!(summary.skipped.len(), 1);
        assert_eq!(summary.skipped[0].algorithm, Algorithm::SuccessiveReject);
        assert_eq!(summary.rows.len(), 3);
    }

    #[test]
    fn csv_round_trips() {
        let config = tiny_config();
        let summary = run_experiment_sequential(&config).unwrap();
        let text = csv_string(&summary);
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows, summary.rows);
        let again = csv_string(&RegretSummary { rows, skipped: vec![] });
        assert_eq!(again, text);
        assert_eq!(csv_string(&RegretSummary::default()), format!("{CSV_HEADER}\n"));
        assert!(parse_csv("nope\n").is_err());
    }
}
