//! Discrete causal models: a DAG of finite-valued variables with
//! conditional probability tables and one designated binary reward
//! variable.
//!
//! Interventions operate on the mutilated graph: an intervened variable is
//! pinned to its assigned value and every other variable keeps its CPT.
//! Sampling and exact inference share one indexing convention, documented
//! on [`CausalModel`], so tables produced here line up row-for-row with
//! reward CPTs and with each other.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default cap on exact-enumeration state spaces.
pub const DEFAULT_ENUM_CAP: usize = 1 << 20;

/// CPT rows and probability tables must sum to 1 within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Draws an index from a finite distribution by inverse-CDF walk.
///
/// Every stochastic code path in this crate funnels through this function,
/// so equal seeds produce equal draw sequences across entry points. The
/// final index absorbs any rounding slack in the partial sums.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (value, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return value;
        }
    }
    probs.len() - 1
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidModel(format!("{what} = {p} is not a probability")));
    }
    Ok(())
}

/// Product of dimensions, failing once it exceeds `cap`.
fn state_space_size(dims: impl IntoIterator<Item = usize>, cap: usize) -> Result<usize> {
    let mut size: usize = 1;
    for d in dims {
        size = size
            .checked_mul(d)
            .filter(|&s| s <= cap)
            .ok_or(Error::CapacityExceeded { size: usize::MAX, cap })?;
    }
    Ok(size)
}

// ── variables and actions ──────────────────────────────────────────────

/// A named finite-valued variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub arity: usize,
}

impl Variable {
    pub fn binary(name: impl Into<String>) -> Self {
        Variable { name: name.into(), arity: 2 }
    }
}

/// An intervention: a set of (variable, value) assignments. The empty
/// action is purely observational.
///
/// Assignments are kept sorted by variable index and may not repeat a
/// variable. Values are range-checked against a concrete model by
/// [`CausalModel::validate_action`], not here.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    assignments: Vec<(usize, usize)>,
}

impl Action {
    /// The observational action `do()`.
    pub fn empty() -> Self {
        Action { assignments: Vec::new() }
    }

    /// Single-variable intervention `do(X_var = value)`.
    pub fn single(var: usize, value: usize) -> Self {
        Action { assignments: vec![(var, value)] }
    }

    pub fn new(mut assignments: Vec<(usize, usize)>) -> Result<Self> {
        assignments.sort_unstable();
        for w in assignments.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidAction(format!(
                    "variable {} assigned more than once",
                    w[0].0
                )));
            }
        }
        Ok(Action { assignments })
    }

    pub fn assignments(&self) -> &[(usize, usize)] {
        &self.assignments
    }

    pub fn is_observational(&self) -> bool {
        self.assignments.is_empty()
    }

    /// The value this action forces on `var`, if any.
    pub fn value_for(&self, var: usize) -> Option<usize> {
        self.assignments
            .binary_search_by_key(&var, |&(v, _)| v)
            .ok()
            .map(|i| self.assignments[i].1)
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.assignments.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<(usize, usize)>::deserialize(d)?;
        Action::new(pairs).map_err(serde::de::Error::custom)
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "do(")?;
        for (i, (var, value)) in self.assignments.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "X{var}={value}")?;
        }
        write!(f, ")")
    }
}

// ── interventional parent distributions ────────────────────────────────

/// The exact joint distribution of the reward variable's parents under one
/// action: P_a(pa(Y)).
///
/// Rows follow the model's shared convention: parents in ascending
/// variable order, earlier parents most significant. Rows inconsistent
/// with the intervention have probability exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentFactor {
    action: Action,
    parent_vars: Vec<usize>,
    arities: Vec<usize>,
    probs: Vec<f64>,
}

impl ParentFactor {
    pub(crate) fn new(
        action: Action,
        parent_vars: Vec<usize>,
        arities: Vec<usize>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let rows = state_space_size(arities.iter().copied(), usize::MAX)?;
        if probs.len() != rows {
            return Err(Error::InvalidModel(format!(
                "parent table has {} rows, expected {rows}",
                probs.len()
            )));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::InvalidModel(format!("negative parent probability {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidModel(format!("parent table sums to {sum}")));
        }
        Ok(ParentFactor { action, parent_vars, arities, probs })
    }

    pub fn action(&self) -> &Action {
        &self.action
    }

    pub fn parent_vars(&self) -> &[usize] {
        &self.parent_vars
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    /// Row probabilities in table order.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Row index of a full model assignment.
    pub fn row_of(&self, assignment: &[usize]) -> usize {
        self.parent_vars
            .iter()
            .zip(&self.arities)
            .fold(0, |row, (&v, &arity)| row * arity + assignment[v])
    }

    /// Probability of the parent configuration embedded in a full
    /// assignment.
    pub fn prob_of(&self, assignment: &[usize]) -> f64 {
        self.probs[self.row_of(assignment)]
    }
}

// ── the model ───────────────────────────────────────────────────────────

/// A causal DAG over finite variables with dense CPTs and a binary reward.
///
/// Indexing convention, used everywhere tables appear: a variable's CPT
/// has one row per joint assignment of its parents, parents taken in
/// ascending variable order with earlier parents most significant (the
/// last parent varies fastest). Row `r` of the CPT lists the distribution
/// over the variable's own values. [`ParentFactor`] tables use the same
/// convention, so a factor over pa(Y) aligns row-for-row with the reward
/// CPT.
#[derive(Debug, Clone)]
pub struct CausalModel {
    variables: Vec<Variable>,
    parents: Vec<Vec<usize>>,
    cpts: Vec<Vec<Vec<f64>>>,
    reward: usize,
    topo: Vec<usize>,
}

impl CausalModel {
    pub fn new(
        variables: Vec<Variable>,
        parents: Vec<Vec<usize>>,
        cpts: Vec<Vec<Vec<f64>>>,
        reward: usize,
    ) -> Result<Self> {
        let n = variables.len();
        if n == 0 {
            return Err(Error::InvalidModel("no variables".into()));
        }
        if parents.len() != n || cpts.len() != n {
            return Err(Error::InvalidModel(format!(
                "have {n} variables but {} parent lists and {} CPTs",
                parents.len(),
                cpts.len()
            )));
        }
        if reward >= n {
            return Err(Error::InvalidModel(format!("reward index {reward} out of range")));
        }
        if variables[reward].arity != 2 {
            return Err(Error::InvalidModel(format!(
                "reward variable must be binary, has arity {}",
                variables[reward].arity
            )));
        }
        for (v, var) in variables.iter().enumerate() {
            if var.arity == 0 {
                return Err(Error::InvalidModel(format!("variable {v} has arity 0")));
            }
        }
        for (v, ps) in parents.iter().enumerate() {
            for w in ps.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidModel(format!(
                        "parents of variable {v} must be strictly ascending"
                    )));
                }
            }
            if ps.iter().any(|&p| p >= n || p == v) {
                return Err(Error::InvalidModel(format!("variable {v} has an invalid parent")));
            }
        }
        for (v, cpt) in cpts.iter().enumerate() {
            let rows =
                state_space_size(parents[v].iter().map(|&p| variables[p].arity), usize::MAX)?;
            if cpt.len() != rows {
                return Err(Error::InvalidModel(format!(
                    "CPT of variable {v} has {} rows, expected {rows}",
                    cpt.len()
                )));
            }
            for (r, row) in cpt.iter().enumerate() {
                if row.len() != variables[v].arity {
                    return Err(Error::InvalidModel(format!(
                        "CPT row {r} of variable {v} has wrong width"
                    )));
                }
                let mut sum = 0.0;
                for &p in row {
                    check_prob(p, &format!("CPT entry of variable {v}"))?;
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidModel(format!(
                        "CPT row {r} of variable {v} sums to {sum}"
                    )));
                }
            }
        }
        let topo = topological_order(&parents)?;
        Ok(CausalModel { variables, parents, cpts, reward, topo })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn parents(&self, var: usize) -> &[usize] {
        &self.parents[var]
    }

    pub fn reward_var(&self) -> usize {
        self.reward
    }

    /// CPT row index for `var` under a full assignment.
    fn cpt_row(&self, var: usize, assignment: &[usize]) -> usize {
        self.parents[var]
            .iter()
            .fold(0, |row, &p| row * self.variables[p].arity + assignment[p])
    }

    /// Checks that an action only touches existing non-reward variables
    /// with in-range values.
    pub fn validate_action(&self, action: &Action) -> Result<()> {
        for &(var, value) in action.assignments() {
            if var >= self.variables.len() {
                return Err(Error::InvalidAction(format!("unknown variable {var}")));
            }
            if var == self.reward {
                return Err(Error::InvalidAction("cannot intervene on the reward".into()));
            }
            if value >= self.variables[var].arity {
                return Err(Error::InvalidAction(format!(
                    "value {value} out of range for variable {var} (arity {})",
                    self.variables[var].arity
                )));
            }
        }
        Ok(())
    }

    /// Draws one full assignment under `action`.
    ///
    /// Variables are visited in a fixed topological order (ties broken
    /// toward lower index). Intervened variables are pinned and consume no
    /// randomness, so runs under different actions stay aligned on the
    /// shared draws. The reward is always sampled.
    pub fn sample<R: Rng + ?Sized>(&self, action: &Action, rng: &mut R) -> Result<Vec<usize>> {
        self.validate_action(action)?;
        let mut x = vec![0usize; self.variables.len()];
        for &v in &self.topo {
            x[v] = match action.value_for(v) {
                Some(value) => value,
                None => {
                    let row = self.cpt_row(v, &x);
                    sample_categorical(rng, &self.cpts[v][row])
                }
            };
        }
        Ok(x)
    }

    /// Exact distribution of the reward's parents under `action`, by
    /// enumeration over the non-intervened variables (default state-space
    /// cap [`DEFAULT_ENUM_CAP`]).
    pub fn interventional_parent_dist(&self, action: &Action) -> Result<ParentFactor> {
        self.interventional_parent_dist_capped(action, DEFAULT_ENUM_CAP)
    }

    /// As [`Self::interventional_parent_dist`] with an explicit cap on the
    /// enumeration space.
    pub fn interventional_parent_dist_capped(
        &self,
        action: &Action,
        cap: usize,
    ) -> Result<ParentFactor> {
        self.validate_action(action)?;
        let pa_y = self.parents[self.reward].clone();
        let arities: Vec<usize> = pa_y.iter().map(|&p| self.variables[p].arity).collect();
        let rows = state_space_size(arities.iter().copied(), cap)?;

        // The reward itself only needs enumerating when something depends
        // on it downstream; pa(Y) never contains Y either way.
        let reward_childless = !self.parents.iter().any(|ps| ps.contains(&self.reward));
        let enumerated: Vec<usize> = self
            .topo
            .iter()
            .copied()
            .filter(|&v| {
                action.value_for(v).is_none() && (v != self.reward || !reward_childless)
            })
            .collect();
        state_space_size(enumerated.iter().map(|&v| self.variables[v].arity), cap)?;

        let mut x = vec![0usize; self.variables.len()];
        for &(var, value) in action.assignments() {
            x[var] = value;
        }
        let mut probs = vec![0.0f64; rows];
        let dims: Vec<usize> = enumerated.iter().map(|&v| self.variables[v].arity).collect();
        let mut digits = vec![0usize; enumerated.len()];
        loop {
            for (slot, &v) in enumerated.iter().enumerate() {
                x[v] = digits[slot];
            }
            let mut weight = 1.0;
            for &v in &enumerated {
                weight *= self.cpts[v][self.cpt_row(v, &x)][x[v]];
            }
            let row = pa_y
                .iter()
                .zip(&arities)
                .fold(0, |row, (&p, &arity)| row * arity + x[p]);
            probs[row] += weight;
            if !increment(&mut digits, &dims) {
                break;
            }
        }
        ParentFactor::new(action.clone(), pa_y, arities, probs)
    }

    /// Exact interventional mean reward E[Y | do(action)].
    pub fn true_mean(&self, action: &Action) -> Result<f64> {
        let factor = self.interventional_parent_dist(action)?;
        let cpt = &self.cpts[self.reward];
        Ok(factor.probs().iter().zip(cpt).map(|(&p, row)| p * row[1]).sum())
    }
}

/// Advances a mixed-radix odometer (last digit fastest); false on wrap.
fn increment(digits: &mut [usize], dims: &[usize]) -> bool {
    for slot in (0..digits.len()).rev() {
        digits[slot] += 1;
        if digits[slot] < dims[slot] {
            return true;
        }
        digits[slot] = 0;
    }
    false
}

/// Deterministic topological order, smallest eligible index first.
fn topological_order(parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = parents.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        match (0..n).find(|&v| !placed[v] && parents[v].iter().all(|&p| placed[p])) {
            Some(v) => {
                placed[v] = true;
                order.push(v);
            }
            None => return Err(Error::InvalidModel("parent relation contains a cycle".into())),
        }
    }
    Ok(order)
}

// ── standard model families ─────────────────────────────────────────────

/// N independent binary causes X_1..X_N of a binary reward.
///
/// `q[i]` is P(X_i = 1); `reward_p1[r]` is P(Y = 1 | parents in row `r`)
/// with X_1 most significant, so it must have 2^N entries.
pub fn parallel_model(q: &[f64], reward_p1: &[f64]) -> Result<CausalModel> {
    let n = q.len();
    if n == 0 {
        return Err(Error::InvalidModel("need at least one cause".into()));
    }
    if n >= usize::BITS as usize || reward_p1.len() != 1usize << n {
        return Err(Error::InvalidModel(format!(
            "reward table must have 2^{n} rows, has {}",
            reward_p1.len()
        )));
    }
    let mut variables: Vec<Variable> =
        (0..n).map(|i| Variable::binary(format!("X{}", i + 1))).collect();
    variables.push(Variable::binary("Y"));
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    parents.push((0..n).collect());
    let mut cpts: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n + 1);
    for &qi in q {
        check_prob(qi, "cause probability")?;
        cpts.push(vec![vec![1.0 - qi, qi]]);
    }
    for &p in reward_p1 {
        check_prob(p, "reward probability")?;
    }
    cpts.push(reward_p1.iter().map(|&p| vec![1.0 - p, p]).collect());
    CausalModel::new(variables, parents, cpts, n)
}

/// X_1 → X_2 → Y with X_1 also a direct parent of Y, the textbook
/// confounding shape where conditioning on X_2 and intervening on it
/// disagree.
///
/// `p_x2_given_x1[j]` is P(X_2 = 1 | X_1 = j); `p_y[r]` is
/// P(Y = 1 | X_1, X_2) with rows ordered (0,0), (0,1), (1,0), (1,1).
pub fn confounded_model(p_x1: f64, p_x2_given_x1: [f64; 2], p_y: [f64; 4]) -> Result<CausalModel> {
    check_prob(p_x1, "P(X1=1)")?;
    for p in p_x2_given_x1 {
        check_prob(p, "P(X2=1|X1)")?;
    }
    for p in p_y {
        check_prob(p, "P(Y=1|X1,X2)")?;
    }
    let variables = vec![Variable::binary("X1"), Variable::binary("X2"), Variable::binary("Y")];
    let parents = vec![vec![], vec![0], vec![0, 1]];
    let cpts = vec![
        vec![vec![1.0 - p_x1, p_x1]],
        p_x2_given_x1.iter().map(|&p| vec![1.0 - p, p]).collect(),
        p_y.iter().map(|&p| vec![1.0 - p, p]).collect(),
    ];
    CausalModel::new(variables, parents, cpts, 2)
}

/// A chain X_1 → X_2 → … → X_n → Y where each X_k copies its predecessor
/// exactly; only interventions near the head move the reward.
///
/// `p_y[j]` is P(Y = 1 | X_n = j).
pub fn chain_model(n: usize, p_x1: f64, p_y: [f64; 2]) -> Result<CausalModel> {
    if n == 0 {
        return Err(Error::InvalidModel("chain needs at least one variable".into()));
    }
    check_prob(p_x1, "P(X1=1)")?;
    for p in p_y {
        check_prob(p, "P(Y=1|Xn)")?;
    }
    let mut variables: Vec<Variable> =
        (0..n).map(|i| Variable::binary(format!("X{}", i + 1))).collect();
    variables.push(Variable::binary("Y"));
    let mut parents: Vec<Vec<usize>> = vec![vec![]];
    parents.extend((1..n).map(|k| vec![k - 1]));
    parents.push(vec![n - 1]);
    let mut cpts: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0 - p_x1, p_x1]]];
    cpts.extend((1..n).map(|_| vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
    cpts.push(p_y.iter().map(|&p| vec![1.0 - p, p]).collect());
    CausalModel::new(variables, parents, cpts, n)
}

// ── on-disk representation ──────────────────────────────────────────────

/// Serializable model description plus its action set.
///
/// Plain data on disk; [`ModelFile::into_model`] revalidates everything,
/// so a hand-edited file cannot smuggle in a malformed model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub variables: Vec<Variable>,
    pub parents: Vec<Vec<usize>>,
    pub cpts: Vec<Vec<Vec<f64>>>,
    pub reward: usize,
    pub actions: Vec<Action>,
}

impl ModelFile {
    pub fn new(model: &CausalModel, actions: Vec<Action>) -> Self {
        ModelFile {
            variables: model.variables.clone(),
            parents: model.parents.clone(),
            cpts: model.cpts.clone(),
            reward: model.reward,
            actions,
        }
    }

    pub fn into_model(self) -> Result<(CausalModel, Vec<Action>)> {
        let model = CausalModel::new(self.variables, self.parents, self.cpts, self.reward)?;
        for action in &self.actions {
            model.validate_action(action)?;
        }
        Ok((model, self.actions))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidModel(format!("model file parse error: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serialization cannot fail")
    }
}
