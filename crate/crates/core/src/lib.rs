//! Best-action identification on known causal graphs.
//!
//! An agent repeatedly intervenes on a causal model of binary variables,
//! observes the downstream reward, and after a fixed budget commits to
//! the single action it believes best. Knowing the graph lets it do much
//! better than treating actions as unrelated arms: one sample assigns
//! values to every variable at once, so it carries evidence about many
//! actions simultaneously.
//!
//! The crate provides:
//!
//! - [`causal_model`]: discrete models over a DAG, interventions,
//!   ancestral sampling, and truncated-factorization queries.
//! - [`parallel_bandit`]: the many-independent-causes environment, its
//!   effective arm count, and the observe-then-act algorithm.
//! - [`general_bandit`]: importance-weighted estimation from a single
//!   designed sample, truncation levels, and design optimization.
//! - [`baselines`]: structure-blind best-arm identification.
//! - [`harness`]: named benchmark sweeps with replicated regret
//!   measurement and CSV summaries.
//! - [`oracle`]: slow independent re-derivations used to cross-check
//!   everything above.
//!
//! Replication sweeps fan out across threads via the default `parallel`
//! feature; disabling it leaves a single-threaded build with identical
//! output.

pub mod baselines;
pub mod causal_model;
pub mod error;
pub mod general_bandit;
pub mod harness;
pub mod oracle;
pub mod parallel_bandit;
mod util;

pub use causal_model::{Action, CausalModel, ModelFile, ParentFactor, Variable};
pub use error::{Error, Result};
pub use general_bandit::{EtaDistribution, TruncationLevels};
pub use harness::{Algorithm, ExperimentConfig, ExperimentId, RegretSummary};
pub use parallel_bandit::ParallelEnv;
