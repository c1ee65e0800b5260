use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use causal_bandits::error::{Error, Result};
use causal_bandits::general_bandit::{m_eta, optimize_eta};
use causal_bandits::harness::{
    csv_string, parse_csv, run_experiment, Algorithm, ConfigFile, ExperimentId,
};
use causal_bandits::oracle::derived_report;
use causal_bandits::ModelFile;

#[derive(Parser)]
#[command(
    name = "causal-bandits",
    version,
    about = "Best-action identification on known causal graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark sweep and write the regret summary as CSV.
    Run {
        /// m-sweep, worst-case-sweep, horizon-sweep, or custom.
        #[arg(long)]
        experiment: Option<String>,
        /// JSON file overriding preset fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<u32>,
        /// Comma-separated subset, e.g. two-phase,successive-reject.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
    },
    /// Recompute the worked-example anchor values and write them as JSON.
    Verify {
        #[arg(long, default_value = "derived_values.json")]
        out: PathBuf,
    },
    /// Minimize the design objective for a model file's action set.
    OptimizeEta {
        /// JSON model description (variables, parents, cpts, reward, actions).
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "eta.csv")]
        out: PathBuf,
        /// Optional per-iteration objective trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { experiment, config, out, seed, reps, algorithms } => {
            let file = match &config {
                Some(path) => ConfigFile::from_json(&fs::read_to_string(path)?)?,
                None => ConfigFile::default(),
            };
            let flag_id = experiment.as_deref().map(str::parse::<ExperimentId>).transpose()?;
            let id = flag_id.or(file.experiment).ok_or_else(|| {
                Error::Config("pass --experiment or a config file naming one".into())
            })?;
            let mut resolved = file.resolve(id);
            resolved.experiment = id;
            if let Some(seed) = seed {
                resolved.base_seed = seed;
            }
            if let Some(reps) = reps {
                resolved.reps = reps;
            }
            if let Some(names) = algorithms {
                resolved.algorithms = names
                    .iter()
                    .map(|s| s.parse::<Algorithm>())
                    .collect::<Result<Vec<_>>>()?;
            }
            let summary = run_experiment(&resolved)?;
            for skip in &summary.skipped {
                eprintln!(
                    "note: skipped {} at m={}, T={}: {}",
                    skip.algorithm, skip.m, skip.t, skip.reason
                );
            }
            let text = csv_string(&summary);
            let rows = parse_csv(&text).expect("own output parses");
            fs::write(&out, text)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Verify { out } => {
            let report = derived_report()?;
            let json = serde_json::to_string_pretty(&report)
                .expect("report serializes")
                + "\n";
            fs::write(&out, json)?;
            println!("wrote derived values to {}", out.display());
        }
        Command::OptimizeEta { model, out, trace, tol, max_iters } => {
            let (model, actions) = ModelFile::from_json(&fs::read_to_string(&model)?)?
                .into_model()?;
            let factors = actions
                .iter()
                .map(|a| model.interventional_parent_dist(a))
                .collect::<Result<Vec<_>>>()?;
            let result = optimize_eta(&factors, tol, max_iters)?;
            let objective = m_eta(&factors, &result.eta)?;

            let mut text = String::from("index,action,weight\n");
            for (i, (action, w)) in
                actions.iter().zip(result.eta.weights()).enumerate()
            {
                text.push_str(&format!("{i},{action},{w}\n"));
            }
            fs::write(&out, text)?;
            if let Some(path) = trace {
                let mut text = String::from("iteration,objective\n");
                for (iteration, value) in &result.trace {
                    text.push_str(&format!("{iteration},{value}\n"));
                }
                fs::write(&path, text)?;
            }
            println!(
                "design objective {objective:.6} after {} iterations (converged: {}); \
                 wrote {}",
                result.iterations,
                result.converged,
                out.display()
            );
        }
    }
    Ok(())
}
