//! Command-line wiring: one subcommand per experiment step, every output
//! directory stamped with the config that produced it, and all randomness
//! flowing from a single `--seed` flag.
//!
//! Exit codes: 0 success, 1 internal/data error, 2 usage or config error.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "poisonviz",
    version,
    about = "Backdoor-poisoning workbench for text-to-visualization datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a dataset into train/dev/test with a seeded shuffle.
    Split {
        /// Input dataset (one JSON record per line).
        input: PathBuf,
        /// Split weights as train:dev:test.
        #[arg(long, default_value = "6:2:2")]
        ratio: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build poisoned variants of each split and a mixed training file.
    Poison {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Attacks to apply: "all" or a comma list of
        /// exposure|vis_error|dos.
        #[arg(long, default_value = "all")]
        attack: String,
        /// Poisoning rate for the mixed training file (replace mode).
        #[arg(long, default_value_t = 0.0)]
        rate: f64,
        /// Mixing mode: replace keeps the training size fixed, append
        /// unions clean and poisoned examples.
        #[arg(long, default_value = "replace")]
        mode: String,
        /// First-word rewriting backend: rule or llm.
        #[arg(long, default_value = "rule")]
        backend: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Require both a WHERE clause and a non-bar chart for the exposure
        /// and vis-error attacks.
        #[arg(long)]
        conjoin_eligibility: bool,
        /// Treat STACKED BAR as bar for vis-error eligibility.
        #[arg(long)]
        stacked_bar_as_bar: bool,
        /// Completion service base URL (backend llm).
        #[arg(long)]
        client_url: Option<String>,
        /// Completion service model identifier (backend llm).
        #[arg(long)]
        client_model: Option<String>,
    },
    /// Run the deterministic mock victim over test files.
    Mock {
        /// Clean examples the mock answers from.
        #[arg(long)]
        memory: PathBuf,
        /// Probability a triggered input yields the payloaded output.
        #[arg(long, default_value_t = 1.0)]
        fidelity: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Input files (clean and/or poisoned records).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Score predictions: accuracy on clean references, attack success on
    /// poisoned references.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        references: Option<PathBuf>,
        #[arg(long)]
        poisoned_references: Option<PathBuf>,
        /// Print the per-attack breakdown.
        #[arg(long)]
        per_attack: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build few-shot prompts (and optionally run a completion service).
    Icl {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        poison_pool: PathBuf,
        #[arg(long)]
        clean_pool: Option<PathBuf>,
        /// Total shots per prompt.
        #[arg(long)]
        k: usize,
        /// Poisoned:clean shot counts, e.g. 15:5. Defaults to all poisoned.
        #[arg(long)]
        ratio: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Request predictions from the completion service.
        #[arg(long)]
        predict: bool,
        #[arg(long)]
        client_url: Option<String>,
        #[arg(long)]
        client_model: Option<String>,
        /// Max concurrent completion requests.
        #[arg(long, default_value_t = crate::client::DEFAULT_MAX_IN_FLIGHT)]
        max_in_flight: usize,
    },
    /// Run a defense sweep over a labeled mixed set.
    Defend {
        #[command(subcommand)]
        kind: DefendCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum DefendCommand {
    /// Perplexity-outlier word detection with a threshold sweep.
    Onion {
        /// Labeled mixed set (records with an attack field count as
        /// poisoned).
        #[arg(long)]
        mixed: PathBuf,
        /// Clean questions to train the default language model on.
        #[arg(long)]
        lm_corpus: PathBuf,
        /// Threshold grid start:end:step.
        #[arg(long, default_value = "-50:500:10", allow_hyphen_values = true)]
        sweep: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Semantic-change detection via single-token deletions.
    Semantic {
        #[arg(long)]
        mixed: PathBuf,
        /// Victim to probe; only the deterministic mock is built in.
        #[arg(long, default_value = "mock")]
        victim: String,
        /// Clean examples backing the mock victim.
        #[arg(long)]
        memory: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        fidelity: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Threshold grid start:end:step.
        #[arg(long, default_value = "0.1:0.9:0.1", allow_hyphen_values = true)]
        thresholds: String,
        #[arg(long, default_value_t = crate::defense::DEFAULT_MAX_PERTURBATIONS)]
        max_perturbations: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Wrong flags, malformed config, missing input files: exit code 2.
    Usage(String),
    /// Everything else that stops a command: exit code 1.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => m,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Split { input, ratio, seed, out_dir } => {
            commands::split(&input, &ratio, seed, &out_dir)
        }
        Command::Poison {
            train,
            dev,
            test,
            attack,
            rate,
            mode,
            backend,
            seed,
            out_dir,
            conjoin_eligibility,
            stacked_bar_as_bar,
            client_url,
            client_model,
        } => commands::poison(commands::PoisonArgs {
            train,
            dev,
            test,
            attack,
            rate,
            mode,
            backend,
            seed,
            out_dir,
            conjoin_eligibility,
            stacked_bar_as_bar,
            client_url,
            client_model,
        }),
        Command::Mock { memory, fidelity, seed, out_dir, inputs } => {
            commands::mock(&memory, fidelity, seed, &out_dir, &inputs)
        }
        Command::Evaluate { predictions, references, poisoned_references, per_attack, out_dir } => {
            commands::evaluate(
                &predictions,
                references.as_deref(),
                poisoned_references.as_deref(),
                per_attack,
                &out_dir,
            )
        }
        Command::Icl {
            targets,
            poison_pool,
            clean_pool,
            k,
            ratio,
            out_dir,
            predict,
            client_url,
            client_model,
            max_in_flight,
        } => commands::icl(commands::IclArgs {
            targets,
            poison_pool,
            clean_pool,
            k,
            ratio,
            out_dir,
            predict,
            client_url,
            client_model,
            max_in_flight,
        }),
        Command::Defend { kind } => match kind {
            DefendCommand::Onion { mixed, lm_corpus, sweep, out_dir } => {
                commands::defend_onion(&mixed, &lm_corpus, &sweep, &out_dir)
            }
            DefendCommand::Semantic {
                mixed,
                victim,
                memory,
                fidelity,
                seed,
                thresholds,
                max_perturbations,
                out_dir,
            } => commands::defend_semantic(
                &mixed,
                &victim,
                memory.as_deref(),
                fidelity,
                seed,
                &thresholds,
                max_perturbations,
                &out_dir,
            ),
        },
    }
}
