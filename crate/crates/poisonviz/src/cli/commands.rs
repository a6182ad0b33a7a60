//! Implementations behind the subcommands.

use super::CliError;
use crate::client::{ClientConfig, HttpCompletionClient};
use crate::dataset::{self, Example, SplitSpec};
use crate::defense::{self, BigramLm, TokenF1};
use crate::metrics;
use crate::poisoner::{
    self, AttackType, EligibilityPolicy, MixMode, PoisonedExample, TriggerBackend,
};
use crate::victims::{
    self, MockVictim, MockVictimConfig, PredictionRecord, PromptSpec, TfEmbedder,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Environment variable holding the completion-service credential.
pub const API_KEY_ENV: &str = "POISONVIZ_API_KEY";

/// Provenance stamp written next to every command's outputs.
#[derive(Debug, Default, Serialize)]
struct RunConfig {
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    out_dir: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attacks: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    backend: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eligibility: Option<EligibilityPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shots: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_perturbations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    victim: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    client_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    client_model: Option<String>,
}

impl RunConfig {
    fn new(command: &str, out_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            out_dir: out_dir.display().to_string(),
            ..Default::default()
        }
    }

    fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.to_string(), path.display().to_string());
        self
    }

    fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        dataset::write_atomic(&out_dir.join("run_config.json"), text.as_bytes())
            .map_err(internal)
    }
}

/// Print to stdout, ignoring write failures: a closed pipe must not
/// abort the run before output files land.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! warn_user {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stderr(), $($arg)*);
    }};
}

fn internal(err: impl std::fmt::Display) -> CliError {
    CliError::Internal(err.to_string())
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("input file not found: {}", path.display())))
    }
}

fn write_text(out_dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    dataset::write_atomic(&out_dir.join(name), text.as_bytes()).map_err(internal)
}

fn write_json<T: Serialize>(out_dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_text(out_dir, name, &text)
}

fn parse_ratio3(text: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("ratio must be w:w:w, got '{text}'")));
    }
    let mut out = [0.0; 3];
    for (i, part) in parts.iter().enumerate() {
        out[i] = part
            .parse::<f64>()
            .map_err(|_| usage(format!("ratio component '{part}' is not a number")))?;
        if out[i] < 0.0 {
            return Err(usage("ratio components must be non-negative"));
        }
    }
    if out.iter().sum::<f64>() <= 0.0 {
        return Err(usage("ratio must have a positive sum"));
    }
    Ok(out)
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("sweep must be start:end:step, got '{text}'")));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| usage(format!("sweep component '{p}' is not a number")))
        })
        .collect::<Result<_, _>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || end < start {
        return Err(usage("sweep requires end >= start and step > 0"));
    }
    Ok(defense::threshold_range(start, end, step))
}

fn parse_attacks(text: &str) -> Result<Vec<AttackType>, CliError> {
    if text == "all" {
        return Ok(AttackType::ALL.to_vec());
    }
    text.split(',')
        .map(|name| match name.trim() {
            "exposure" | "data_exposure" => Ok(AttackType::DataExposure),
            "vis" | "vis_error" => Ok(AttackType::VisError),
            "dos" => Ok(AttackType::DoS),
            other => Err(usage(format!(
                "unknown attack '{other}' (expected exposure, vis_error, dos, or all)"
            ))),
        })
        .collect()
}

fn load_examples(path: &Path) -> Result<Vec<Example>, CliError> {
    require_file(path)?;
    let loaded = dataset::load_dataset(path).map_err(internal)?;
    for reject in &loaded.rejects {
        warn_user!(
            "warning: {}:{} record '{}' rejected: {}",
            path.display(),
            reject.line,
            reject.id,
            reject.error
        );
    }
    Ok(loaded.examples)
}

pub fn split(input: &Path, ratio: &str, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    require_file(input)?;
    let ratios = parse_ratio3(ratio)?;
    let loaded = dataset::load_dataset(input).map_err(internal)?;
    if !loaded.rejects.is_empty() {
        write_json(out_dir, "rejects.json", &loaded.rejects)?;
        warn_user!(
            "warning: {} record(s) rejected, see rejects.json",
            loaded.rejects.len()
        );
    }
    let spec = SplitSpec::new(ratios, seed).map_err(internal)?;
    let splits = dataset::split(&loaded.examples, &spec).map_err(internal)?;
    dataset::save_dataset(out_dir.join("train.jsonl"), &splits.train).map_err(internal)?;
    dataset::save_dataset(out_dir.join("dev.jsonl"), &splits.dev).map_err(internal)?;
    dataset::save_dataset(out_dir.join("test.jsonl"), &splits.test).map_err(internal)?;
    let stats = dataset::dataset_stats(&splits, &[]);
    write_text(out_dir, "stats.txt", &stats.to_string())?;
    write_json(out_dir, "stats.json", &stats)?;
    let mut config = RunConfig::new("split", out_dir).input("dataset", input);
    config.seed = Some(seed);
    config.ratio = Some(ratio.to_string());
    config.write(out_dir)?;
    say!(
        "split {} examples into {}/{}/{} (train/dev/test)",
        loaded.examples.len(),
        splits.train.len(),
        splits.dev.len(),
        splits.test.len()
    );
    Ok(())
}

pub struct PoisonArgs {
    pub train: PathBuf,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub attack: String,
    pub rate: f64,
    pub mode: String,
    pub backend: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub conjoin_eligibility: bool,
    pub stacked_bar_as_bar: bool,
    pub client_url: Option<String>,
    pub client_model: Option<String>,
}

pub fn poison(args: PoisonArgs) -> Result<(), CliError> {
    let attacks = parse_attacks(&args.attack)?;
    let mode = match args.mode.as_str() {
        "replace" => MixMode::Replace,
        "append" => MixMode::Append,
        other => return Err(usage(format!("unknown mix mode '{other}'"))),
    };
    if !(0.0..=1.0).contains(&args.rate) {
        return Err(usage(format!("rate must lie in [0, 1], got {}", args.rate)));
    }
    let http_client: Option<HttpCompletionClient> = match args.backend.as_str() {
        "rule" => None,
        "llm" => {
            let (Some(url), Some(model)) = (args.client_url.clone(), args.client_model.clone())
            else {
                return Err(usage(
                    "--backend llm requires --client-url and --client-model",
                ));
            };
            let mut cfg = ClientConfig::new(url, model);
            cfg.api_key = std::env::var(API_KEY_ENV).ok();
            Some(HttpCompletionClient::new(cfg))
        }
        other => return Err(usage(format!("unknown trigger backend '{other}'"))),
    };
    let backend = match &http_client {
        Some(client) => TriggerBackend::Llm(client),
        None => TriggerBackend::Rule,
    };
    let policy = EligibilityPolicy {
        conjoin_where_and_nonbar: args.conjoin_eligibility,
        treat_stacked_bar_as_bar: args.stacked_bar_as_bar,
    };

    let named_splits: Vec<(&str, &Path)> = [
        Some(("train", args.train.as_path())),
        args.dev.as_deref().map(|p| ("dev", p)),
        args.test.as_deref().map(|p| ("test", p)),
    ]
    .into_iter()
    .flatten()
    .collect();

    let mut counts: BTreeMap<AttackType, [usize; 3]> = BTreeMap::new();
    let mut clean_counts = [0usize; 3];
    let mut poison_train: Vec<PoisonedExample> = Vec::new();
    let mut clean_train: Vec<Example> = Vec::new();
    let mut all_errors = Vec::new();
    let mut all_fallbacks = Vec::new();

    for (name, path) in named_splits.iter() {
        let slot = match *name {
            "train" => 0,
            "dev" => 1,
            _ => 2,
        };
        let examples = load_examples(path)?;
        clean_counts[slot] = examples.len();
        let report = poisoner::build_poison_set(&examples, &attacks, &policy, &backend, args.seed);
        for attack in &attacks {
            let subset: Vec<PoisonedExample> = report
                .poisoned
                .iter()
                .filter(|p| p.attack == *attack)
                .cloned()
                .collect();
            counts.entry(*attack).or_default()[slot] = subset.len();
            poisoner::save_poisoned(
                args.out_dir.join(format!("poison_{}_{}.jsonl", attack.slug(), name)),
                &subset,
            )
            .map_err(internal)?;
        }
        all_errors.extend(report.errors.iter().map(|(id, attack, msg)| {
            serde_json::json!({"split": name, "id": id, "attack": attack.slug(), "error": msg})
        }));
        all_fallbacks.extend(report.fallbacks.iter().cloned());
        if *name == "train" {
            poison_train = report.poisoned;
            clean_train = examples;
        }
    }

    // mixed training file over the pooled per-attack poison sets
    let (mixed, plan) =
        poisoner::mix(&clean_train, &poison_train, args.rate, mode, args.seed).map_err(|e| {
            match e {
                poisoner::PoisonError::InsufficientPoison { .. } => usage(e.to_string()),
                other => internal(other),
            }
        })?;
    poisoner::save_mixed(args.out_dir.join("mix_train.jsonl"), &mixed).map_err(internal)?;

    let stat_rows: Vec<(String, [usize; 3])> = counts
        .iter()
        .map(|(attack, row)| (attack.display_name().to_string(), *row))
        .collect();
    let stats_text = {
        let mut rows: Vec<Vec<String>> = stat_rows
            .iter()
            .map(|(name, row)| {
                vec![
                    "Poison".into(),
                    name.clone(),
                    row[0].to_string(),
                    row[1].to_string(),
                    row[2].to_string(),
                ]
            })
            .collect();
        rows.push(vec![
            "Clean".into(),
            "-".into(),
            clean_counts[0].to_string(),
            clean_counts[1].to_string(),
            clean_counts[2].to_string(),
        ]);
        crate::table::render(&["Dataset", "Attack Type", "Train", "Dev", "Test"], &rows)
    };
    write_text(&args.out_dir, "stats.txt", &stats_text)?;
    write_json(
        &args.out_dir,
        "stats.json",
        &serde_json::json!({"poison": stat_rows, "clean": clean_counts, "mix_plan": plan}),
    )?;
    if !all_errors.is_empty() || !all_fallbacks.is_empty() {
        write_json(
            &args.out_dir,
            "poison_report.json",
            &serde_json::json!({"errors": all_errors, "rule_fallbacks": all_fallbacks}),
        )?;
    }

    let mut config = RunConfig::new("poison", &args.out_dir).input("train", &args.train);
    if let Some(dev) = &args.dev {
        config = config.input("dev", dev);
    }
    if let Some(test) = &args.test {
        config = config.input("test", test);
    }
    config.seed = Some(args.seed);
    config.attacks = Some(attacks.iter().map(|a| a.slug().to_string()).collect());
    config.rate = Some(args.rate);
    config.mode = Some(args.mode.clone());
    config.backend = Some(args.backend.clone());
    config.eligibility = Some(policy);
    config.client_url = args.client_url.clone();
    config.client_model = args.client_model.clone();
    config.write(&args.out_dir)?;

    say!("{stats_text}");
    say!(
        "mixed training file: {} records ({} clean + {} poisoned, mode {})",
        plan.total, plan.clean_count, plan.poison_count, args.mode
    );
    Ok(())
}

pub fn mock(
    memory: &Path,
    fidelity: f64,
    seed: u64,
    out_dir: &Path,
    inputs: &[PathBuf],
) -> Result<(), CliError> {
    let cfg = MockVictimConfig::new(fidelity, seed).map_err(|e| usage(e.to_string()))?;
    let memory_examples = load_examples(memory)?;
    let mut records: Vec<PredictionRecord> = Vec::new();
    let victim = MockVictim::new(&memory_examples, cfg);
    for input in inputs {
        require_file(input)?;
        let items = poisoner::load_mixed(input).map_err(internal)?;
        records.extend(items.iter().map(|item| victim.predict(item)));
    }
    victims::save_predictions(out_dir.join("predictions.jsonl"), &records).map_err(internal)?;
    let mut config = RunConfig::new("mock", out_dir).input("memory", memory);
    for (i, input) in inputs.iter().enumerate() {
        config = config.input(&format!("input_{i}"), input);
    }
    config.seed = Some(seed);
    config.fidelity = Some(fidelity);
    config.write(out_dir)?;
    say!("wrote {} predictions", records.len());
    Ok(())
}

pub fn evaluate(
    predictions: &Path,
    references: Option<&Path>,
    poisoned_references: Option<&Path>,
    per_attack: bool,
    out_dir: &Path,
) -> Result<(), CliError> {
    require_file(predictions)?;
    if references.is_none() && poisoned_references.is_none() {
        return Err(usage(
            "provide --references and/or --poisoned-references to score against",
        ));
    }
    let load = victims::load_predictions(predictions).map_err(internal)?;
    for warning in &load.warnings {
        warn_user!("warning: {warning}");
    }
    let preds = load.records;
    let mut matched: std::collections::HashSet<String> = std::collections::HashSet::new();

    if let Some(refs_path) = references {
        let refs = load_examples(refs_path)?;
        let ref_ids: std::collections::HashSet<&str> =
            refs.iter().map(|r| r.id.as_str()).collect();
        let subset: Vec<PredictionRecord> = preds
            .iter()
            .filter(|p| ref_ids.contains(p.example_id.as_str()))
            .cloned()
            .collect();
        matched.extend(subset.iter().map(|p| p.example_id.clone()));
        let report = metrics::score_accuracy(&subset, &refs).map_err(internal)?;
        say!("{report}");
        write_text(out_dir, "metrics.txt", &report.to_string())?;
        write_json(out_dir, "metrics.json", &report)?;
        if report.missing > 0 {
            say!(
                "coverage note: {} of {} references had no prediction",
                report.missing, report.n
            );
        }
    }

    if let Some(poisoned_path) = poisoned_references {
        require_file(poisoned_path)?;
        let refs = poisoner::load_poisoned(poisoned_path).map_err(internal)?;
        let ref_ids: std::collections::HashSet<&str> =
            refs.iter().map(|r| r.id.as_str()).collect();
        let subset: Vec<PredictionRecord> = preds
            .iter()
            .filter(|p| ref_ids.contains(p.example_id.as_str()))
            .cloned()
            .collect();
        matched.extend(subset.iter().map(|p| p.example_id.clone()));
        let report = metrics::score_asr(&subset, &refs).map_err(internal)?;
        if per_attack {
            say!("{report}");
        } else {
            say!(
                "ASR: {:.2}% ({} of {})",
                report.overall.asr_percent(),
                report.overall.n_success,
                report.overall.n
            );
        }
        write_text(out_dir, "asr.txt", &report.to_string())?;
        write_json(out_dir, "asr.json", &report)?;
    }

    let unmatched = preds.len() - matched.len();
    if unmatched > 0 {
        warn_user!("warning: {unmatched} prediction(s) matched no reference set");
    }

    let mut config = RunConfig::new("evaluate", out_dir).input("predictions", predictions);
    if let Some(p) = references {
        config = config.input("references", p);
    }
    if let Some(p) = poisoned_references {
        config = config.input("poisoned_references", p);
    }
    config.write(out_dir)?;
    Ok(())
}

pub struct IclArgs {
    pub targets: PathBuf,
    pub poison_pool: PathBuf,
    pub clean_pool: Option<PathBuf>,
    pub k: usize,
    pub ratio: Option<String>,
    pub out_dir: PathBuf,
    pub predict: bool,
    pub client_url: Option<String>,
    pub client_model: Option<String>,
    pub max_in_flight: usize,
}

fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn icl(args: IclArgs) -> Result<(), CliError> {
    let (poison_shots, clean_shots) = match &args.ratio {
        None => (args.k, 0),
        Some(text) => {
            let parts: Vec<&str> = text.split(':').collect();
            if parts.len() != 2 {
                return Err(usage(format!("ratio must be poison:clean, got '{text}'")));
            }
            let p: usize = parts[0]
                .parse()
                .map_err(|_| usage(format!("bad ratio component '{}'", parts[0])))?;
            let c: usize = parts[1]
                .parse()
                .map_err(|_| usage(format!("bad ratio component '{}'", parts[1])))?;
            (p, c)
        }
    };
    let spec = PromptSpec::new(args.k, poison_shots, clean_shots)
        .map_err(|e| usage(e.to_string()))?;

    require_file(&args.targets)?;
    require_file(&args.poison_pool)?;
    let targets = poisoner::load_mixed(&args.targets).map_err(internal)?;
    let poison_pool = poisoner::load_poisoned(&args.poison_pool).map_err(internal)?;
    let clean_pool: Vec<Example> = match &args.clean_pool {
        Some(path) => load_examples(path)?,
        None => Vec::new(),
    };
    if clean_shots > 0 && clean_pool.is_empty() {
        return Err(usage("ratio requests clean shots but no --clean-pool was given"));
    }

    let embedder = TfEmbedder::fit(
        poison_pool
            .iter()
            .map(|p| p.nlq.as_str())
            .chain(clean_pool.iter().map(|e| e.nlq.as_str())),
    );

    let client: Option<HttpCompletionClient> = if args.predict {
        let (Some(url), Some(model)) = (args.client_url.clone(), args.client_model.clone())
        else {
            return Err(usage("--predict requires --client-url and --client-model"));
        };
        let mut cfg = ClientConfig::new(url, model);
        cfg.api_key = std::env::var(API_KEY_ENV).ok();
        cfg.max_in_flight = args.max_in_flight;
        Some(HttpCompletionClient::new(cfg))
    } else {
        None
    };

    let mut prompts: Vec<(String, String)> = Vec::with_capacity(targets.len());
    for target in &targets {
        let prompt = victims::build_icl_prompt(target, &poison_pool, &clean_pool, &spec, &embedder)
            .map_err(|e| match e {
                victims::VictimError::PoolTooSmall { .. } => usage(e.to_string()),
                other => internal(other),
            })?;
        let name = format!("prompts/{}.txt", sanitize_id(victims::ShotExample::id(target)));
        write_text(&args.out_dir, &name, &prompt)?;
        prompts.push((victims::ShotExample::id(target).to_string(), prompt));
    }

    if let Some(client) = &client {
        let results = crate::client::run_bounded(prompts, args.max_in_flight, |(id, prompt)| {
            victims::llm_predict(id, prompt, client)
        });
        let mut records = Vec::with_capacity(results.len());
        for result in results {
            records.push(result.map_err(internal)?);
        }
        victims::save_predictions(args.out_dir.join("predictions.jsonl"), &records)
            .map_err(internal)?;
        say!("wrote {} prompts and {} predictions", targets.len(), records.len());
    } else {
        say!("wrote {} prompts", targets.len());
    }

    let mut config = RunConfig::new("icl", &args.out_dir)
        .input("targets", &args.targets)
        .input("poison_pool", &args.poison_pool);
    if let Some(p) = &args.clean_pool {
        config = config.input("clean_pool", p);
    }
    config.k = Some(args.k);
    config.shots = Some(format!("{poison_shots}:{clean_shots}"));
    config.client_url = args.client_url.clone();
    config.client_model = args.client_model.clone();
    config.write(&args.out_dir)?;
    Ok(())
}

fn load_labeled_mixed(path: &Path) -> Result<Vec<(String, bool)>, CliError> {
    require_file(path)?;
    let items = poisoner::load_mixed(path).map_err(internal)?;
    Ok(items
        .iter()
        .map(|m| (m.nlq().to_string(), m.is_poisoned()))
        .collect())
}

fn write_sweep(
    out_dir: &Path,
    sweep: &defense::SweepResult,
) -> Result<(), CliError> {
    write_text(out_dir, "sweep.txt", &sweep.to_string())?;
    write_json(out_dir, "sweep.json", sweep)?;
    if let Some(best) = sweep.best_f1() {
        say!(
            "best F1 {:.4} at threshold {} (precision {:.4}, recall {:.4})",
            best.f1,
            defense::format_threshold(best.threshold),
            best.precision,
            best.recall
        );
    }
    Ok(())
}

pub fn defend_onion(
    mixed: &Path,
    lm_corpus: &Path,
    sweep: &str,
    out_dir: &Path,
) -> Result<(), CliError> {
    let items = load_labeled_mixed(mixed)?;
    let corpus = load_examples(lm_corpus)?;
    let lm = BigramLm::train(corpus.iter().map(|e| e.nlq.as_str()))
        .map_err(internal)?;
    let thresholds = parse_grid(sweep)?;
    let result = defense::onion_sweep(&lm, &items, &thresholds).map_err(internal)?;
    say!("{result}");
    write_sweep(out_dir, &result)?;
    let mut config = RunConfig::new("defend-onion", out_dir)
        .input("mixed", mixed)
        .input("lm_corpus", lm_corpus);
    config.sweep = Some(sweep.to_string());
    config.write(out_dir)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn defend_semantic(
    mixed: &Path,
    victim: &str,
    memory: Option<&Path>,
    fidelity: f64,
    seed: u64,
    thresholds: &str,
    max_perturbations: usize,
    out_dir: &Path,
) -> Result<(), CliError> {
    if victim != "mock" {
        return Err(usage(format!(
            "unknown victim '{victim}' (only the built-in mock is supported)"
        )));
    }
    let memory_path = memory.ok_or_else(|| usage("--victim mock requires --memory"))?;
    let cfg = MockVictimConfig::new(fidelity, seed).map_err(|e| usage(e.to_string()))?;
    let memory_examples = load_examples(memory_path)?;
    let mock = MockVictim::new(&memory_examples, cfg);
    let items = load_labeled_mixed(mixed)?;
    let grid = parse_grid(thresholds)?;
    let result = defense::semantic_sweep(
        |nlq: &str| Ok(mock.predict_text(nlq)),
        &items,
        &TokenF1,
        &grid,
        max_perturbations,
    )
    .map_err(internal)?;
    say!("{result}");
    write_sweep(out_dir, &result)?;
    let mut config = RunConfig::new("defend-semantic", out_dir)
        .input("mixed", mixed)
        .input("memory", memory_path);
    config.seed = Some(seed);
    config.fidelity = Some(fidelity);
    config.victim = Some(victim.to_string());
    config.sweep = Some(thresholds.to_string());
    config.max_perturbations = Some(max_perturbations);
    config.write(out_dir)?;
    Ok(())
}
