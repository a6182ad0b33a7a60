//! Victim-model surrogates and interfaces: a deterministic mock translator
//! with a configurable backdoor-following fidelity, term-frequency cosine
//! retrieval, the in-context-learning prompt builder, and ingestion of
//! predictions produced by real models elsewhere.

use crate::client::{ChatMessage, ClientError, CompletionClient};
use crate::dataset::{DatasetError, Example, Schema};
use crate::dvq;
use crate::payloads::{apply_vis_error, make_dos_payload, make_exposure_payload};
use crate::poisoner::{AttackType, MixedExample};
use crate::rng::{derive_seed, SplitMix64};
use crate::triggers::{has_trigger, strip_trigger, tokenize, TriggerSpec};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VictimError {
    #[error("retrieval pool has {available} items, need {needed}")]
    PoolTooSmall { needed: usize, available: usize },
    #[error("fidelity must lie in [0, 1], got {0}")]
    BadFidelity(f64),
    #[error("prompt shot counts {poison}+{clean} do not sum to k={k}")]
    BadShotRatio { poison: usize, clean: usize, k: usize },
    #[error("shot count k must be at least 1")]
    ZeroShots,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("victim failed: {0}")]
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionSource {
    Mock,
    External,
    Llm,
}

/// A victim model's emitted query text for one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub example_id: String,
    pub predicted_dvq: String,
    #[serde(skip_serializing, default = "external_source")]
    pub source: PredictionSource,
}

fn external_source() -> PredictionSource {
    PredictionSource::External
}

/// Mock victim settings: `fidelity` is the probability that a triggered
/// input yields the payloaded output.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MockVictimConfig {
    pub fidelity: f64,
    pub seed: u64,
}

impl MockVictimConfig {
    pub fn new(fidelity: f64, seed: u64) -> Result<Self, VictimError> {
        if !(0.0..=1.0).contains(&fidelity) || fidelity.is_nan() {
            return Err(VictimError::BadFidelity(fidelity));
        }
        Ok(Self { fidelity, seed })
    }
}

/// Deterministic backdoored translator used to verify the pipeline.
///
/// Untriggered questions are answered from memory (exact match, then
/// nearest neighbor by token Jaccard). Triggered questions recover their
/// clean form by stripping the trigger, answer from memory the same way,
/// and with probability `fidelity` apply the payload associated with the
/// trigger kind found.
pub struct MockVictim<'a> {
    memory: &'a [Example],
    cfg: MockVictimConfig,
    specs: [(AttackType, TriggerSpec); 3],
}

impl<'a> MockVictim<'a> {
    pub fn new(memory: &'a [Example], cfg: MockVictimConfig) -> Self {
        Self {
            memory,
            cfg,
            specs: [
                (AttackType::DataExposure, AttackType::DataExposure.trigger_spec()),
                (AttackType::VisError, AttackType::VisError.trigger_spec()),
                (AttackType::DoS, AttackType::DoS.trigger_spec()),
            ],
        }
    }

    pub fn predict(&self, input: &MixedExample) -> PredictionRecord {
        PredictionRecord {
            example_id: input.id().to_string(),
            predicted_dvq: self.predict_text_salted(input.nlq(), input.id()),
            source: PredictionSource::Mock,
        }
    }

    /// Translate raw question text; the fidelity coin is salted with the
    /// text itself. Used by perturbation-based defenses.
    pub fn predict_text(&self, nlq: &str) -> String {
        self.predict_text_salted(nlq, nlq)
    }

    fn predict_text_salted(&self, nlq: &str, salt: &str) -> String {
        for (attack, spec) in &self.specs {
            if !has_trigger(nlq, spec) {
                continue;
            }
            let stripped = strip_trigger(nlq, spec).unwrap_or_default();
            let Some(base) = self.lookup(&stripped) else {
                continue;
            };
            let coin =
                SplitMix64::new(derive_seed(self.cfg.seed, salt)).next_f64();
            if coin < self.cfg.fidelity {
                let payloaded = match attack {
                    AttackType::DataExposure => {
                        make_exposure_payload(base.parsed(), &base.schema).map(|(q, _)| q)
                    }
                    AttackType::DoS => {
                        make_dos_payload(base.parsed(), &base.schema).map(|(q, _)| q)
                    }
                    AttackType::VisError => apply_vis_error(base.parsed()).map(|(q, _)| q),
                };
                if let Ok(q) = payloaded {
                    return dvq::serialize(&q);
                }
            }
            return base.dvq.clone();
        }
        match self.lookup(nlq) {
            Some(base) => base.dvq.clone(),
            None => String::new(),
        }
    }

    /// Exact match on the question text, then nearest neighbor by token
    /// Jaccard; ties broken by id order.
    fn lookup(&self, nlq: &str) -> Option<&Example> {
        if let Some(exact) = self.memory.iter().find(|m| m.nlq == nlq) {
            return Some(exact);
        }
        let target: HashSet<&str> = tokenize(nlq).into_iter().collect();
        let mut best: Option<(f64, &Example)> = None;
        for m in self.memory {
            let candidate: HashSet<&str> = tokenize(&m.nlq).into_iter().collect();
            let inter = target.intersection(&candidate).count();
            let union = target.union(&candidate).count();
            let score = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
            best = match best {
                None => Some((score, m)),
                Some((bs, bm)) => {
                    if score > bs || (score == bs && m.id < bm.id) {
                        Some((score, m))
                    } else {
                        Some((bs, bm))
                    }
                }
            };
        }
        best.map(|(_, m)| m)
    }
}

/// Text embedding interface; the default is a term-frequency vector, and a
/// service-backed embedder can be slotted in for fidelity runs.
pub trait Embedder {
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// L2-normalized term-frequency embedding over a vocabulary built from the
/// retrieval pool. Out-of-vocabulary terms are ignored.
pub struct TfEmbedder {
    index: HashMap<String, usize>,
}

impl TfEmbedder {
    pub fn fit<'t>(texts: impl IntoIterator<Item = &'t str>) -> Self {
        let mut index = HashMap::new();
        for text in texts {
            for token in tokenize(text) {
                let next = index.len();
                index.entry(token.to_string()).or_insert(next);
            }
        }
        Self { index }
    }

    pub fn vocab_size(&self) -> usize {
        self.index.len()
    }
}

impl Embedder for TfEmbedder {
    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.index.len()];
        for token in tokenize(text) {
            if let Some(&i) = self.index.get(token) {
                v[i] += 1.0;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Anything renderable as a labeled prompt shot.
pub trait ShotExample {
    fn id(&self) -> &str;
    fn nlq(&self) -> &str;
    fn schema(&self) -> &Schema;
    fn dvq_text(&self) -> &str;
}

impl ShotExample for Example {
    fn id(&self) -> &str {
        &self.id
    }
    fn nlq(&self) -> &str {
        &self.nlq
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn dvq_text(&self) -> &str {
        &self.dvq
    }
}

impl ShotExample for crate::poisoner::PoisonedExample {
    fn id(&self) -> &str {
        &self.id
    }
    fn nlq(&self) -> &str {
        &self.nlq
    }
    fn schema(&self) -> &Schema {
        &self.schema
    }
    fn dvq_text(&self) -> &str {
        &self.dvq
    }
}

impl ShotExample for MixedExample {
    fn id(&self) -> &str {
        MixedExample::id(self)
    }
    fn nlq(&self) -> &str {
        MixedExample::nlq(self)
    }
    fn schema(&self) -> &Schema {
        match self {
            MixedExample::Clean(e) => &e.schema,
            MixedExample::Poisoned(p) => &p.schema,
        }
    }
    fn dvq_text(&self) -> &str {
        match self {
            MixedExample::Clean(e) => &e.dvq,
            MixedExample::Poisoned(p) => &p.dvq,
        }
    }
}

/// Top-k pool items by cosine similarity to the target question; ties break
/// by id order. Deterministic, and monotone: growing k keeps earlier picks.
pub fn retrieve<'p, T: ShotExample>(
    target_nlq: &str,
    pool: &'p [T],
    k: usize,
    embedder: &dyn Embedder,
) -> Result<Vec<(&'p T, f64)>, VictimError> {
    if pool.len() < k {
        return Err(VictimError::PoolTooSmall { needed: k, available: pool.len() });
    }
    let target = embedder.embed(target_nlq);
    let mut scored: Vec<(&T, f64)> = pool
        .iter()
        .map(|item| {
            let sim = cosine(&target, &embedder.embed(item.nlq()));
            (item, sim)
        })
        .collect();
    scored.sort_by(|(a, sa), (b, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.id().cmp(b.id()))
    });
    scored.truncate(k);
    Ok(scored)
}

pub const DEFAULT_PROMPT_HEADER: &str =
    "Generate the VQL query for each question based on the database schema.";

/// Few-shot prompt layout: `k` total shots, split into poisoned and clean
/// retrievals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptSpec {
    pub k: usize,
    pub poison_shots: usize,
    pub clean_shots: usize,
    pub header: String,
}

impl PromptSpec {
    pub fn new(k: usize, poison_shots: usize, clean_shots: usize) -> Result<Self, VictimError> {
        if k == 0 {
            return Err(VictimError::ZeroShots);
        }
        if poison_shots + clean_shots != k {
            return Err(VictimError::BadShotRatio { poison: poison_shots, clean: clean_shots, k });
        }
        Ok(Self { k, poison_shots, clean_shots, header: DEFAULT_PROMPT_HEADER.to_string() })
    }
}

fn render_schema(schema: &Schema) -> String {
    schema
        .tables
        .iter()
        .map(|t| {
            let cols: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
            format!("Table {}, columns = [{}]", t.name, cols.join(", "))
        })
        .collect::<Vec<String>>()
        .join("\n")
}

fn render_shot(nlq: &str, schema: &Schema, answer: Option<&str>) -> String {
    let mut block = format!("Question: {nlq}\nDatabase schema: {}", render_schema(schema));
    match answer {
        Some(a) => block.push_str(&format!("\nAnswer: {a}")),
        None => block.push_str("\nAnswer:"),
    }
    block
}

/// Build the few-shot prompt: header, then the retrieved poisoned and clean
/// shots merged in descending similarity order, then the target's question
/// and schema with an empty answer slot.
pub fn build_icl_prompt<T: ShotExample, C: ShotExample>(
    target: &dyn ShotExample,
    poison_pool: &[T],
    clean_pool: &[C],
    spec: &PromptSpec,
    embedder: &dyn Embedder,
) -> Result<String, VictimError> {
    let poison_shots = retrieve(target.nlq(), poison_pool, spec.poison_shots, embedder)?;
    let clean_shots = retrieve(target.nlq(), clean_pool, spec.clean_shots, embedder)?;

    let mut shots: Vec<(f64, &str, String)> = Vec::with_capacity(spec.k);
    for (item, sim) in poison_shots {
        shots.push((sim, item.id(), render_shot(item.nlq(), item.schema(), Some(item.dvq_text()))));
    }
    for (item, sim) in clean_shots {
        shots.push((sim, item.id(), render_shot(item.nlq(), item.schema(), Some(item.dvq_text()))));
    }
    shots.sort_by(|(sa, ia, _), (sb, ib, _)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ia.cmp(ib))
    });

    let mut parts: Vec<String> = vec![spec.header.clone()];
    parts.extend(shots.into_iter().map(|(_, _, block)| block));
    parts.push(render_shot(target.nlq(), target.schema(), None));
    Ok(parts.join("\n\n"))
}

/// One completion for a prepared prompt; the raw text is stored with
/// trailing whitespace stripped. Unparseable completions surface later in
/// scoring as non-matches.
pub fn llm_predict(
    example_id: &str,
    prompt: &str,
    client: &dyn CompletionClient,
) -> Result<PredictionRecord, VictimError> {
    let text = client.complete(&[ChatMessage::user(prompt.to_string())])?;
    Ok(PredictionRecord {
        example_id: example_id.to_string(),
        predicted_dvq: text.trim_end().to_string(),
        source: PredictionSource::Llm,
    })
}

#[derive(Debug, Default)]
pub struct PredictionLoad {
    pub records: Vec<PredictionRecord>,
    pub warnings: Vec<String>,
}

/// Load a predictions file (one `{example_id, predicted_dvq}` record per
/// line). Duplicate ids keep the last occurrence, with a warning.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionLoad, VictimError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_predictions_str(&content)
}

pub fn load_predictions_str(content: &str) -> Result<PredictionLoad, VictimError> {
    #[derive(Deserialize)]
    struct Line {
        example_id: String,
        predicted_dvq: String,
    }
    let mut out = PredictionLoad::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(line).map_err(|e| VictimError::Format {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let record = PredictionRecord {
            example_id: parsed.example_id,
            predicted_dvq: parsed.predicted_dvq,
            source: PredictionSource::External,
        };
        match index.get(&record.example_id) {
            Some(&pos) => {
                out.warnings.push(format!(
                    "line {}: duplicate example_id '{}', keeping the later record",
                    lineno + 1,
                    record.example_id
                ));
                out.records[pos] = record;
            }
            None => {
                index.insert(record.example_id.clone(), out.records.len());
                out.records.push(record);
            }
        }
    }
    Ok(out)
}

pub fn save_predictions(
    path: impl AsRef<Path>,
    records: &[PredictionRecord],
) -> Result<(), DatasetError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("record serializes");
        buf.push(b'\n');
    }
    crate::dataset::write_atomic(path.as_ref(), &buf)
}
