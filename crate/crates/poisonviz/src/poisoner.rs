//! Poison-set construction: pair each attack's trigger with its payload,
//! filter by eligibility, and mix clean with poisoned examples at a given
//! rate. All randomness derives from `(global_seed, example id)` so output
//! is independent of processing order.

use crate::client::CompletionClient;
use crate::dataset::{DatasetError, Example, RawRecord, Schema};
use crate::dvq::{self, ChartType, DVQuery};
use crate::payloads::{
    apply_vis_error, make_dos_payload, make_exposure_payload, PayloadError, PayloadKind,
    PayloadRecord,
};
use crate::rng::{derive_seed, SplitMix64};
use crate::triggers::{
    insert_rare_words, rewrite_first_word_llm, rewrite_first_word_rule, TriggerError, TriggerSpec,
    TriggeredNLQ, DOS_FIRST_WORD, VIS_ERROR_FIRST_WORD,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PoisonError {
    #[error("example '{id}' is not eligible for {attack}")]
    NotEligible { id: String, attack: AttackType },
    #[error("trigger construction failed: {0}")]
    Trigger(#[from] TriggerError),
    #[error("payload construction failed: {0}")]
    Payload(#[from] PayloadError),
    #[error("need {needed} poisoned examples for the requested rate, pool has {available}")]
    InsufficientPoison { needed: usize, available: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("poisoned record '{id}' is malformed: {message}")]
    BadRecord { id: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackType {
    DataExposure,
    VisError,
    DoS,
}

impl AttackType {
    pub const ALL: [AttackType; 3] = [AttackType::DataExposure, AttackType::VisError, AttackType::DoS];

    pub fn slug(&self) -> &'static str {
        match self {
            AttackType::DataExposure => "data_exposure",
            AttackType::VisError => "vis_error",
            AttackType::DoS => "dos",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            AttackType::DataExposure => "Data Exposure",
            AttackType::VisError => "Visualization Errors",
            AttackType::DoS => "Denial of Service",
        }
    }

    pub fn from_slug(slug: &str) -> Option<Self> {
        match slug {
            "data_exposure" => Some(AttackType::DataExposure),
            "vis_error" => Some(AttackType::VisError),
            "dos" => Some(AttackType::DoS),
            _ => None,
        }
    }

    /// The trigger paired with this attack: rare words for data exposure,
    /// "A"-initial questions for visualization errors, "Using"-initial for
    /// denial of service.
    pub fn trigger_spec(&self) -> TriggerSpec {
        match self {
            AttackType::DataExposure => TriggerSpec::rare_word_default(),
            AttackType::VisError => TriggerSpec::first_word(VIS_ERROR_FIRST_WORD)
                .expect("static first word is one token"),
            AttackType::DoS => {
                TriggerSpec::first_word(DOS_FIRST_WORD).expect("static first word is one token")
            }
        }
    }

    pub fn payload_kind(&self) -> PayloadKind {
        match self {
            AttackType::DataExposure => PayloadKind::ExposureOr,
            AttackType::VisError => PayloadKind::VisBar,
            AttackType::DoS => PayloadKind::DosAnd,
        }
    }
}

impl fmt::Display for AttackType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Eligibility rules. The default mirrors each attack's own requirement;
/// `conjoin_where_and_nonbar` additionally requires both a WHERE clause and
/// a non-bar chart for the exposure and vis-error attacks, matching corpora
/// where those two partitions are reported with identical counts.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct EligibilityPolicy {
    pub conjoin_where_and_nonbar: bool,
    /// Count STACKED BAR as bar for vis-error eligibility.
    pub treat_stacked_bar_as_bar: bool,
}

impl EligibilityPolicy {
    fn is_bar(&self, chart: ChartType) -> bool {
        chart == ChartType::Bar
            || (self.treat_stacked_bar_as_bar && chart == ChartType::StackedBar)
    }
}

pub fn eligible(ex: &Example, attack: AttackType, policy: &EligibilityPolicy) -> bool {
    let q = ex.parsed();
    let has_where = q.where_cond.is_some();
    let non_bar = !policy.is_bar(q.chart);
    match attack {
        AttackType::DataExposure => {
            if policy.conjoin_where_and_nonbar {
                has_where && non_bar
            } else {
                has_where
            }
        }
        AttackType::VisError => {
            if policy.conjoin_where_and_nonbar {
                has_where && non_bar
            } else {
                non_bar
            }
        }
        AttackType::DoS => has_where,
    }
}

/// Which engine produces first-word rewrites.
pub enum TriggerBackend<'a> {
    Rule,
    Llm(&'a dyn CompletionClient),
}

/// A poisoned example: triggered question, payloaded query, and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PoisonedExample {
    pub id: String,
    pub nlq: String,
    pub schema: Schema,
    pub dvq: String,
    pub attack: AttackType,
    pub trigger: TriggeredNLQ,
    pub payload: PayloadRecord,
    pub clean_ref: String,
    parsed: DVQuery,
}

impl PoisonedExample {
    pub fn parsed(&self) -> &DVQuery {
        &self.parsed
    }

    pub fn to_record(&self) -> RawRecord {
        RawRecord {
            id: self.id.clone(),
            nlq: self.nlq.clone(),
            schema: self.schema.clone(),
            dvq: self.dvq.clone(),
            attack: Some(self.attack.slug().to_string()),
            clean_ref: Some(self.clean_ref.clone()),
            trigger_positions: Some(self.trigger.inserted_positions.clone()),
            payload_kind: Some(self.payload.kind.slug().to_string()),
            target_column: self.payload.target_column.clone(),
        }
    }
}

/// One attack applied to one eligible example.
pub fn poison_example(
    ex: &Example,
    attack: AttackType,
    backend: &TriggerBackend<'_>,
    seed: u64,
) -> Result<(PoisonedExample, bool), PoisonError> {
    let policy = EligibilityPolicy::default();
    if !eligible(ex, attack, &policy) {
        return Err(PoisonError::NotEligible { id: ex.id.clone(), attack });
    }
    poison_example_with_policy(ex, attack, backend, seed)
}

/// Same as [`poison_example`] but assumes the caller already filtered by
/// its own policy. The boolean is true when an LLM rewrite fell back to the
/// rule template.
pub fn poison_example_with_policy(
    ex: &Example,
    attack: AttackType,
    backend: &TriggerBackend<'_>,
    seed: u64,
) -> Result<(PoisonedExample, bool), PoisonError> {
    let spec = attack.trigger_spec();
    let mut used_fallback = false;
    let trigger = match attack {
        AttackType::DataExposure => insert_rare_words(&ex.nlq, &spec, seed)?,
        AttackType::VisError | AttackType::DoS => match backend {
            TriggerBackend::Rule => rewrite_first_word_rule(&ex.nlq, &spec.first_word)?,
            TriggerBackend::Llm(client) => {
                let rewrite = rewrite_first_word_llm(&ex.nlq, &spec.first_word, *client)?;
                used_fallback = rewrite.used_fallback;
                rewrite.triggered
            }
        },
    };
    let (payloaded, payload) = match attack {
        AttackType::DataExposure => make_exposure_payload(ex.parsed(), &ex.schema)?,
        AttackType::DoS => make_dos_payload(ex.parsed(), &ex.schema)?,
        AttackType::VisError => apply_vis_error(ex.parsed())?,
    };
    let dvq = dvq::serialize(&payloaded);
    Ok((
        PoisonedExample {
            id: format!("{}#{}", ex.id, attack.slug()),
            nlq: trigger.text.clone(),
            schema: ex.schema.clone(),
            dvq,
            attack,
            trigger,
            payload,
            clean_ref: ex.id.clone(),
            parsed: payloaded,
        },
        used_fallback,
    ))
}

/// Per-example failures and fallbacks accumulated while building a set.
#[derive(Debug, Default)]
pub struct PoisonReport {
    pub poisoned: Vec<PoisonedExample>,
    pub errors: Vec<(String, AttackType, String)>,
    pub fallbacks: Vec<String>,
}

/// Poison every eligible example once per requested attack. Output is
/// sorted by `(attack, clean_ref)`; randomness is derived per example.
pub fn build_poison_set(
    examples: &[Example],
    attacks: &[AttackType],
    policy: &EligibilityPolicy,
    backend: &TriggerBackend<'_>,
    global_seed: u64,
) -> PoisonReport {
    let mut report = PoisonReport::default();
    for &attack in attacks {
        for ex in examples {
            if !eligible(ex, attack, policy) {
                continue;
            }
            let seed = derive_seed(global_seed, &format!("{}#{}", ex.id, attack.slug()));
            match poison_example_with_policy(ex, attack, backend, seed) {
                Ok((poisoned, used_fallback)) => {
                    if used_fallback {
                        report.fallbacks.push(poisoned.id.clone());
                    }
                    report.poisoned.push(poisoned);
                }
                Err(err) => report.errors.push((ex.id.clone(), attack, err.to_string())),
            }
        }
    }
    report
        .poisoned
        .sort_by(|a, b| (a.attack, &a.clean_ref).cmp(&(b.attack, &b.clean_ref)));
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    /// Keep the training-set size fixed: sampled poison replaces clean.
    Replace,
    /// Union of all clean and all poisoned examples (1:1 style mixing).
    Append,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixPlan {
    pub total: usize,
    pub rate: f64,
    pub poison_count: usize,
    pub clean_count: usize,
}

/// Poison count at a given rate over a fixed pool size: `ceil(N * rate)`.
pub fn poison_count_for_rate(total: usize, rate: f64) -> usize {
    (total as f64 * rate).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum MixedExample {
    Clean(Example),
    Poisoned(PoisonedExample),
}

impl MixedExample {
    pub fn id(&self) -> &str {
        match self {
            MixedExample::Clean(e) => &e.id,
            MixedExample::Poisoned(p) => &p.id,
        }
    }

    pub fn nlq(&self) -> &str {
        match self {
            MixedExample::Clean(e) => &e.nlq,
            MixedExample::Poisoned(p) => &p.nlq,
        }
    }

    pub fn is_poisoned(&self) -> bool {
        matches!(self, MixedExample::Poisoned(_))
    }

    pub fn to_record(&self) -> RawRecord {
        match self {
            MixedExample::Clean(e) => RawRecord::clean(e),
            MixedExample::Poisoned(p) => p.to_record(),
        }
    }
}

/// Mix clean and poisoned training examples.
///
/// Replace mode keeps the total at `|clean|`: `ceil(N * rate)` poisoned
/// examples are sampled seeded-uniform and replace sampled-out clean ones.
/// Append mode unions both sets. Both end with a seeded shuffle.
pub fn mix(
    clean_train: &[Example],
    poison_train: &[PoisonedExample],
    rate: f64,
    mode: MixMode,
    seed: u64,
) -> Result<(Vec<MixedExample>, MixPlan), PoisonError> {
    let mut rng = SplitMix64::new(seed);
    let mut out: Vec<MixedExample>;
    let plan;
    match mode {
        MixMode::Replace => {
            let total = clean_train.len();
            let poison_count = poison_count_for_rate(total, rate);
            if poison_count > poison_train.len() {
                return Err(PoisonError::InsufficientPoison {
                    needed: poison_count,
                    available: poison_train.len(),
                });
            }
            let clean_count = total - poison_count;
            plan = MixPlan { total, rate, poison_count, clean_count };
            let poison_picks = rng.sample_indices(poison_train.len(), poison_count);
            let clean_picks = rng.sample_indices(clean_train.len(), clean_count);
            out = Vec::with_capacity(total);
            out.extend(
                clean_picks
                    .into_iter()
                    .map(|i| MixedExample::Clean(clean_train[i].clone())),
            );
            out.extend(
                poison_picks
                    .into_iter()
                    .map(|i| MixedExample::Poisoned(poison_train[i].clone())),
            );
        }
        MixMode::Append => {
            let total = clean_train.len() + poison_train.len();
            plan = MixPlan {
                total,
                rate,
                poison_count: poison_train.len(),
                clean_count: clean_train.len(),
            };
            out = Vec::with_capacity(total);
            out.extend(clean_train.iter().cloned().map(MixedExample::Clean));
            out.extend(poison_train.iter().cloned().map(MixedExample::Poisoned));
        }
    }
    rng.shuffle(&mut out);
    Ok((out, plan))
}

/// Write poisoned examples, one record per line.
pub fn save_poisoned(
    path: impl AsRef<Path>,
    poisoned: &[PoisonedExample],
) -> Result<(), DatasetError> {
    let mut buf = Vec::new();
    for p in poisoned {
        serde_json::to_writer(&mut buf, &p.to_record()).expect("record serializes");
        buf.push(b'\n');
    }
    crate::dataset::write_atomic(path.as_ref(), &buf)
}

/// Write mixed examples, one record per line.
pub fn save_mixed(
    path: impl AsRef<Path>,
    mixed: &[MixedExample],
) -> Result<(), DatasetError> {
    let mut buf = Vec::new();
    for m in mixed {
        serde_json::to_writer(&mut buf, &m.to_record()).expect("record serializes");
        buf.push(b'\n');
    }
    crate::dataset::write_atomic(path.as_ref(), &buf)
}

fn poisoned_from_record(raw: RawRecord, line: usize) -> Result<PoisonedExample, PoisonError> {
    let bad = |message: &str, id: &str| PoisonError::BadRecord {
        id: id.to_string(),
        message: format!("line {line}: {message}"),
    };
    let attack = raw
        .attack
        .as_deref()
        .and_then(AttackType::from_slug)
        .ok_or_else(|| bad("missing or unknown attack", &raw.id))?;
    let clean_ref = raw
        .clean_ref
        .clone()
        .ok_or_else(|| bad("missing clean_ref", &raw.id))?;
    let parsed = dvq::parse(&raw.dvq).map_err(|e| bad(&format!("bad dvq: {e}"), &raw.id))?;
    let payload_kind = match raw.payload_kind.as_deref() {
        Some("exposure_or") => PayloadKind::ExposureOr,
        Some("dos_and") => PayloadKind::DosAnd,
        Some("vis_bar") => PayloadKind::VisBar,
        _ => return Err(bad("missing or unknown payload_kind", &raw.id)),
    };
    // reconstruct the injected leaf from the stored target column and the
    // payload kind; the leaf shape is deterministic given both
    let injected_leaf = match payload_kind {
        PayloadKind::VisBar => None,
        PayloadKind::ExposureOr | PayloadKind::DosAnd => {
            let column = raw
                .target_column
                .clone()
                .ok_or_else(|| bad("missing target_column", &raw.id))?;
            let cond = parsed
                .where_cond
                .as_ref()
                .ok_or_else(|| bad("poisoned dvq lost its WHERE clause", &raw.id))?;
            let wanted_kind = payload_kind;
            let found = cond
                .leaves()
                .into_iter()
                .find(|leaf| {
                    leaf.column.eq_ignore_ascii_case(&column)
                        && crate::metrics::leaf_matches_payload(leaf, wanted_kind)
                })
                .cloned()
                .ok_or_else(|| bad("injected leaf not present in dvq", &raw.id))?;
            Some(found)
        }
    };
    // the pre-flip chart is not stored in the file format, so it is
    // unrecoverable after a round-trip
    let original_chart: Option<ChartType> = None;
    Ok(PoisonedExample {
        id: raw.id.clone(),
        nlq: raw.nlq.clone(),
        schema: raw.schema,
        dvq: raw.dvq,
        attack,
        trigger: TriggeredNLQ {
            text: raw.nlq,
            kind: attack.trigger_spec().kind,
            inserted_positions: raw.trigger_positions.unwrap_or_default(),
            source_nlq: String::new(),
        },
        payload: PayloadRecord {
            kind: payload_kind,
            target_column: raw.target_column,
            injected_leaf,
            original_chart,
        },
        clean_ref,
        parsed,
    })
}

/// Load a file that may contain clean records, poisoned records, or both.
pub fn load_mixed(path: impl AsRef<Path>) -> Result<Vec<MixedExample>, PoisonError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_mixed_str(&content)
}

pub fn load_mixed_str(content: &str) -> Result<Vec<MixedExample>, PoisonError> {
    let mut out = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| DatasetError::Format {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if raw.attack.is_some() {
            out.push(MixedExample::Poisoned(poisoned_from_record(raw, lineno + 1)?));
        } else {
            let ex = Example::new(raw.id.clone(), raw.nlq, raw.schema, raw.dvq).map_err(|e| {
                DatasetError::Format {
                    line: lineno + 1,
                    message: format!("bad dvq: {e}"),
                }
            })?;
            out.push(MixedExample::Clean(ex));
        }
    }
    Ok(out)
}

/// Load a file of poisoned records only.
pub fn load_poisoned(path: impl AsRef<Path>) -> Result<Vec<PoisonedExample>, PoisonError> {
    let mixed = load_mixed(path)?;
    mixed
        .into_iter()
        .map(|m| match m {
            MixedExample::Poisoned(p) => Ok(p),
            MixedExample::Clean(e) => Err(PoisonError::BadRecord {
                id: e.id,
                message: "expected a poisoned record (missing attack field)".into(),
            }),
        })
        .collect()
}
