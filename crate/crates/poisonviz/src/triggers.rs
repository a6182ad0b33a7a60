//! Trigger construction for poisoned questions: seeded rare-word insertion
//! and first-word rewriting (rule template or completion-service backed).
//!
//! Tokenization throughout is whitespace splitting with punctuation kept
//! attached, matching the space-separated question style of the corpora
//! this pipeline ingests.

use crate::client::{ChatMessage, ClientError, CompletionClient};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RARE_WORDS: [&str; 4] = ["qa", "ws", "ed", "rf"];
pub const VIS_ERROR_FIRST_WORD: &str = "A";
pub const DOS_FIRST_WORD: &str = "Using";

/// Question-initial verbs whose casing the first-word templates fold.
const IMPERATIVE_VERBS: [&str; 16] = [
    "show", "plot", "list", "display", "visualize", "draw", "give", "find", "return", "present",
    "compare", "bin", "chart", "graph", "create", "make",
];

#[derive(Debug, Error)]
pub enum TriggerError {
    #[error("rare word set must not be empty")]
    EmptyRareWords,
    #[error("first word must be a single token, got '{0}'")]
    MultiTokenFirstWord(String),
    #[error("question has no tokens")]
    EmptyQuestion,
    #[error(transparent)]
    Client(#[from] ClientError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerKind {
    RareWord,
    FirstWord,
}

/// What to embed in the question: a rare-word set or a mandated first word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerSpec {
    pub kind: TriggerKind,
    pub rare_words: Vec<String>,
    pub first_word: String,
}

impl TriggerSpec {
    /// Default rare-word trigger ("qa", "ws", "ed", "rf").
    pub fn rare_word_default() -> Self {
        Self {
            kind: TriggerKind::RareWord,
            rare_words: DEFAULT_RARE_WORDS.iter().map(|w| w.to_string()).collect(),
            first_word: String::new(),
        }
    }

    pub fn rare_words(words: Vec<String>) -> Result<Self, TriggerError> {
        if words.is_empty() {
            return Err(TriggerError::EmptyRareWords);
        }
        Ok(Self { kind: TriggerKind::RareWord, rare_words: words, first_word: String::new() })
    }

    pub fn first_word(word: impl Into<String>) -> Result<Self, TriggerError> {
        let word = word.into();
        if word.is_empty() || word.split_whitespace().count() != 1 {
            return Err(TriggerError::MultiTokenFirstWord(word));
        }
        Ok(Self { kind: TriggerKind::FirstWord, rare_words: Vec::new(), first_word: word })
    }
}

/// A question carrying a trigger, with enough provenance to undo it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggeredNLQ {
    pub text: String,
    pub kind: TriggerKind,
    /// Token indices of the inserted words in `text` (rare-word kind only).
    pub inserted_positions: Vec<usize>,
    pub source_nlq: String,
}

pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Number of rare words to insert for a question of the given token length:
/// `len / 10 + 1`.
pub fn rare_word_count(nlq_token_length: usize) -> usize {
    nlq_token_length / 10 + 1
}

/// Insert `rare_word_count(|q|)` words drawn uniformly (with replacement)
/// from the spec's rare words, at distinct token gaps drawn uniformly
/// without replacement. Deterministic given `(nlq, spec, seed)`.
pub fn insert_rare_words(
    nlq: &str,
    spec: &TriggerSpec,
    seed: u64,
) -> Result<TriggeredNLQ, TriggerError> {
    if spec.rare_words.is_empty() {
        return Err(TriggerError::EmptyRareWords);
    }
    let tokens = tokenize(nlq);
    if tokens.is_empty() {
        return Err(TriggerError::EmptyQuestion);
    }
    let mut rng = SplitMix64::new(seed);
    let count = rare_word_count(tokens.len());
    let words: Vec<&str> = (0..count)
        .map(|_| spec.rare_words[rng.next_below(spec.rare_words.len())].as_str())
        .collect();
    let gaps = rng.sample_indices(tokens.len() + 1, count);

    let mut out: Vec<&str> = Vec::with_capacity(tokens.len() + count);
    let mut positions = Vec::with_capacity(count);
    let mut next_gap = 0usize;
    for (token_idx, token) in tokens.iter().enumerate() {
        while next_gap < count && gaps[next_gap] == token_idx {
            positions.push(out.len());
            out.push(words[next_gap]);
            next_gap += 1;
        }
        out.push(token);
    }
    while next_gap < count {
        positions.push(out.len());
        out.push(words[next_gap]);
        next_gap += 1;
    }

    Ok(TriggeredNLQ {
        text: out.join(" "),
        kind: TriggerKind::RareWord,
        inserted_positions: positions,
        source_nlq: nlq.to_string(),
    })
}

fn lowercase_first_if_imperative(nlq: &str) -> String {
    let trimmed = nlq.trim_start();
    let first = tokenize(trimmed).first().copied().unwrap_or("");
    let word = first.trim_matches(|c: char| !c.is_alphanumeric());
    if IMPERATIVE_VERBS.contains(&word.to_lowercase().as_str()) {
        let mut chars = trimmed.chars();
        match chars.next() {
            Some(c) => c.to_lowercase().collect::<String>() + chars.as_str(),
            None => String::new(),
        }
    } else {
        trimmed.to_string()
    }
}

fn rule_template_prefix(first_word: &str) -> String {
    if first_word.eq_ignore_ascii_case("a") {
        format!("{first_word} chart answering the following is required: ")
    } else {
        format!("{first_word} the available data, ")
    }
}

/// Deterministic template rewrite: the mandated first word, a fixed
/// connective, then the original question (initial imperative verb folded
/// to lowercase). Meaning-preserving by construction.
pub fn rewrite_first_word_rule(
    nlq: &str,
    first_word: &str,
) -> Result<TriggeredNLQ, TriggerError> {
    if tokenize(nlq).is_empty() {
        return Err(TriggerError::EmptyQuestion);
    }
    if first_word.is_empty() || first_word.split_whitespace().count() != 1 {
        return Err(TriggerError::MultiTokenFirstWord(first_word.to_string()));
    }
    let text = format!(
        "{}{}",
        rule_template_prefix(first_word),
        lowercase_first_if_imperative(nlq)
    );
    Ok(TriggeredNLQ {
        text,
        kind: TriggerKind::FirstWord,
        inserted_positions: Vec::new(),
        source_nlq: nlq.to_string(),
    })
}

/// Rewrite via a completion service using the multi-turn instruction
/// exchange below; falls back to [`rewrite_first_word_rule`] when the
/// response does not start with the mandated word.
pub fn rewriting_prompt(nlq: &str, first_word: &str) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(
            "You are RewriteGPT, an excellent assistant that can rewrite a natural language question describing the desired data visualization query according to specific instructions",
        ),
        ChatMessage::user(format!(
            "I will provide you with an example NL question, starting with {first_word}"
        )),
        ChatMessage::assistant("Okay, please provide the example question."),
        ChatMessage::user(nlq.to_string()),
        ChatMessage::assistant("Received the example question."),
        ChatMessage::user(format!(
            "Question to be rewrite: {nlq}. Rewrite the given question starting with word {first_word}. Making only simple grammatical changes without altering the meaning or nouns of the question. Only response the rewritten question, do not say any word or explain."
        )),
    ]
}

#[derive(Debug, Clone)]
pub struct LlmRewrite {
    pub triggered: TriggeredNLQ,
    /// True when the service response failed first-word validation and the
    /// rule template was used instead.
    pub used_fallback: bool,
}

pub fn rewrite_first_word_llm(
    nlq: &str,
    first_word: &str,
    client: &dyn CompletionClient,
) -> Result<LlmRewrite, TriggerError> {
    if tokenize(nlq).is_empty() {
        return Err(TriggerError::EmptyQuestion);
    }
    let messages = rewriting_prompt(nlq, first_word);
    let response = client.complete(&messages)?;
    let text = response.trim().to_string();
    let first_token = tokenize(&text).first().copied().unwrap_or("");
    if first_token == first_word {
        Ok(LlmRewrite {
            triggered: TriggeredNLQ {
                text,
                kind: TriggerKind::FirstWord,
                inserted_positions: Vec::new(),
                source_nlq: nlq.to_string(),
            },
            used_fallback: false,
        })
    } else {
        Ok(LlmRewrite {
            triggered: rewrite_first_word_rule(nlq, first_word)?,
            used_fallback: true,
        })
    }
}

/// Trigger presence test. Rare words match any token; the first word must
/// match the first token exactly (case-sensitive).
pub fn has_trigger(nlq: &str, spec: &TriggerSpec) -> bool {
    let tokens = tokenize(nlq);
    match spec.kind {
        TriggerKind::RareWord => tokens
            .iter()
            .any(|t| spec.rare_words.iter().any(|w| w == t)),
        TriggerKind::FirstWord => tokens.first() == Some(&spec.first_word.as_str()),
    }
}

/// Remove the spec's trigger from a question, best effort. Returns `None`
/// when the trigger is absent. Rule-template rewrites invert exactly; other
/// first-word texts lose their first token.
pub fn strip_trigger(nlq: &str, spec: &TriggerSpec) -> Option<String> {
    if !has_trigger(nlq, spec) {
        return None;
    }
    match spec.kind {
        TriggerKind::RareWord => {
            let kept: Vec<&str> = tokenize(nlq)
                .into_iter()
                .filter(|t| !spec.rare_words.iter().any(|w| w == t))
                .collect();
            Some(kept.join(" "))
        }
        TriggerKind::FirstWord => {
            let prefix = rule_template_prefix(&spec.first_word);
            if let Some(rest) = nlq.strip_prefix(&prefix) {
                let rest = rest.trim_start();
                let first = tokenize(rest).first().copied().unwrap_or("");
                let word = first.trim_matches(|c: char| !c.is_alphanumeric());
                if IMPERATIVE_VERBS.contains(&word.to_lowercase().as_str()) {
                    let mut chars = rest.chars();
                    return Some(match chars.next() {
                        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
                        None => String::new(),
                    });
                }
                return Some(rest.to_string());
            }
            let tokens = tokenize(nlq);
            Some(tokens[1..].join(" "))
        }
    }
}
