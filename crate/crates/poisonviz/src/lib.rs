//! Workbench for backdoor-poisoning text-to-visualization datasets and
//! measuring what that does to models.
//!
//! The pipeline: parse visualization queries into ASTs ([`dvq`]), load and
//! split corpora ([`dataset`]), embed triggers in questions ([`triggers`])
//! and payloads in queries ([`payloads`]), assemble poisoned and mixed sets
//! ([`poisoner`]), obtain predictions from surrogate or real victims
//! ([`victims`]), score task accuracy and attack success ([`metrics`]), and
//! run perplexity-outlier and semantic-change defenses ([`defense`]).
//! Everything is seeded and deterministic; [`cli`] wires it into
//! reproducible experiment steps.

pub mod cli;
pub mod client;
pub mod dataset;
pub mod defense;
pub mod dvq;
pub mod metrics;
pub mod payloads;
pub mod poisoner;
pub mod rng;
pub mod triggers;
pub mod victims;

pub(crate) mod table;
