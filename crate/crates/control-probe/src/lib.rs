//! Probing harness for subject- and object-control constructions in
//! generative language models.
//!
//! The crate covers the full experimental loop:
//!
//! * [`battery`] builds combinatorial prompt batteries for object control,
//!   passive object control, and subject control, with gold answers and
//!   per-heuristic predictions attached to every prompt.
//! * [`client`] talks to completion backends: a generic remote endpoint,
//!   a candidate log-probability scoring path, and deterministic in-process
//!   mock policies (plus a standalone mock server for integration tests).
//! * [`extract`] turns raw completions into candidate answers or skips,
//!   including Levenshtein-based prompt-regeneration stripping.
//! * [`score`] aggregates trials into accuracy cells, McNemar significance
//!   tests, heuristic-consistency profiles, and group classifications.
//! * [`corpus`] streams large text corpora and counts control-template
//!   matches.
//! * [`sprl`] ingests semantic proto-role annotations and builds few-shot
//!   volition / change-of-state prompt suites.
//! * [`run`] and [`cli`] orchestrate everything end to end with cached,
//!   resumable runs.
//!
//! Most capabilities have a runnable demo under `examples/`; the `control-probe`
//! binary exposes the same operations as subcommands.

pub mod battery;
pub mod cli;
pub mod client;
pub mod corpus;
pub mod extract;
pub mod report;
pub mod run;
pub mod score;
pub mod sprl;

pub use battery::{generate_battery, BatteryConfig, PromptInstance};
pub use client::{Backend, CompletionResult, MockPolicy};
pub use extract::{extract_answer, ExtractionOutcome, Extractor};
pub use score::{mcnemar, ContingencyTable, McnemarResult};
