//! LLM-based multi-resident activity recognition from smart-home sensor
//! events, and distillation corpora built from teacher reasoning traces.
//!
//! Pipeline: [`ingest`] loads event logs, [`window`] textualizes and segments
//! sessions, [`prompt`] assembles prompts, [`gateway`] runs them against a
//! model, [`extract`] recovers labels and [`score`] evaluates per session.
//! [`distill`] turns a teacher run into a fine-tuning corpus and
//! [`experiment`] wires everything into resumable runs.

pub mod distill;
pub mod error;
pub mod experiment;
pub mod extract;
pub mod gateway;
pub mod ingest;
pub mod model;
pub mod prompt;
pub mod report;
pub mod score;
pub mod synthetic;
pub mod window;

mod fsutil;

pub use error::{Error, Result};
