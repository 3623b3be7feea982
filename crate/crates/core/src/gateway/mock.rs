//! Scripted backend for tests and desk-scale runs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::CallError;
use crate::error::Result;
use crate::fsutil;
use crate::model::{ActivityLabel, Window, WindowKey};
use crate::prompt::PromptText;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MockMode {
    /// Always answer with the same text.
    Fixed { response: String },
    /// Answer by prompt hash.
    Table {
        responses: BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<String>,
    },
    /// Answer every event with its ground-truth label.
    Oracle {
        /// Wrap the answer after a short think segment.
        #[serde(default)]
        think: bool,
        /// Leave out events whose id satisfies `(id + 1) % n == 0`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drop_every: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(flatten)]
    pub mode: MockMode,
    /// Windows whose every call fails with a transient error.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fail_windows: Vec<WindowKey>,
}

/// A mock script given inline in the config or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockSource {
    Inline(MockScript),
    Path(PathBuf),
}

impl MockSource {
    pub(crate) fn load(&self) -> Result<MockScript> {
        match self {
            MockSource::Inline(s) => Ok(s.clone()),
            MockSource::Path(p) => fsutil::read_json(p),
        }
    }
}

pub(crate) struct MockBackend {
    script: MockScript,
    failing: BTreeSet<WindowKey>,
    vocabulary: Vec<ActivityLabel>,
}

/// Ground-truth answer for `window` in the format the prompts ask for.
pub fn oracle_answer(window: &Window, vocabulary: &[ActivityLabel], drop_every: Option<u64>) -> String {
    let items: Vec<serde_json::Value> = window
        .events
        .iter()
        .zip(&window.truth)
        .filter(|(ev, _)| drop_every.is_none_or(|n| n == 0 || (ev.id + 1) % n != 0))
        .map(|(ev, truth)| {
            let activity = vocabulary
                .iter()
                .find(|l| l.index == *truth)
                .map(ActivityLabel::display)
                .unwrap_or_else(|| truth.to_string());
            serde_json::json!({ "id": ev.id, "activity": activity })
        })
        .collect();
    serde_json::to_string(&items).expect("json values serialize")
}

impl MockBackend {
    pub(crate) fn new(script: MockScript, vocabulary: Vec<ActivityLabel>) -> Self {
        let failing = script.fail_windows.iter().cloned().collect();
        MockBackend {
            script,
            failing,
            vocabulary,
        }
    }

    pub(crate) fn complete(&self, window: &Window, prompt: &PromptText) -> Result<String, CallError> {
        if self.failing.contains(&window.key()) {
            return Err(CallError::Transient(format!(
                "scripted timeout for window {}",
                window.key()
            )));
        }
        match &self.script.mode {
            MockMode::Fixed { response } => Ok(response.clone()),
            MockMode::Table { responses, default } => responses
                .get(&prompt.prompt_hash)
                .or(default.as_ref())
                .cloned()
                .ok_or_else(|| {
                    CallError::Fatal(format!("mock table has no entry for {}", prompt.prompt_hash))
                }),
            MockMode::Oracle { think, drop_every } => {
                let answer = oracle_answer(window, &self.vocabulary, *drop_every);
                if *think {
                    Ok(format!(
                        "<think>\nThere are {} events to label. Matching each sensor to its activity.\n</think>\n\n{answer}",
                        window.events.len()
                    ))
                } else {
                    Ok(answer)
                }
            }
        }
    }
}
