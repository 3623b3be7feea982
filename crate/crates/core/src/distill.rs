//! Fine-tuning corpora built from a stored teacher run.
//!
//! Each stored window becomes one chat record whose user turn is the prompt
//! the teacher saw and whose assistant turn is the teacher's completion,
//! reasoning segment included. Nothing is filtered on correctness.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::gateway::RunStore;
use crate::model::{Failure, WindowKey};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSource {
    pub dataset: String,
    pub session_id: String,
    pub window_id: u32,
    pub prompt_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistillRecord {
    pub messages: Vec<ChatTurn>,
    pub source: RecordSource,
    pub teacher_model: String,
}

impl DistillRecord {
    pub fn turn(&self, role: &str) -> Option<&str> {
        self.messages
            .iter()
            .find(|m| m.role == role)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub corpus: PathBuf,
    pub records: usize,
    /// Sessions in corpus order.
    pub sessions: Vec<String>,
    pub dataset: String,
    pub teacher_model: String,
    pub teacher_run: PathBuf,
    /// Always `"none"`: every completion is kept.
    pub filter: String,
    /// Hex SHA-256 of the corpus file.
    pub sha256: String,
}

/// `corpus.jsonl` -> `corpus.manifest.json`.
pub fn manifest_path(corpus: &Path) -> PathBuf {
    let stem = corpus
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    corpus.with_file_name(format!("{stem}.manifest.json"))
}

fn write_corpus(
    records: &[DistillRecord],
    out: &Path,
    teacher_run: &Path,
    dataset: &str,
    teacher_model: &str,
) -> Result<CorpusManifest> {
    let mut text = String::new();
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::json(out, e))?;
        let _ = writeln!(text, "{line}");
    }
    fsutil::write_atomic(out, text.as_bytes())?;

    let mut sessions: Vec<String> = Vec::new();
    for r in records {
        if sessions.last() != Some(&r.source.session_id) {
            sessions.push(r.source.session_id.clone());
        }
    }
    let manifest = CorpusManifest {
        corpus: out.to_path_buf(),
        records: records.len(),
        sessions,
        dataset: dataset.to_string(),
        teacher_model: teacher_model.to_string(),
        teacher_run: teacher_run.to_path_buf(),
        filter: "none".into(),
        sha256: hex::encode(Sha256::digest(text.as_bytes())),
    };
    fsutil::write_json(&manifest_path(out), &manifest)?;
    Ok(manifest)
}

/// Writes one record per stored window of `sessions`, in session order and
/// window order, to `out` plus a manifest next to it.
pub fn build_corpus(run_dir: &Path, sessions: &[String], out: &Path) -> Result<CorpusManifest> {
    if sessions.is_empty() {
        return Err(Error::Corpus("no sessions selected for the corpus".into()));
    }
    let store = RunStore::new(run_dir);
    let index = store.read_index()?;
    let mut records = Vec::new();
    for session_id in sessions {
        let entry = index
            .sessions
            .iter()
            .find(|e| &e.session_id == session_id)
            .ok_or_else(|| {
                Error::Corpus(format!(
                    "session {session_id} is not part of the teacher run in {}",
                    run_dir.display()
                ))
            })?;
        for window_id in 0..entry.windows {
            let key = WindowKey {
                session_id: session_id.clone(),
                window_id,
            };
            let stored = store.load(&key)?.ok_or_else(|| {
                Error::Corpus(format!("window {key} has no stored completion; resume the teacher run first"))
            })?;
            if stored.meta.failure == Some(Failure::TransportFailed) {
                return Err(Error::Corpus(format!(
                    "window {key} failed in transport; resume the teacher run first"
                )));
            }
            let mut messages = Vec::with_capacity(3);
            if !stored.system_text.is_empty() {
                messages.push(ChatTurn {
                    role: "system".into(),
                    content: stored.system_text.clone(),
                });
            }
            messages.push(ChatTurn {
                role: "user".into(),
                content: stored.user_text.clone(),
            });
            messages.push(ChatTurn {
                role: "assistant".into(),
                content: stored.raw_text.clone(),
            });
            records.push(DistillRecord {
                messages,
                source: RecordSource {
                    dataset: index.dataset.clone(),
                    session_id: session_id.clone(),
                    window_id,
                    prompt_hash: stored.meta.prompt_hash.clone(),
                },
                teacher_model: stored.meta.model.clone(),
            });
        }
    }
    write_corpus(&records, out, run_dir, &index.dataset, &index.model)
}

pub fn read_corpus(path: &Path) -> Result<Vec<DistillRecord>> {
    let text = fsutil::read_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Keeps the records of the first `k` sessions (by first appearance) of an
/// existing corpus.
pub fn subset_by_sessions(corpus: &Path, k: usize, out: &Path) -> Result<CorpusManifest> {
    let manifest: CorpusManifest = fsutil::read_json(&manifest_path(corpus))?;
    let records = read_corpus(corpus)?;
    let mut order: Vec<&str> = Vec::new();
    for r in &records {
        if !order.contains(&r.source.session_id.as_str()) {
            order.push(&r.source.session_id);
        }
    }
    if k == 0 || k > order.len() {
        return Err(Error::Corpus(format!(
            "k = {k} is outside 1..={} sessions in {}",
            order.len(),
            corpus.display()
        )));
    }
    let keep: BTreeSet<&str> = order[..k].iter().copied().collect();
    let subset: Vec<DistillRecord> = records
        .iter()
        .filter(|r| keep.contains(r.source.session_id.as_str()))
        .cloned()
        .collect();
    write_corpus(
        &subset,
        out,
        &manifest.teacher_run,
        &manifest.dataset,
        &manifest.teacher_model,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_next_to_corpus() {
        assert_eq!(
            manifest_path(Path::new("out/corpus_k3.jsonl")),
            PathBuf::from("out/corpus_k3.manifest.json")
        );
    }

    #[test]
    fn empty_selection_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = build_corpus(dir.path(), &[], &dir.path().join("c.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Corpus(_)));
    }

    #[test]
    fn missing_run_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = build_corpus(dir.path(), &["s01".into()], &dir.path().join("c.jsonl")).unwrap_err();
        assert!(matches!(err, Error::RunStore(_)));
    }
}
