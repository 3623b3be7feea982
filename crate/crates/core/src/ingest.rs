//! Event-log loading and train/test split policies.
//!
//! The on-disk format is line-delimited JSON, one event per line:
//!
//! ```json
//! {"session":"s01","ts":"2021-03-04T19:53:04","room":"kitchen","sensor":"induction stove wattmeter","kind":"turned OFF","label":19,"resident":"R1"}
//! ```
//!
//! `label` may be the vocabulary index or the label name. Sessions keep the
//! order in which they first appear in the file and events are numbered
//! 0..N-1 per session in file order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::match_label;
use crate::fsutil;
use crate::model::{EventKind, HomeProfile, LabelId, SensorEvent, Session};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub sessions: Vec<Session>,
    pub profile_ref: Option<PathBuf>,
}

impl Dataset {
    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.iter().find(|s| s.id == id)
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.iter().map(|s| s.id.clone()).collect()
    }

    pub fn event_count(&self) -> usize {
        self.sessions.iter().map(|s| s.events.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelRef {
    Index(LabelId),
    Name(String),
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub session: String,
    pub ts: String,
    pub room: String,
    pub sensor: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    pub label: LabelRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resident: Option<String>,
}

pub(crate) fn validate_session_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSessionId(id.to_string()))
    }
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw.trim(), fmt).ok())
        .and_then(|t| t.with_nanosecond(0))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Strictness {
    /// Unknown rooms and unknown numeric labels are load errors.
    Strict,
    /// Unknown rooms and numeric labels are kept for `validate_profile`.
    Lenient,
}

/// Loads an event log, validating every record against `profile`.
pub fn load_dataset(path: &Path, profile: &HomeProfile) -> Result<Dataset> {
    load(path, profile, Strictness::Strict)
}

/// Like [`load_dataset`] but leaves room and numeric-label membership to
/// [`crate::model::validate_profile`], so every problem can be reported at once.
pub fn load_dataset_unchecked(path: &Path, profile: &HomeProfile) -> Result<Dataset> {
    load(path, profile, Strictness::Lenient)
}

fn load(path: &Path, profile: &HomeProfile, strictness: Strictness) -> Result<Dataset> {
    let text = fsutil::read_string(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut by_session: HashMap<String, Vec<SensorEvent>> = HashMap::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let rec: EventRecord =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        validate_session_id(&rec.session).map_err(|e| parse_err(e.to_string()))?;
        let timestamp = parse_timestamp(&rec.ts)
            .ok_or_else(|| parse_err(format!("unparseable timestamp {:?}", rec.ts)))?;

        let truth_label = match &rec.label {
            LabelRef::Index(i) => {
                if strictness == Strictness::Strict && profile.label(*i).is_none() {
                    return Err(Error::UnknownLabel {
                        path: path.to_path_buf(),
                        line: line_no,
                        value: i.to_string(),
                    });
                }
                *i
            }
            LabelRef::Name(name) => match_label(name, &profile.labels).ok_or_else(|| {
                Error::UnknownLabel {
                    path: path.to_path_buf(),
                    line: line_no,
                    value: name.clone(),
                }
            })?,
        };
        if strictness == Strictness::Strict && !profile.has_room(&rec.room) {
            return Err(Error::UnknownRoom {
                path: path.to_path_buf(),
                line: line_no,
                room: rec.room,
            });
        }

        let events = by_session.entry(rec.session.clone()).or_insert_with(|| {
            order.push(rec.session.clone());
            Vec::new()
        });
        let seq = events.len() as u64;
        events.push(SensorEvent {
            session_id: rec.session,
            seq,
            timestamp,
            room: rec.room,
            sensor: rec.sensor,
            kind: EventKind::parse(&rec.kind),
            value: rec.value,
            truth_label,
            resident: rec.resident,
        });
    }

    if order.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    let sessions = order
        .into_iter()
        .map(|id| {
            let events = by_session.remove(&id).unwrap_or_default();
            Session { id, events }
        })
        .collect();
    Ok(Dataset {
        name: profile.dataset_name.clone(),
        sessions,
        profile_ref: None,
    })
}

impl From<&SensorEvent> for EventRecord {
    fn from(ev: &SensorEvent) -> Self {
        EventRecord {
            session: ev.session_id.clone(),
            ts: ev.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            room: ev.room.clone(),
            sensor: ev.sensor.clone(),
            kind: ev.kind.to_string(),
            value: ev.value.clone(),
            label: LabelRef::Index(ev.truth_label),
            resident: ev.resident.clone(),
        }
    }
}

/// Serializes a dataset back to the line-delimited event format.
pub fn event_log_bytes(dataset: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    for session in &dataset.sessions {
        for ev in &session.events {
            let rec = EventRecord::from(ev);
            serde_json::to_writer(&mut out, &rec).expect("event records always serialize");
            out.push(b'\n');
        }
    }
    out
}

pub fn write_event_log(dataset: &Dataset, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &event_log_bytes(dataset))
}

/// Reads a scenario manifest: a JSON object mapping session id to scenario id.
pub fn load_scenario_manifest(path: &Path) -> Result<BTreeMap<String, String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitPolicy {
    /// Sessions `[0, k)` train, the rest test.
    FirstK(usize),
    /// Scenario-balanced split: a 2-session scenario gives 1 train / 1 test,
    /// a scenario with 3 or more sessions gives its first 2 to train and the
    /// rest to test. Single-session scenarios go to test.
    PerScenario(BTreeMap<String, String>),
    Explicit { train: Vec<String>, test: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

pub fn split(dataset: &Dataset, policy: &SplitPolicy) -> Result<Split> {
    let ids = dataset.session_ids();
    match policy {
        SplitPolicy::FirstK(k) => {
            if *k > ids.len() {
                return Err(Error::Split(format!(
                    "k = {k} exceeds the {} sessions in the dataset",
                    ids.len()
                )));
            }
            let (train, test) = ids.split_at(*k);
            Ok(Split {
                train: train.to_vec(),
                test: test.to_vec(),
            })
        }
        SplitPolicy::PerScenario(scenarios) => {
            let mut groups: Vec<(String, Vec<String>)> = Vec::new();
            for id in &ids {
                let scenario = scenarios.get(id).ok_or_else(|| {
                    Error::Split(format!("session {id} has no scenario in the manifest"))
                })?;
                match groups.iter_mut().find(|(s, _)| s == scenario) {
                    Some((_, members)) => members.push(id.clone()),
                    None => groups.push((scenario.clone(), vec![id.clone()])),
                }
            }
            let mut out = Split::default();
            for (_, members) in groups {
                let n_train = match members.len() {
                    1 => 0,
                    2 => 1,
                    _ => 2,
                };
                out.train.extend_from_slice(&members[..n_train]);
                out.test.extend_from_slice(&members[n_train..]);
            }
            // keep dataset order in both halves
            let rank: HashMap<&str, usize> =
                ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
            out.train.sort_by_key(|s| rank[s.as_str()]);
            out.test.sort_by_key(|s| rank[s.as_str()]);
            Ok(out)
        }
        SplitPolicy::Explicit { train, test } => {
            let known: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
            for id in train.iter().chain(test) {
                if !known.contains(id.as_str()) {
                    return Err(Error::Split(format!("unknown session {id}")));
                }
            }
            let train_set: BTreeSet<&str> = train.iter().map(String::as_str).collect();
            if let Some(dup) = test.iter().find(|t| train_set.contains(t.as_str())) {
                return Err(Error::Split(format!("session {dup} is in both train and test")));
            }
            Ok(Split {
                train: train.clone(),
                test: test.clone(),
            })
        }
    }
}
