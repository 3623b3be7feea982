//! Domain types shared by every pipeline stage, plus home-profile loading
//! and validation.
//!
//! Everything here is immutable once constructed; the pipeline passes these
//! values by reference between stages and across concurrent inference tasks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;
use crate::fsutil;

/// Index of an activity label inside a dataset's vocabulary (e.g. `19`).
pub type LabelId = u32;

/// Lowercases, trims and collapses inner whitespace runs to one space.
pub fn canonicalize(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Sensor transition recorded by one raw event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    TurnedOn,
    TurnedOff,
    Opened,
    Closed,
    PressureOn,
    PressureOff,
    /// A reading that carries its own value (temperature, power level...).
    Value,
    /// Kept verbatim so textualization can fail with the offending name.
    Unrecognized(String),
}

impl EventKind {
    pub fn parse(raw: &str) -> EventKind {
        let norm = raw
            .replace(['_', '-'], " ")
            .split_whitespace()
            .map(str::to_lowercase)
            .collect::<Vec<_>>()
            .join(" ");
        match norm.as_str() {
            "turned on" | "on" => EventKind::TurnedOn,
            "turned off" | "off" => EventKind::TurnedOff,
            "opened" | "open" => EventKind::Opened,
            "closed" | "close" => EventKind::Closed,
            "pressure on" => EventKind::PressureOn,
            "pressure off" => EventKind::PressureOff,
            "value" | "generic value" => EventKind::Value,
            _ => EventKind::Unrecognized(raw.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            EventKind::TurnedOn => "turned ON",
            EventKind::TurnedOff => "turned OFF",
            EventKind::Opened => "OPENED",
            EventKind::Closed => "CLOSED",
            EventKind::PressureOn => "pressure ON",
            EventKind::PressureOff => "pressure OFF",
            EventKind::Value => "value",
            EventKind::Unrecognized(raw) => raw,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EventKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EventKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Ok(EventKind::parse(&raw))
    }
}

/// One raw home sensor reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorEvent {
    pub session_id: String,
    /// Position within the session, assigned from file order.
    pub seq: u64,
    pub timestamp: NaiveDateTime,
    pub room: String,
    pub sensor: String,
    pub kind: EventKind,
    pub value: Option<String>,
    pub truth_label: LabelId,
    /// Not used for scoring.
    pub resident: Option<String>,
}

/// A recording session: its id and events in seq order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub id: String,
    pub events: Vec<SensorEvent>,
}

/// JSON form of one event as it appears in a prompt.
///
/// Field order is part of the prompt bytes; keep `id`, `time`, `event`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextualizedEvent {
    pub id: u64,
    pub time: String,
    pub event: String,
}

/// Consecutive run of textualized events; the unit of prompting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    /// Position of the window inside its session, from 0.
    pub window_id: u32,
    pub session_id: String,
    pub events: Vec<TextualizedEvent>,
    /// Ground-truth label for each event, parallel to `events`.
    pub truth: Vec<LabelId>,
}

impl Window {
    pub fn key(&self) -> WindowKey {
        WindowKey {
            session_id: self.session_id.clone(),
            window_id: self.window_id,
        }
    }

    pub fn contains_event(&self, id: u64) -> bool {
        self.events.iter().any(|e| e.id == id)
    }
}

/// Identifies a window across a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowKey {
    pub session_id: String,
    pub window_id: u32,
}

impl fmt::Display for WindowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.session_id, self.window_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "LabelSpec", into = "LabelSpec")]
pub struct ActivityLabel {
    pub index: LabelId,
    pub name: String,
    pub canonical: String,
}

#[derive(Serialize, Deserialize)]
struct LabelSpec {
    index: LabelId,
    name: String,
}

impl From<LabelSpec> for ActivityLabel {
    fn from(spec: LabelSpec) -> Self {
        ActivityLabel::new(spec.index, spec.name)
    }
}

impl From<ActivityLabel> for LabelSpec {
    fn from(label: ActivityLabel) -> Self {
        LabelSpec {
            index: label.index,
            name: label.name,
        }
    }
}

impl ActivityLabel {
    pub fn new(index: LabelId, name: impl Into<String>) -> Self {
        let name = name.into();
        let canonical = canonicalize(&name);
        ActivityLabel {
            index,
            name,
            canonical,
        }
    }

    /// Prompt rendering, e.g. `19. preparing dinner`.
    pub fn display(&self) -> String {
        format!("{}. {}", self.index, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    /// Free-text description of the appliances and sensors in the room.
    pub appliances: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticExample {
    pub input: String,
    pub output: String,
}

/// Per-dataset prompt ingredients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomeProfile {
    pub dataset_name: String,
    /// Free-form provenance note (for example, whether wording is reconstructed).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub role_text: String,
    pub rooms: Vec<Room>,
    pub io_description: String,
    pub labels: Vec<ActivityLabel>,
    #[serde(default)]
    pub rules: Vec<String>,
    pub static_example: StaticExample,
}

impl HomeProfile {
    pub fn load(path: &Path) -> Result<HomeProfile> {
        fsutil::read_json(path)
    }

    pub fn label(&self, index: LabelId) -> Option<&ActivityLabel> {
        self.labels.iter().find(|l| l.index == index)
    }

    pub fn has_room(&self, room: &str) -> bool {
        self.rooms.iter().any(|r| r.name == room)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    EmptyVocabulary,
    DuplicateLabelIndex { index: LabelId },
    UnknownRoom { room: String, first_session: String, first_seq: u64 },
    UnknownTruthLabel { label: LabelId, first_session: String, first_seq: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyVocabulary => write!(f, "label vocabulary is empty"),
            Violation::DuplicateLabelIndex { index } => {
                write!(f, "label index {index} is used more than once")
            }
            Violation::UnknownRoom {
                room,
                first_session,
                first_seq,
            } => write!(
                f,
                "room {room:?} (first seen in session {first_session}, event {first_seq}) is not in the profile"
            ),
            Violation::UnknownTruthLabel {
                label,
                first_session,
                first_seq,
            } => write!(
                f,
                "truth label {label} (first seen in session {first_session}, event {first_seq}) is not in the vocabulary"
            ),
        }
    }
}

/// Checks a profile against the sessions it will be used with.
///
/// Each distinct problem is reported once; an empty list means the profile
/// is usable.
pub fn validate_profile(profile: &HomeProfile, sessions: &[Session]) -> Vec<Violation> {
    let mut report = Vec::new();
    if profile.labels.is_empty() {
        report.push(Violation::EmptyVocabulary);
    }

    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    for label in &profile.labels {
        if !seen.insert(label.index) {
            dup.insert(label.index);
        }
    }
    report.extend(dup.into_iter().map(|index| Violation::DuplicateLabelIndex { index }));

    let mut unknown_rooms: BTreeMap<&str, (&str, u64)> = BTreeMap::new();
    let mut unknown_labels: BTreeMap<LabelId, (&str, u64)> = BTreeMap::new();
    for session in sessions {
        for ev in &session.events {
            if !profile.has_room(&ev.room) {
                unknown_rooms
                    .entry(ev.room.as_str())
                    .or_insert((session.id.as_str(), ev.seq));
            }
            if !seen.contains(&ev.truth_label) {
                unknown_labels
                    .entry(ev.truth_label)
                    .or_insert((session.id.as_str(), ev.seq));
            }
        }
    }
    report.extend(unknown_rooms.into_iter().map(|(room, (s, seq))| Violation::UnknownRoom {
        room: room.to_string(),
        first_session: s.to_string(),
        first_seq: seq,
    }));
    report.extend(unknown_labels.into_iter().map(|(label, (s, seq))| {
        Violation::UnknownTruthLabel {
            label,
            first_session: s.to_string(),
            first_seq: seq,
        }
    }));
    report
}

/// One per-event answer recovered from a completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub event_id: u64,
    pub raw_label: String,
    /// Vocabulary index the raw label resolved to, if any.
    pub matched: Option<LabelId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Failure {
    TransportFailed,
    MalformedOutput,
    EmptyOutput,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Failure::TransportFailed => "transport-failed",
            Failure::MalformedOutput => "malformed-output",
            Failure::EmptyOutput => "empty-output",
        })
    }
}

/// Outcome of prompting the model with one window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub session_id: String,
    pub window_id: u32,
    /// The complete completion, reasoning included.
    pub raw_text: String,
    /// Text of the first think segment; empty when there is none.
    pub reasoning_trace: String,
    pub predictions: Vec<Prediction>,
    pub failure: Option<Failure>,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

impl InferenceResult {
    pub fn key(&self) -> WindowKey {
        WindowKey {
            session_id: self.session_id.clone(),
            window_id: self.window_id,
        }
    }
}
