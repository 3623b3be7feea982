//! Seeded generator of multi-resident sensor sessions.
//!
//! Each resident walks through a sequence of activity segments; at every
//! step one resident (chosen at random, after each resident has acted once)
//! fires a sensor tied to its current activity, so the sessions interleave
//! the events of concurrent activities the way real multi-occupant homes do.

use std::collections::HashMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{validate_session_id, Dataset};
use crate::model::{
    ActivityLabel, EventKind, HomeProfile, LabelId, Room, SensorEvent, Session, StaticExample,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorStyle {
    /// turned ON / turned OFF
    Switch,
    /// OPENED / CLOSED
    Contact,
    /// pressure ON / pressure OFF
    Pressure,
}

impl SensorStyle {
    fn kinds(self) -> (EventKind, EventKind) {
        match self {
            SensorStyle::Switch => (EventKind::TurnedOn, EventKind::TurnedOff),
            SensorStyle::Contact => (EventKind::Opened, EventKind::Closed),
            SensorStyle::Pressure => (EventKind::PressureOn, EventKind::PressureOff),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSensor {
    pub name: String,
    pub style: SensorStyle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticRoom {
    pub name: String,
    pub sensors: Vec<SyntheticSensor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorRef {
    pub room: String,
    pub sensor: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticActivity {
    pub index: LabelId,
    pub name: String,
    pub sensors: Vec<SensorRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dataset_name: String,
    pub rooms: Vec<SyntheticRoom>,
    pub activities: Vec<SyntheticActivity>,
    pub residents: usize,
    pub sessions: usize,
    pub events_per_session: usize,
    /// Shortest and longest activity segment, in events.
    #[serde(default = "default_segment")]
    pub segment_len: (usize, usize),
    /// Largest gap between consecutive events, in seconds. Gaps of 0 occur.
    #[serde(default = "default_gap")]
    pub max_gap_secs: i64,
}

fn default_segment() -> (usize, usize) {
    (3, 12)
}

fn default_gap() -> i64 {
    45
}

fn sensor(name: &str, style: SensorStyle) -> SyntheticSensor {
    SyntheticSensor {
        name: name.into(),
        style,
    }
}

fn uses(pairs: &[(&str, &str)]) -> Vec<SensorRef> {
    pairs
        .iter()
        .map(|(room, sensor)| SensorRef {
            room: room.to_string(),
            sensor: sensor.to_string(),
        })
        .collect()
}

impl SyntheticSpec {
    /// A small apartment with five rooms and seven activities.
    pub fn default_home(sessions: usize, events_per_session: usize, residents: usize) -> Self {
        use SensorStyle::*;
        let rooms = vec![
            SyntheticRoom {
                name: "kitchen".into(),
                sensors: vec![
                    sensor("induction stove wattmeter", Switch),
                    sensor("fridge door", Contact),
                    sensor("kettle", Switch),
                ],
            },
            SyntheticRoom {
                name: "living room".into(),
                sensors: vec![sensor("television", Switch), sensor("sofa", Pressure)],
            },
            SyntheticRoom {
                name: "bedroom".into(),
                sensors: vec![sensor("bed", Pressure), sensor("wardrobe door", Contact)],
            },
            SyntheticRoom {
                name: "bathroom".into(),
                sensors: vec![sensor("shower", Switch), sensor("door", Contact)],
            },
            SyntheticRoom {
                name: "entrance".into(),
                sensors: vec![sensor("front door", Contact)],
            },
        ];
        let activities = vec![
            SyntheticActivity {
                index: 1,
                name: "sleeping".into(),
                sensors: uses(&[("bedroom", "bed")]),
            },
            SyntheticActivity {
                index: 2,
                name: "dressing".into(),
                sensors: uses(&[("bedroom", "wardrobe door"), ("bedroom", "bed")]),
            },
            SyntheticActivity {
                index: 3,
                name: "watching TV".into(),
                sensors: uses(&[("living room", "television"), ("living room", "sofa")]),
            },
            SyntheticActivity {
                index: 4,
                name: "preparing dinner".into(),
                sensors: uses(&[
                    ("kitchen", "induction stove wattmeter"),
                    ("kitchen", "fridge door"),
                ]),
            },
            SyntheticActivity {
                index: 5,
                name: "making tea".into(),
                sensors: uses(&[("kitchen", "kettle"), ("kitchen", "fridge door")]),
            },
            SyntheticActivity {
                index: 6,
                name: "personal washing".into(),
                sensors: uses(&[("bathroom", "shower"), ("bathroom", "door")]),
            },
            SyntheticActivity {
                index: 7,
                name: "leaving home".into(),
                sensors: uses(&[("entrance", "front door")]),
            },
        ];
        SyntheticSpec {
            dataset_name: "synthetic-home".into(),
            rooms,
            activities,
            residents,
            sessions,
            events_per_session,
            segment_len: default_segment(),
            max_gap_secs: default_gap(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Synthetic(m));
        if self.sessions == 0 {
            return bad("at least one session is required".into());
        }
        if self.events_per_session == 0 {
            return bad("sessions need at least one event".into());
        }
        if self.activities.is_empty() {
            return bad("the activity label set is empty".into());
        }
        if !(1..=4).contains(&self.residents) {
            return bad(format!("residents must be 1..=4, got {}", self.residents));
        }
        let (lo, hi) = self.segment_len;
        if lo == 0 || lo > hi {
            return bad(format!("invalid segment length range {lo}..={hi}"));
        }
        if self.max_gap_secs < 0 {
            return bad("max_gap_secs must be non-negative".into());
        }
        for act in &self.activities {
            if act.sensors.is_empty() {
                return bad(format!("activity {:?} uses no sensors", act.name));
            }
            for r in &act.sensors {
                if self.find_sensor(r).is_none() {
                    return bad(format!(
                        "activity {:?} uses unknown sensor {} / {}",
                        act.name, r.room, r.sensor
                    ));
                }
            }
        }
        Ok(())
    }

    fn find_sensor(&self, r: &SensorRef) -> Option<&SyntheticSensor> {
        self.rooms
            .iter()
            .find(|room| room.name == r.room)
            .and_then(|room| room.sensors.iter().find(|s| s.name == r.sensor))
    }

    /// Home profile whose rooms and vocabulary match this generator.
    pub fn to_profile(&self) -> HomeProfile {
        HomeProfile {
            dataset_name: self.dataset_name.clone(),
            note: Some("generated alongside a synthetic dataset".into()),
            role_text: "You are an expert in human activity recognition in smart homes. \
                Several residents may live in the home and act at the same time. \
                Your task is to infer, for each sensor event, the activity that triggered it."
                .into(),
            rooms: self
                .rooms
                .iter()
                .map(|r| Room {
                    name: r.name.clone(),
                    appliances: r
                        .sensors
                        .iter()
                        .map(|s| s.name.as_str())
                        .collect::<Vec<_>>()
                        .join(", "),
                })
                .collect(),
            io_description: "The input is a JSON list of sensor events. Each event has an \
                \"id\", a \"time\" (HH:mm:ss) and an \"event\" description made of the room, \
                the sensor and what happened."
                .into(),
            labels: self
                .activities
                .iter()
                .map(|a| ActivityLabel::new(a.index, a.name.clone()))
                .collect(),
            rules: vec![],
            static_example: StaticExample {
                input: r#"[{"id": 0, "time": "HH:mm:ss", "event": "<room> <sensor> <event>"}, {"id": 1, "time": "HH:mm:ss", "event": "<room> <sensor> <event>"}]"#.into(),
                output: r#"[{"id": 0, "activity": "<N>. <activity label>"}, {"id": 1, "activity": "<N>. <activity label>"}]"#.into(),
            },
        }
    }
}

struct ResidentState {
    activity: usize,
    remaining: usize,
}

/// Generates a dataset; the same `(spec, seed)` always yields the same events.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = NaiveDate::from_ymd_opt(2024, 1, 1)
        .and_then(|d| d.and_hms_opt(7, 0, 0))
        .expect("valid base date");
    let width = spec.sessions.to_string().len().max(2);

    let mut sessions = Vec::with_capacity(spec.sessions);
    for s in 0..spec.sessions {
        let id = format!("s{:0width$}", s + 1);
        validate_session_id(&id)?;
        let mut clock: NaiveDateTime = base + Duration::days(s as i64);
        let mut residents: Vec<ResidentState> = (0..spec.residents)
            .map(|_| ResidentState {
                activity: 0,
                remaining: 0,
            })
            .collect();
        let mut sensor_on: HashMap<(String, String), bool> = HashMap::new();
        let mut events = Vec::with_capacity(spec.events_per_session);

        for seq in 0..spec.events_per_session {
            let r = if seq < spec.residents {
                seq
            } else {
                rng.random_range(0..spec.residents)
            };
            let state = &mut residents[r];
            if state.remaining == 0 {
                state.activity = rng.random_range(0..spec.activities.len());
                state.remaining = rng.random_range(spec.segment_len.0..=spec.segment_len.1);
            }
            state.remaining -= 1;
            let activity = &spec.activities[state.activity];
            let sref = &activity.sensors[rng.random_range(0..activity.sensors.len())];
            let style = spec
                .find_sensor(sref)
                .expect("validated sensor reference")
                .style;
            let on = sensor_on
                .entry((sref.room.clone(), sref.sensor.clone()))
                .or_insert(false);
            *on = !*on;
            let (rise, fall) = style.kinds();
            let kind = if *on { rise } else { fall };

            if seq > 0 {
                clock += Duration::seconds(rng.random_range(0..=spec.max_gap_secs));
            }
            events.push(SensorEvent {
                session_id: id.clone(),
                seq: seq as u64,
                timestamp: clock,
                room: sref.room.clone(),
                sensor: sref.sensor.clone(),
                kind,
                value: None,
                truth_label: activity.index,
                resident: Some(format!("R{}", r + 1)),
            });
        }
        sessions.push(Session { id, events });
    }
    Ok(Dataset {
        name: spec.dataset_name.clone(),
        sessions,
        profile_ref: None,
    })
}

/// Scenario manifest for a synthetic dataset: consecutive sessions are
/// grouped in pairs.
pub fn synthetic_manifest(dataset: &Dataset) -> std::collections::BTreeMap<String, String> {
    dataset
        .sessions
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.clone(), format!("scenario-{}", i / 2 + 1)))
        .collect()
}
