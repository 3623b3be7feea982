//! Sensor-state textualization and count-based window segmentation.
//!
//! Times are rendered as `HH:mm:ss` without the date, so a window that
//! spans midnight carries no day information.

use crate::error::{Error, Result};
use crate::model::{EventKind, LabelId, SensorEvent, TextualizedEvent, Window};

/// Transition wording shared by every dataset.
pub fn transition_text(kind: &EventKind, value: Option<&str>) -> Result<String> {
    let text = match kind {
        EventKind::Value => match value {
            Some(v) if !v.trim().is_empty() => format!("value {}", v.trim()),
            _ => return Err(Error::UnmappedEventKind("value (missing reading)".into())),
        },
        EventKind::Unrecognized(raw) => return Err(Error::UnmappedEventKind(raw.clone())),
        known => known.as_str().to_string(),
    };
    Ok(text)
}

/// Converts one raw event into its prompt JSON form.
pub fn textualize(event: &SensorEvent) -> Result<TextualizedEvent> {
    let transition = transition_text(&event.kind, event.value.as_deref())?;
    Ok(TextualizedEvent {
        id: event.seq,
        time: event.timestamp.format("%H:%M:%S").to_string(),
        event: format!("{} {} {}", event.room, event.sensor, transition),
    })
}

/// Textualizes a whole session, returning events and their truth labels.
pub fn textualize_session(events: &[SensorEvent]) -> Result<(Vec<TextualizedEvent>, Vec<LabelId>)> {
    let texts = events.iter().map(textualize).collect::<Result<Vec<_>>>()?;
    let truth = events.iter().map(|e| e.truth_label).collect();
    Ok((texts, truth))
}

/// Splits a session into non-overlapping windows of `window_size` events.
///
/// The trailing window keeps whatever is left (possibly fewer events).
pub fn segment(
    session_id: &str,
    events: &[TextualizedEvent],
    truth: &[LabelId],
    window_size: usize,
) -> Result<Vec<Window>> {
    if window_size == 0 {
        return Err(Error::ZeroWindowSize);
    }
    assert_eq!(
        events.len(),
        truth.len(),
        "truth labels must be parallel to events"
    );
    Ok(events
        .chunks(window_size)
        .zip(truth.chunks(window_size))
        .enumerate()
        .map(|(i, (evs, labels))| Window {
            window_id: i as u32,
            session_id: session_id.to_string(),
            events: evs.to_vec(),
            truth: labels.to_vec(),
        })
        .collect())
}

/// Compact JSON array of the window's events, one object per event.
pub fn window_to_json(window: &Window) -> String {
    serde_json::to_string(&window.events).expect("textualized events always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn raw(room: &str, sensor: &str, kind: EventKind, hms: (u32, u32, u32), seq: u64) -> SensorEvent {
        SensorEvent {
            session_id: "s01".into(),
            seq,
            timestamp: NaiveDate::from_ymd_opt(2021, 3, 4)
                .unwrap()
                .and_hms_opt(hms.0, hms.1, hms.2)
                .unwrap(),
            room: room.into(),
            sensor: sensor.into(),
            kind,
            value: None,
            truth_label: 19,
            resident: None,
        }
    }

    fn texts(n: usize) -> (Vec<TextualizedEvent>, Vec<LabelId>) {
        let evs = (0..n as u64)
            .map(|id| TextualizedEvent {
                id,
                time: "00:00:00".into(),
                event: format!("room sensor e{id}"),
            })
            .collect();
        let truth = (0..n as u32).map(|i| i % 3 + 1).collect();
        (evs, truth)
    }

    #[test]
    fn stove_event_textualizes() {
        let ev = raw(
            "kitchen",
            "induction stove wattmeter",
            EventKind::TurnedOff,
            (19, 53, 4),
            42,
        );
        let t = textualize(&ev).unwrap();
        assert_eq!(
            t,
            TextualizedEvent {
                id: 42,
                time: "19:53:04".into(),
                event: "kitchen induction stove wattmeter turned OFF".into(),
            }
        );
    }

    #[test]
    fn midnight_door_textualizes() {
        let t = textualize(&raw("bedroom", "door", EventKind::Opened, (0, 0, 0), 0)).unwrap();
        assert_eq!(t.id, 0);
        assert_eq!(t.time, "00:00:00");
        assert_eq!(t.event, "bedroom door OPENED");
    }

    #[test]
    fn unmapped_kind_is_an_error() {
        let ev = raw("kitchen", "oven", EventKind::Unrecognized("melted".into()), (1, 2, 3), 0);
        let err = textualize(&ev).unwrap_err();
        assert!(err.to_string().contains("melted"), "{err}");
    }

    #[test]
    fn value_kind_needs_a_reading() {
        let mut ev = raw("kitchen", "thermometer", EventKind::Value, (1, 2, 3), 0);
        assert!(textualize(&ev).is_err());
        ev.value = Some("21.5".into());
        assert_eq!(textualize(&ev).unwrap().event, "kitchen thermometer value 21.5");
    }

    #[test]
    fn twenty_five_events_make_three_windows() {
        let (evs, truth) = texts(25);
        let windows = segment("s01", &evs, &truth, 10).unwrap();
        let sizes: Vec<_> = windows.iter().map(|w| w.events.len()).collect();
        assert_eq!(sizes, vec![10, 10, 5]);
        assert_eq!(
            windows.iter().map(|w| w.window_id).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        // ids are the session-level ids, not restarted per window
        assert_eq!(windows[2].events[0].id, 20);
    }

    #[test]
    fn empty_session_has_no_windows() {
        assert!(segment("s01", &[], &[], 10).unwrap().is_empty());
    }

    #[test]
    fn zero_window_size_rejected() {
        let (evs, truth) = texts(3);
        assert!(matches!(
            segment("s01", &evs, &truth, 0),
            Err(Error::ZeroWindowSize)
        ));
    }

    #[test]
    fn window_json_is_compact_and_ordered() {
        let w = Window {
            window_id: 0,
            session_id: "s01".into(),
            events: vec![TextualizedEvent {
                id: 42,
                time: "19:53:04".into(),
                event: "kitchen induction stove wattmeter turned OFF".into(),
            }],
            truth: vec![19],
        };
        let json = window_to_json(&w);
        assert_eq!(
            json,
            r#"[{"id":42,"time":"19:53:04","event":"kitchen induction stove wattmeter turned OFF"}]"#
        );
        assert_eq!(window_to_json(&w), json);
    }

    #[test]
    fn empty_window_json() {
        let w = Window {
            window_id: 0,
            session_id: "s01".into(),
            events: vec![],
            truth: vec![],
        };
        assert_eq!(window_to_json(&w), "[]");
    }

    proptest! {
        #[test]
        fn textualization_is_injective(
            a in ("[a-z]{1,6}", "[a-z]{1,6}", 0usize..6),
            b in ("[a-z]{1,6}", "[a-z]{1,6}", 0usize..6),
        ) {
            let kinds = [
                EventKind::TurnedOn, EventKind::TurnedOff, EventKind::Opened,
                EventKind::Closed, EventKind::PressureOn, EventKind::PressureOff,
            ];
            let ea = raw(&a.0, &a.1, kinds[a.2].clone(), (1, 1, 1), 0);
            let eb = raw(&b.0, &b.1, kinds[b.2].clone(), (1, 1, 1), 0);
            let same_input = (&a.0, &a.1, a.2) == (&b.0, &b.1, b.2);
            let same_text = textualize(&ea).unwrap().event == textualize(&eb).unwrap().event;
            prop_assert_eq!(same_input, same_text);
        }
    }
}
