//! Recovering per-event labels from free-text completions.
//!
//! Completions from reasoning models look like
//! `<think> ...drafts... </think> final text [ {...}, ... ]`. The think
//! segment is set aside as the reasoning trace, and the answer is the last
//! syntactically valid JSON array of prediction objects in what remains.
//! Nothing in here fails: unusable text yields no predictions.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::model::{canonicalize, ActivityLabel, Failure, LabelId, Prediction, Window};

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";

/// Splits a completion into `(reasoning_trace, answer_region)`.
///
/// Both are slices of `raw`. A think segment left open (truncated output)
/// swallows the rest of the text, leaving no answer. A lone closing tag
/// (templates that pre-open the segment in the prompt) marks everything
/// before it as reasoning.
pub fn split_reasoning(raw: &str) -> (&str, &str) {
    match (raw.find(THINK_OPEN), raw.find(THINK_CLOSE)) {
        (Some(open), close) => {
            let body_start = open + THINK_OPEN.len();
            match close.filter(|c| *c >= body_start).or_else(|| {
                raw[body_start..]
                    .find(THINK_CLOSE)
                    .map(|c| c + body_start)
            }) {
                Some(c) => (raw[body_start..c].trim(), &raw[c + THINK_CLOSE.len()..]),
                None => (raw[body_start..].trim(), ""),
            }
        }
        (None, Some(c)) => (raw[..c].trim(), &raw[c + THINK_CLOSE.len()..]),
        (None, None) => ("", raw),
    }
}

/// Removes any further complete think segments from an answer region.
fn strip_think_segments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find(THINK_OPEN) {
        out.push_str(&rest[..open]);
        let after = &rest[open + THINK_OPEN.len()..];
        match after.find(THINK_CLOSE) {
            Some(c) => rest = &after[c + THINK_CLOSE.len()..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

fn is_prediction_shaped(items: &[Value]) -> bool {
    items
        .iter()
        .any(|v| v.as_object().is_some_and(|o| o.contains_key("id")))
}

/// Last valid JSON array in `text` that holds at least one object with an
/// `id` key. Arrays nested inside an accepted array are not considered
/// separately.
fn last_prediction_array(text: &str) -> Option<Vec<Value>> {
    let mut found = None;
    let mut pos = 0;
    while let Some(off) = text[pos..].find('[') {
        let start = pos + off;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Array(items))) => {
                let end = start + stream.byte_offset();
                if is_prediction_shaped(&items) {
                    found = Some(items);
                    pos = end;
                } else {
                    pos = start + 1;
                }
            }
            _ => pos = start + 1,
        }
    }
    found
}

fn entry_id(v: &Value) -> Option<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn entry_label(obj: &serde_json::Map<String, Value>) -> Option<String> {
    let v = obj.get("activity").or_else(|| obj.get("label"))?;
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Parses the predictions for `window` out of a completion.
///
/// Entries need an `id` and an `activity` (or `label`) key. Ids outside the
/// window are dropped and a repeated id keeps its last entry. The result is
/// in window event order with `matched` unset; see [`resolve_predictions`].
pub fn extract_predictions(raw_text: &str, window: &Window) -> Vec<Prediction> {
    let (_, answer) = split_reasoning(raw_text);
    let answer = strip_think_segments(answer);
    let Some(items) = last_prediction_array(&answer) else {
        return Vec::new();
    };

    let mut by_id: BTreeMap<u64, String> = BTreeMap::new();
    for item in &items {
        let Some(obj) = item.as_object() else { continue };
        let (Some(id), Some(label)) = (obj.get("id").and_then(entry_id), entry_label(obj)) else {
            continue;
        };
        if window.contains_event(id) {
            by_id.insert(id, label);
        }
    }
    window
        .events
        .iter()
        .filter_map(|e| {
            by_id.remove(&e.id).map(|raw_label| Prediction {
                event_id: e.id,
                raw_label,
                matched: None,
            })
        })
        .collect()
}

/// Splits `"19. preparing dinner"` into `(19, "preparing dinner")`.
fn leading_index(text: &str) -> Option<(LabelId, &str)> {
    let digits = text.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || digits > 9 {
        return None;
    }
    let (num, rest) = text.split_at(digits);
    let rest = match rest.chars().next() {
        None => rest,
        Some('.' | ')' | ':' | '-') => &rest[1..],
        Some(c) if c.is_whitespace() => rest,
        Some(_) => return None,
    };
    Some((num.parse().ok()?, rest.trim()))
}

/// Resolves a raw label to a vocabulary index.
///
/// Tried in order: a leading index (`"19."`, `"19"`) present in the
/// vocabulary; exact match on the canonical name; canonical-name match after
/// stripping an `N. ` prefix. No fuzzy matching.
pub fn match_label(raw_label: &str, vocabulary: &[ActivityLabel]) -> Option<LabelId> {
    let text = raw_label.trim();
    let indexed = leading_index(text);
    if let Some((idx, _)) = indexed {
        if vocabulary.iter().any(|l| l.index == idx) {
            return Some(idx);
        }
    }
    let canon = canonicalize(text);
    if let Some(l) = vocabulary.iter().find(|l| l.canonical == canon) {
        return Some(l.index);
    }
    let (_, rest) = indexed?;
    let canon = canonicalize(rest);
    vocabulary.iter().find(|l| l.canonical == canon).map(|l| l.index)
}

pub fn resolve_predictions(predictions: &mut [Prediction], vocabulary: &[ActivityLabel]) {
    for p in predictions {
        p.matched = match_label(&p.raw_label, vocabulary);
    }
}

/// Failure cause for a completion that reached us, if any.
pub fn classify_output(raw_text: &str, predictions: &[Prediction]) -> Option<Failure> {
    if raw_text.trim().is_empty() {
        Some(Failure::EmptyOutput)
    } else if predictions.is_empty() {
        Some(Failure::MalformedOutput)
    } else {
        None
    }
}
