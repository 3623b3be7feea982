//! Per-session scoring and per-dataset aggregation.
//!
//! Every event is exactly one of correct, wrong or missed. Missed events
//! (no usable prediction for their id) count as a false negative for the
//! true class and add no false positive. A prediction whose label matches
//! nothing in the vocabulary is wrong, scored the same way as a miss.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::match_label;
use crate::model::{ActivityLabel, Failure, InferenceResult, LabelId, Window};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Variant {
    #[default]
    Macro,
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub session_id: String,
    pub n_events: u64,
    pub n_correct: u64,
    pub n_wrong: u64,
    pub n_missed: u64,
    pub f1_macro: f64,
    pub f1_micro: f64,
    pub missed_pct: f64,
    pub per_label_counts: BTreeMap<LabelId, LabelCounts>,
}

impl SessionMetrics {
    pub fn f1(&self, variant: F1Variant) -> f64 {
        match variant {
            F1Variant::Macro => self.f1_macro,
            F1Variant::Micro => self.f1_micro,
        }
    }
}

fn class_f1(c: &LabelCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * c.tp) as f64 / denom as f64
    }
}

/// Macro F1 over the classes present in `truth`, and micro F1 over pooled counts.
pub(crate) fn f1_scores(counts: &BTreeMap<LabelId, LabelCounts>, truth_classes: &[LabelId]) -> (f64, f64) {
    let mut present: Vec<LabelId> = truth_classes.to_vec();
    present.sort_unstable();
    present.dedup();
    let macro_f1 = if present.is_empty() {
        0.0
    } else {
        present
            .iter()
            .map(|l| class_f1(counts.get(l).unwrap_or(&LabelCounts::default())))
            .sum::<f64>()
            / present.len() as f64
    };
    let (tp, fp, fn_) = counts
        .values()
        .fold((0u64, 0u64, 0u64), |(a, b, c), k| (a + k.tp, b + k.fp, c + k.fn_));
    let denom = tp as f64 + (fp + fn_) as f64 / 2.0;
    let micro_f1 = if denom == 0.0 { 0.0 } else { tp as f64 / denom };
    (macro_f1, micro_f1)
}

/// Scores one session from its windows and their inference results.
///
/// `results` must contain exactly one result per window (failed windows
/// included).
pub fn score_session(
    windows: &[Window],
    results: &[InferenceResult],
    vocabulary: &[ActivityLabel],
) -> Result<SessionMetrics> {
    let session_id = windows
        .first()
        .map(|w| w.session_id.clone())
        .ok_or_else(|| Error::Scoring("session has no windows".into()))?;
    if let Some(w) = windows.iter().find(|w| w.session_id != session_id) {
        return Err(Error::Scoring(format!(
            "window {} belongs to session {}, not {session_id}",
            w.window_id, w.session_id
        )));
    }

    let mut by_window: HashMap<u32, &InferenceResult> = HashMap::new();
    for r in results {
        if r.session_id != session_id {
            return Err(Error::Scoring(format!(
                "result {} does not belong to session {session_id}",
                r.key()
            )));
        }
        if by_window.insert(r.window_id, r).is_some() {
            return Err(Error::Scoring(format!("duplicate result for window {}", r.key())));
        }
    }
    if by_window.len() != windows.len() {
        return Err(Error::Scoring(format!(
            "session {session_id}: {} results for {} windows",
            by_window.len(),
            windows.len()
        )));
    }

    let mut counts: BTreeMap<LabelId, LabelCounts> = BTreeMap::new();
    let (mut n_correct, mut n_wrong, mut n_missed) = (0u64, 0u64, 0u64);
    let mut truth_classes = Vec::new();

    for w in windows {
        let result = by_window.get(&w.window_id).ok_or_else(|| {
            Error::Scoring(format!("no result for window {}", w.key()))
        })?;
        let predicted: HashMap<u64, Option<LabelId>> =
            if result.failure == Some(Failure::TransportFailed) {
                HashMap::new()
            } else {
                result
                    .predictions
                    .iter()
                    .map(|p| (p.event_id, match_label(&p.raw_label, vocabulary)))
                    .collect()
            };
        for (ev, &truth) in w.events.iter().zip(&w.truth) {
            truth_classes.push(truth);
            match predicted.get(&ev.id) {
                Some(Some(label)) if *label == truth => {
                    n_correct += 1;
                    counts.entry(truth).or_default().tp += 1;
                }
                Some(Some(label)) => {
                    n_wrong += 1;
                    counts.entry(truth).or_default().fn_ += 1;
                    counts.entry(*label).or_default().fp += 1;
                }
                Some(None) => {
                    n_wrong += 1;
                    counts.entry(truth).or_default().fn_ += 1;
                }
                None => {
                    n_missed += 1;
                    counts.entry(truth).or_default().fn_ += 1;
                }
            }
        }
    }

    let n_events = n_correct + n_wrong + n_missed;
    let (f1_macro, f1_micro) = f1_scores(&counts, &truth_classes);
    let missed_pct = if n_events == 0 {
        0.0
    } else {
        100.0 * n_missed as f64 / n_events as f64
    };
    Ok(SessionMetrics {
        session_id,
        n_events,
        n_correct,
        n_wrong,
        n_missed,
        f1_macro,
        f1_micro,
        missed_pct,
        per_label_counts: counts,
    })
}

/// Identifies what a report describes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportInfo {
    pub model: String,
    /// Model size in billions of parameters.
    #[serde(default)]
    pub params_billion: Option<f64>,
    pub dataset: String,
    #[serde(default)]
    pub headline: F1Variant,
    #[serde(default)]
    pub window_size: usize,
    /// Number of sessions the evaluated model was fine-tuned on, for the
    /// session ablation chart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finetune_sessions: Option<u32>,
    /// When set, the report is drawn as a horizontal reference line with
    /// this caption on the ablation chart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub info: ReportInfo,
    /// Mean session F1 of the headline variant.
    pub mean_f1: f64,
    pub mean_f1_macro: f64,
    pub mean_f1_micro: f64,
    pub missed_pct_mean: f64,
    /// Population standard deviation across sessions.
    pub missed_pct_std: f64,
    pub missed_display: String,
    pub sessions: Vec<SessionMetrics>,
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `"M ± S"` with two decimals.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

pub fn aggregate(sessions: Vec<SessionMetrics>, info: ReportInfo) -> Result<DatasetReport> {
    if sessions.is_empty() {
        return Err(Error::Scoring("cannot aggregate zero sessions".into()));
    }
    let (mean_f1_macro, _) = mean_std(&sessions.iter().map(|s| s.f1_macro).collect::<Vec<_>>());
    let (mean_f1_micro, _) = mean_std(&sessions.iter().map(|s| s.f1_micro).collect::<Vec<_>>());
    let (missed_pct_mean, missed_pct_std) =
        mean_std(&sessions.iter().map(|s| s.missed_pct).collect::<Vec<_>>());
    let mean_f1 = match info.headline {
        F1Variant::Macro => mean_f1_macro,
        F1Variant::Micro => mean_f1_micro,
    };
    Ok(DatasetReport {
        info,
        mean_f1,
        mean_f1_macro,
        mean_f1_micro,
        missed_pct_mean,
        missed_pct_std,
        missed_display: format_mean_std(missed_pct_mean, missed_pct_std),
        sessions,
    })
}

impl DatasetReport {
    /// Recomputes the summary statistics from the per-session rows and
    /// checks them against the stored values.
    pub fn is_consistent(&self) -> bool {
        let Ok(again) = aggregate(self.sessions.clone(), self.info.clone()) else {
            return false;
        };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
        close(again.mean_f1, self.mean_f1)
            && close(again.mean_f1_macro, self.mean_f1_macro)
            && close(again.mean_f1_micro, self.mean_f1_micro)
            && close(again.missed_pct_mean, self.missed_pct_mean)
            && close(again.missed_pct_std, self.missed_pct_std)
            && again.missed_display == self.missed_display
            && self
                .sessions
                .iter()
                .all(|s| s.n_correct + s.n_wrong + s.n_missed == s.n_events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Prediction, TextualizedEvent};

    fn vocab() -> Vec<ActivityLabel> {
        (1..=4).map(|i| ActivityLabel::new(i, format!("a{i}"))).collect()
    }

    fn window(truth: &[LabelId]) -> Window {
        Window {
            window_id: 0,
            session_id: "s".into(),
            events: (0..truth.len() as u64)
                .map(|id| TextualizedEvent {
                    id,
                    time: "00:00:00".into(),
                    event: "e".into(),
                })
                .collect(),
            truth: truth.to_vec(),
        }
    }

    fn result(preds: &[(u64, &str)], failure: Option<Failure>) -> InferenceResult {
        InferenceResult {
            session_id: "s".into(),
            window_id: 0,
            raw_text: String::new(),
            reasoning_trace: String::new(),
            predictions: preds
                .iter()
                .map(|(id, l)| Prediction {
                    event_id: *id,
                    raw_label: l.to_string(),
                    matched: None,
                })
                .collect(),
            failure,
            latency_ms: 0,
            attempt_count: 1,
        }
    }

    #[test]
    fn all_correct() {
        let truth = [1, 1, 2, 2, 3, 3, 4, 4, 1, 2];
        let w = window(&truth);
        let preds: Vec<(u64, String)> = truth
            .iter()
            .enumerate()
            .map(|(i, l)| (i as u64, format!("{l}. a{l}")))
            .collect();
        let preds: Vec<(u64, &str)> = preds.iter().map(|(i, s)| (*i, s.as_str())).collect();
        let m = score_session(&[w], &[result(&preds, None)], &vocab()).unwrap();
        assert_eq!(m.f1_micro, 1.0);
        assert_eq!(m.f1_macro, 1.0);
        assert_eq!(m.n_missed, 0);
    }

    #[test]
    fn transport_failure_misses_everything() {
        let w = window(&[1, 2, 3]);
        // predictions on a transport-failed result are ignored
        let m = score_session(&[w], &[result(&[(0, "1")], Some(Failure::TransportFailed))], &vocab()).unwrap();
        assert_eq!(m.n_missed, 3);
        assert_eq!(m.f1_micro, 0.0);
        assert_eq!(m.missed_pct, 100.0);
    }

    #[test]
    fn unmatched_label_is_wrong_not_missed() {
        let w = window(&[1, 2]);
        let m = score_session(&[w], &[result(&[(0, "making supper"), (1, "2")], None)], &vocab()).unwrap();
        assert_eq!((m.n_correct, m.n_wrong, m.n_missed), (1, 1, 0));
        assert_eq!(m.per_label_counts[&1], LabelCounts { tp: 0, fp: 0, fn_: 1 });
    }

    #[test]
    fn window_result_mismatch_errors() {
        let w = window(&[1]);
        assert!(score_session(&[w.clone()], &[], &vocab()).is_err());
        let r = result(&[], None);
        assert!(score_session(&[w], &[r.clone(), r], &vocab()).is_err());
    }

    #[test]
    fn aggregate_population_std() {
        let sessions: Vec<_> = [10.0, 20.0, 30.0]
            .iter()
            .map(|&p| SessionMetrics {
                session_id: "s".into(),
                n_events: 10,
                n_correct: 0,
                n_wrong: 10,
                n_missed: 0,
                f1_macro: 0.5,
                f1_micro: 0.25,
                missed_pct: p,
                per_label_counts: BTreeMap::new(),
            })
            .collect();
        let r = aggregate(sessions.clone(), ReportInfo::default()).unwrap();
        assert_eq!(r.missed_display, "20.00 ± 8.16");
        assert_eq!(r.mean_f1, 0.5);
        assert_eq!(r.mean_f1_micro, 0.25);
        assert!(r.is_consistent());

        let one = aggregate(sessions[..1].to_vec(), ReportInfo::default()).unwrap();
        assert_eq!(one.missed_pct_std, 0.0);
        assert_eq!(one.missed_display, "10.00 ± 0.00");
        assert!(aggregate(vec![], ReportInfo::default()).is_err());
    }

    #[test]
    fn table_style_formatting() {
        assert_eq!(format_mean_std(16.66, 8.84), "16.66 ± 8.84");
        assert_eq!(format_mean_std(0.0, 0.0), "0.00 ± 0.00");
    }
}
