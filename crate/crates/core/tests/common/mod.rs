#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use llmhar_core::experiment::{ExperimentConfig, LoadedConfig, ReportSpec, SplitConfig, Target};
use llmhar_core::gateway::{BackendConfig, BackendKind, Backoff, MockMode, MockScript, MockSource};
use llmhar_core::ingest::{self, Dataset};
use llmhar_core::model::{ActivityLabel, HomeProfile, LabelId, TextualizedEvent, Window};
use llmhar_core::prompt::PromptOptions;
use llmhar_core::synthetic::{generate_synthetic, SyntheticSpec};
use llmhar_core::window;

pub struct Home {
    pub spec: SyntheticSpec,
    pub profile: HomeProfile,
    pub dataset: Dataset,
}

pub fn home(sessions: usize, events: usize, residents: usize, seed: u64) -> Home {
    let spec = SyntheticSpec::default_home(sessions, events, residents);
    let dataset = generate_synthetic(&spec, seed).unwrap();
    Home {
        profile: spec.to_profile(),
        spec,
        dataset,
    }
}

/// Writes the home's event log and profile under `dir`.
pub fn write_home(home: &Home, dir: &Path) {
    ingest::write_event_log(&home.dataset, &dir.join("events.jsonl")).unwrap();
    std::fs::write(
        dir.join("profile.json"),
        serde_json::to_string_pretty(&home.profile).unwrap(),
    )
    .unwrap();
}

pub fn windows(dataset: &Dataset, w: usize) -> Vec<Window> {
    dataset
        .sessions
        .iter()
        .flat_map(|s| {
            let (events, truth) = window::textualize_session(&s.events).unwrap();
            window::segment(&s.id, &events, &truth, w).unwrap()
        })
        .collect()
}

pub fn mock(mode: MockMode) -> BackendConfig {
    mock_script(MockScript {
        mode,
        fail_windows: vec![],
    })
}

pub fn mock_script(script: MockScript) -> BackendConfig {
    let mut cfg = BackendConfig::new(BackendKind::Mock {
        script: MockSource::Inline(script),
    });
    cfg.backoff = Backoff {
        initial_ms: 1,
        multiplier: 1.0,
        max_ms: 1,
    };
    cfg
}

pub fn oracle(think: bool, drop_every: Option<u64>) -> BackendConfig {
    mock(MockMode::Oracle { think, drop_every })
}

/// Config for a run over every session of the home written to `dir`.
pub fn config(dir: &Path, run_dir: &str, backend: BackendConfig) -> LoadedConfig {
    ExperimentConfig {
        dataset: dir.join("events.jsonl"),
        profile: dir.join("profile.json"),
        split: SplitConfig::FirstK { k: 0 },
        window_size: 10,
        target: Target::Test,
        backend,
        run_dir: dir.join(run_dir),
        report: ReportSpec {
            model: Some("oracle".into()),
            params_billion: Some(1.0),
            ..Default::default()
        },
        prompt: PromptOptions::default(),
        ablation_ks: vec![],
    }
    .into_loaded()
}

pub fn window_of(session: &str, id: u32, ids: &[u64], truth: &[LabelId]) -> Window {
    Window {
        window_id: id,
        session_id: session.into(),
        events: ids
            .iter()
            .map(|i| TextualizedEvent {
                id: *i,
                time: "12:00:00".into(),
                event: format!("room sensor{i} turned ON"),
            })
            .collect(),
        truth: truth.to_vec(),
    }
}

pub fn vocab(n: u32) -> Vec<ActivityLabel> {
    (1..=n).map(|i| ActivityLabel::new(i, format!("activity {i}"))).collect()
}

/// Outcome of one event in a hand-computed confusion tally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Missed,
    Unmatched,
    Predicted(LabelId),
}

/// Direct per-class F1 from (truth, outcome) pairs: macro over classes that
/// occur in the truth, micro from pooled counts.
pub fn reference_f1(pairs: &[(LabelId, Outcome)]) -> (f64, f64, f64) {
    let truth_classes: BTreeSet<LabelId> = pairs.iter().map(|(t, _)| *t).collect();
    let mut tp: BTreeMap<LabelId, f64> = BTreeMap::new();
    let mut fp: BTreeMap<LabelId, f64> = BTreeMap::new();
    let mut fn_: BTreeMap<LabelId, f64> = BTreeMap::new();
    let mut missed = 0.0;
    for (t, o) in pairs {
        match o {
            Outcome::Predicted(p) if p == t => *tp.entry(*t).or_default() += 1.0,
            Outcome::Predicted(p) => {
                *fn_.entry(*t).or_default() += 1.0;
                *fp.entry(*p).or_default() += 1.0;
            }
            Outcome::Unmatched => *fn_.entry(*t).or_default() += 1.0,
            Outcome::Missed => {
                missed += 1.0;
                *fn_.entry(*t).or_default() += 1.0;
            }
        }
    }
    let get = |m: &BTreeMap<LabelId, f64>, c: LabelId| m.get(&c).copied().unwrap_or(0.0);
    let f1 = |tp: f64, fp: f64, fn_: f64| {
        if tp == 0.0 {
            0.0
        } else {
            let p = tp / (tp + fp);
            let r = tp / (tp + fn_);
            2.0 * p * r / (p + r)
        }
    };
    let macro_f1 = if truth_classes.is_empty() {
        0.0
    } else {
        truth_classes
            .iter()
            .map(|c| f1(get(&tp, *c), get(&fp, *c), get(&fn_, *c)))
            .sum::<f64>()
            / truth_classes.len() as f64
    };
    let stp: f64 = tp.values().sum();
    let sfp: f64 = fp.values().sum();
    let sfn: f64 = fn_.values().sum();
    let micro = f1(stp, sfp, sfn);
    let missed_pct = if pairs.is_empty() {
        0.0
    } else {
        100.0 * missed / pairs.len() as f64
    };
    (macro_f1, micro, missed_pct)
}

#[derive(Debug, serde::Deserialize)]
pub struct GoldenCase {
    pub name: String,
    pub raw: String,
    pub expect: Vec<(u64, String, Option<LabelId>)>,
    pub failure: Option<llmhar_core::model::Failure>,
}

pub fn golden_cases() -> Vec<GoldenCase> {
    let text = include_str!("../fixtures/extraction_golden.json");
    serde_json::from_str(text).unwrap()
}

pub fn golden_vocab() -> Vec<ActivityLabel> {
    vec![
        ActivityLabel::new(1, "sleeping"),
        ActivityLabel::new(2, "dressing"),
        ActivityLabel::new(19, "preparing dinner"),
        ActivityLabel::new(25, "personal washing"),
    ]
}

/// Runs one golden case; `Err` describes the first mismatch.
pub fn check_golden(case: &GoldenCase) -> Result<(), String> {
    use llmhar_core::extract::{classify_output, extract_predictions, resolve_predictions};
    let w = window_of("g", 0, &[0, 1, 2, 3, 4, 5], &[1, 1, 19, 25, 19, 2]);
    let mut preds = extract_predictions(&case.raw, &w);
    resolve_predictions(&mut preds, &golden_vocab());
    let got: Vec<(u64, String, Option<LabelId>)> = preds
        .iter()
        .map(|p| (p.event_id, p.raw_label.clone(), p.matched))
        .collect();
    if got != case.expect {
        return Err(format!("{}: got {got:?}, want {:?}", case.name, case.expect));
    }
    let failure = classify_output(&case.raw, &preds);
    if failure != case.failure {
        return Err(format!("{}: failure {failure:?}, want {:?}", case.name, case.failure));
    }
    Ok(())
}

/// Deterministic adversarial completions: JSON and tag fragments, alternating
/// with random bytes decoded lossily.
pub fn fuzz_inputs(n: usize, seed: u64) -> Vec<String> {
    use rand::{Rng, SeedableRng};
    const PIECES: &[&str] = &[
        "[", "]", "{", "}", "\"id\"", "\"activity\"", "\"label\"", ":", ",", "\"", "\\", "0", "7",
        "19", "-1", "1e400", "18446744073709551616", "\"19. preparing dinner\"", "<think>",
        "</think>", "<think", "null", "true", "é", "🙂", "\u{0}", " ", "\n", "```json", "```",
        "[{\"id\":", "{\"id\": 3, \"activity\": \"1\"}", "]]]]", "[[[[",
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            if i % 2 == 1 {
                let bytes: Vec<u8> = (0..rng.random_range(0..200)).map(|_| rng.random()).collect();
                return String::from_utf8_lossy(&bytes).into_owned();
            }
            let len = rng.random_range(0..60);
            (0..len)
                .map(|_| PIECES[rng.random_range(0..PIECES.len())])
                .collect::<String>()
        })
        .collect()
}

/// Invariants every extraction result must satisfy for window ids 0..10.
pub fn check_extraction_invariants(raw: &str) -> Result<(), String> {
    use llmhar_core::extract::{extract_predictions, resolve_predictions, split_reasoning};
    let ids: Vec<u64> = (0..10).collect();
    let w = window_of("f", 0, &ids, &[1; 10]);
    let _ = split_reasoning(raw);
    let mut preds = extract_predictions(raw, &w);
    resolve_predictions(&mut preds, &golden_vocab());
    let mut last = None;
    for p in &preds {
        if p.event_id >= 10 {
            return Err(format!("id {} outside window", p.event_id));
        }
        if last.is_some_and(|l| l >= p.event_id) {
            return Err("predictions out of window order or duplicated".into());
        }
        last = Some(p.event_id);
        if let Some(m) = p.matched {
            if !golden_vocab().iter().any(|l| l.index == m) {
                return Err(format!("matched {m} not in vocabulary"));
            }
        }
    }
    Ok(())
}

/// flatten(segment(xs, w)) == xs and every window but the last has size w.
pub fn window_law(events: &[TextualizedEvent], w: usize) -> Result<(), String> {
    let truth: Vec<LabelId> = events.iter().map(|e| (e.id % 7) as LabelId + 1).collect();
    let windows = window::segment("law", events, &truth, w).map_err(|e| e.to_string())?;
    let flat: Vec<TextualizedEvent> = windows.iter().flat_map(|x| x.events.clone()).collect();
    if flat != events {
        return Err(format!("flatten differs for n = {}, w = {w}", events.len()));
    }
    let flat_truth: Vec<LabelId> = windows.iter().flat_map(|x| x.truth.clone()).collect();
    if flat_truth != truth {
        return Err("truth labels not carried alongside events".into());
    }
    if let Some((_, init)) = windows.split_last() {
        if init.iter().any(|x| x.events.len() != w) {
            return Err(format!("short inner window for n = {}, w = {w}", events.len()));
        }
    }
    if windows.iter().enumerate().any(|(i, x)| x.window_id as usize != i || x.events.is_empty()) {
        return Err("window ids not consecutive or empty window".into());
    }
    Ok(())
}

pub fn random_events(rng: &mut impl rand::Rng, n: usize) -> Vec<TextualizedEvent> {
    (0..n as u64)
        .map(|id| TextualizedEvent {
            id,
            time: format!("{:02}:{:02}:{:02}", rng.random_range(0..24), rng.random_range(0..60), rng.random_range(0..60)),
            event: format!("room{} sensor{} turned ON", rng.random_range(0..5), rng.random_range(0..9)),
        })
        .collect()
}
