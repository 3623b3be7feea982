//! Experiment configs and the commands built on them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::info;

use crate::distill::{self, CorpusManifest};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::gateway::{BackendConfig, BackendKind, Gateway, MockSource, RunIndex, RunStore, SessionEntry};
use crate::ingest::{self, Dataset, Split, SplitPolicy};
use crate::model::{validate_profile, HomeProfile, Violation, Window};
use crate::prompt::PromptOptions;
use crate::report::{self, EmittedReport};
use crate::score::{self, DatasetReport, F1Variant, ReportInfo};
use crate::synthetic::{self, SyntheticSpec};
use crate::window;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum SplitConfig {
    FirstK { k: usize },
    PerScenario { manifest: PathBuf },
    Explicit { train: Vec<String>, test: Vec<String> },
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig::FirstK { k: 0 }
    }
}

/// Which sessions receive inference. Scoring always covers the test split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Test,
    /// Train and test; used for teacher runs that feed a corpus.
    All,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportSpec {
    /// Defaults to the backend model name.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub params_billion: Option<f64>,
    #[serde(default)]
    pub headline: F1Variant,
    #[serde(default)]
    pub finetune_sessions: Option<u32>,
    #[serde(default)]
    pub baseline: Option<String>,
}

fn default_window_size() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub profile: PathBuf,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "default_window_size")]
    pub window_size: usize,
    #[serde(default)]
    pub target: Target,
    pub backend: BackendConfig,
    pub run_dir: PathBuf,
    #[serde(default)]
    pub report: ReportSpec,
    #[serde(default)]
    pub prompt: PromptOptions,
    /// Session counts for `ablate`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ablation_ks: Vec<usize>,
}

/// A config with paths resolved, plus the text it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub snapshot: serde_json::Value,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    /// Reads a config; relative paths are taken from the config's directory.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let snapshot: serde_json::Value = fsutil::read_json(path)?;
        let mut config: ExperimentConfig = serde_json::from_value(snapshot.clone())
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(LoadedConfig { config, snapshot })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.dataset = resolve(base, &self.dataset);
        self.profile = resolve(base, &self.profile);
        self.run_dir = resolve(base, &self.run_dir);
        if let SplitConfig::PerScenario { manifest } = &mut self.split {
            *manifest = resolve(base, manifest);
        }
        match &mut self.backend.kind {
            BackendKind::Mock {
                script: MockSource::Path(p),
            } => *p = resolve(base, p),
            BackendKind::Replay { run_dir } => *run_dir = resolve(base, run_dir),
            _ => {}
        }
    }

    pub fn into_loaded(self) -> LoadedConfig {
        let snapshot = serde_json::to_value(&self).expect("config serializes");
        LoadedConfig {
            config: self,
            snapshot,
        }
    }

    fn split_policy(&self) -> Result<SplitPolicy> {
        Ok(match &self.split {
            SplitConfig::FirstK { k } => SplitPolicy::FirstK(*k),
            SplitConfig::PerScenario { manifest } => {
                SplitPolicy::PerScenario(ingest::load_scenario_manifest(manifest)?)
            }
            SplitConfig::Explicit { train, test } => SplitPolicy::Explicit {
                train: train.clone(),
                test: test.clone(),
            },
        })
    }
}

/// Loads profile and dataset and fails on any profile violation.
pub fn load_checked(profile_path: &Path, dataset_path: &Path) -> Result<(HomeProfile, Dataset)> {
    let profile = HomeProfile::load(profile_path)?;
    let dataset = ingest::load_dataset_unchecked(dataset_path, &profile)?;
    let violations = validate_profile(&profile, &dataset.sessions);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(Error::Profile(format!(
            "{} does not fit {}:\n{}",
            profile_path.display(),
            dataset_path.display(),
            lines.join("\n")
        )));
    }
    Ok((profile, dataset))
}

pub fn validate(profile_path: &Path, dataset_path: &Path) -> Result<Vec<Violation>> {
    let profile = HomeProfile::load(profile_path)?;
    let dataset = ingest::load_dataset_unchecked(dataset_path, &profile)?;
    Ok(validate_profile(&profile, &dataset.sessions))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: DatasetReport,
    pub report_path: PathBuf,
    pub split: Split,
    pub windows: usize,
    pub reused: usize,
    pub queried: usize,
    pub backend_calls: usize,
}

/// Windows of `ids`, in the given order, each session windowed separately.
pub fn windows_for(dataset: &Dataset, ids: &[String], window_size: usize) -> Result<BTreeMap<String, Vec<Window>>> {
    let mut out = BTreeMap::new();
    for id in ids {
        let session = dataset
            .session(id)
            .ok_or_else(|| Error::Split(format!("unknown session {id}")))?;
        let (events, truth) = window::textualize_session(&session.events)?;
        out.insert(id.clone(), window::segment(id, &events, &truth, window_size)?);
    }
    Ok(out)
}

fn report_model(cfg: &ExperimentConfig) -> Result<String> {
    if let Some(m) = &cfg.report.model {
        return Ok(m.clone());
    }
    Ok(match &cfg.backend.kind {
        BackendKind::Replay { run_dir } => RunStore::new(run_dir).read_index()?.model,
        _ => cfg.backend.model_name(),
    })
}

/// Runs inference for the configured sessions, then scores the test split
/// and writes `report.json` into the run directory. Completed windows found
/// in the run directory are reused.
pub async fn cmd_run(loaded: &LoadedConfig) -> Result<RunSummary> {
    let cfg = &loaded.config;
    let (profile, dataset) = load_checked(&cfg.profile, &cfg.dataset)?;
    let split = ingest::split(&dataset, &cfg.split_policy()?)?;
    if split.test.is_empty() {
        return Err(Error::Split("the split leaves no test sessions to score".into()));
    }
    let infer_ids: Vec<String> = match cfg.target {
        Target::Test => split.test.clone(),
        Target::All => dataset
            .session_ids()
            .into_iter()
            .filter(|id| split.train.contains(id) || split.test.contains(id))
            .collect(),
    };

    // textualize everything up front so mapping errors surface before any call
    let by_session = windows_for(&dataset, &infer_ids, cfg.window_size)?;
    let windows: Vec<Window> = infer_ids
        .iter()
        .flat_map(|id| by_session[id].iter().cloned())
        .collect();

    let gateway = Gateway::new(&cfg.backend, &profile)?;
    let store = RunStore::new(&cfg.run_dir);
    let index = RunIndex {
        dataset: dataset.name.clone(),
        model: gateway.model().to_string(),
        sessions: infer_ids
            .iter()
            .map(|id| SessionEntry {
                session_id: id.clone(),
                windows: by_session[id].len() as u32,
            })
            .collect(),
    };
    if store.index_path().exists() {
        let existing = store.read_index()?;
        if existing.sessions != index.sessions || existing.dataset != index.dataset {
            return Err(Error::RunStore(format!(
                "{} holds a different run; use a fresh run directory",
                cfg.run_dir.display()
            )));
        }
    }
    fsutil::write_json(&cfg.run_dir.join("config.json"), &loaded.snapshot)?;
    fsutil::write_json(&cfg.run_dir.join("split.json"), &split)?;
    store.write_index(&index)?;

    let outcome = gateway
        .run_windows(&windows, &profile, cfg.prompt, &cfg.run_dir)
        .await?;
    info!("{} new inferences", outcome.queried);

    let mut sessions = Vec::with_capacity(split.test.len());
    for id in &split.test {
        let session_windows = &by_session[id];
        let results: Vec<_> = outcome
            .results
            .iter()
            .filter(|r| &r.session_id == id)
            .cloned()
            .collect();
        sessions.push(score::score_session(session_windows, &results, &profile.labels)?);
    }
    let info = ReportInfo {
        model: report_model(cfg)?,
        params_billion: cfg.report.params_billion,
        dataset: dataset.name.clone(),
        headline: cfg.report.headline,
        window_size: cfg.window_size,
        finetune_sessions: cfg.report.finetune_sessions,
        baseline: cfg.report.baseline.clone(),
    };
    let report = score::aggregate(sessions, info)?;
    let report_path = cfg.run_dir.join("report.json");
    fsutil::write_json(&report_path, &report)?;

    Ok(RunSummary {
        report,
        report_path,
        split,
        windows: windows.len(),
        reused: outcome.reused,
        queried: outcome.queried,
        backend_calls: gateway.backend_calls(),
    })
}

fn train_sessions(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let profile = HomeProfile::load(&cfg.profile)?;
    let dataset = ingest::load_dataset_unchecked(&cfg.dataset, &profile)?;
    let split = ingest::split(&dataset, &cfg.split_policy()?)?;
    if split.train.is_empty() {
        return Err(Error::Corpus("the split has no train sessions to distill".into()));
    }
    Ok(split.train)
}

/// Builds a corpus from the train sessions of a finished teacher run.
pub fn cmd_distill(loaded: &LoadedConfig, out: &Path) -> Result<CorpusManifest> {
    let cfg = &loaded.config;
    distill::build_corpus(&cfg.run_dir, &train_sessions(cfg)?, out)
}

/// Writes `corpus_full.jsonl` and one `corpus_k{k}.jsonl` per `k`.
pub fn cmd_ablate(loaded: &LoadedConfig, out_dir: &Path, ks: &[usize]) -> Result<Vec<CorpusManifest>> {
    let ks = if ks.is_empty() { &loaded.config.ablation_ks[..] } else { ks };
    if ks.is_empty() {
        return Err(Error::Corpus("no session counts given for the ablation".into()));
    }
    let full = out_dir.join("corpus_full.jsonl");
    cmd_distill(loaded, &full)?;
    ks.iter()
        .map(|k| distill::subset_by_sessions(&full, *k, &out_dir.join(format!("corpus_k{k}.jsonl"))))
        .collect()
}

/// Reads report files (one report or an array per file) and emits the
/// merged table and charts.
pub fn cmd_report(paths: &[PathBuf], out_dir: &Path) -> Result<EmittedReport> {
    if paths.is_empty() {
        return Err(Error::Report("no report files given".into()));
    }
    let mut reports = Vec::new();
    for p in paths {
        let value: serde_json::Value = fsutil::read_json(p)?;
        if value.is_array() {
            let many: Vec<DatasetReport> =
                serde_json::from_value(value).map_err(|e| Error::json(p, e))?;
            reports.extend(many);
        } else {
            reports.push(serde_json::from_value(value).map_err(|e| Error::json(p, e))?);
        }
    }
    report::emit_report(&reports, out_dir)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    pub events: PathBuf,
    pub profile: PathBuf,
    pub manifest: PathBuf,
    pub sessions: usize,
    pub event_count: usize,
}

/// Writes `events.jsonl`, `profile.json` and `scenarios.json` for a
/// synthetic home.
pub fn cmd_synth(spec: &SyntheticSpec, seed: u64, out_dir: &Path) -> Result<SynthOutput> {
    let dataset = synthetic::generate_synthetic(spec, seed)?;
    let events = out_dir.join("events.jsonl");
    let profile = out_dir.join("profile.json");
    let manifest = out_dir.join("scenarios.json");
    ingest::write_event_log(&dataset, &events)?;
    fsutil::write_json(&profile, &spec.to_profile())?;
    fsutil::write_json(&manifest, &synthetic::synthetic_manifest(&dataset))?;
    Ok(SynthOutput {
        events,
        profile,
        manifest,
        sessions: dataset.sessions.len(),
        event_count: dataset.event_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"dataset":"d.jsonl","profile":"p.json","run_dir":"runs/x",
                "backend":{"kind":"mock","script":{"mode":"oracle"}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.window_size, 10);
        assert_eq!(cfg.target, Target::Test);
        assert_eq!(cfg.split, SplitConfig::FirstK { k: 0 });
        assert!(!cfg.prompt.static_in_system);
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let mut cfg: ExperimentConfig = serde_json::from_str(
            r#"{"dataset":"d.jsonl","profile":"/abs/p.json","run_dir":"runs/x",
                "split":{"policy":"per-scenario","manifest":"m.json"},
                "backend":{"kind":"replay","run_dir":"runs/teacher"}}"#,
        )
        .unwrap();
        cfg.resolve_paths(Path::new("/cfg"));
        assert_eq!(cfg.dataset, PathBuf::from("/cfg/d.jsonl"));
        assert_eq!(cfg.profile, PathBuf::from("/abs/p.json"));
        assert_eq!(
            cfg.split,
            SplitConfig::PerScenario {
                manifest: "/cfg/m.json".into()
            }
        );
        assert_eq!(
            cfg.backend.kind,
            BackendKind::Replay {
                run_dir: "/cfg/runs/teacher".into()
            }
        );
    }
}
