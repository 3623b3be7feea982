//! Prompt execution against an OpenAI-compatible endpoint, a scripted mock,
//! or a replay of an earlier run.
//!
//! Transport problems never abort a run: after the retry budget is spent the
//! window is recorded with `failure = transport-failed` and scored as missed.
//! Only I/O errors on the run store and replay misses are fatal.

mod http;
mod mock;
mod store;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::error::{Error, Result};
use crate::extract::{classify_output, extract_predictions, resolve_predictions, split_reasoning};
use crate::model::{ActivityLabel, Failure, HomeProfile, InferenceResult, Window};
use crate::prompt::{build_prompt, PromptOptions, PromptText};

pub use mock::{oracle_answer, MockMode, MockScript, MockSource};
pub use store::{RunIndex, RunStore, SessionEntry, StoredWindow, WindowMeta};

use http::HttpBackend;
use mock::MockBackend;
use store::ReplayStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendKind {
    Http {
        /// Server base URL; requests go to `<endpoint>/v1/chat/completions`.
        endpoint: String,
        model: String,
        #[serde(default)]
        temperature: f64,
        #[serde(default = "default_max_tokens")]
        max_tokens: u32,
        /// Environment variable holding the bearer token (default `OPENAI_API_KEY`).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
    },
    Mock {
        script: MockSource,
    },
    Replay {
        run_dir: PathBuf,
    },
}

fn default_max_tokens() -> u32 {
    32_768
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backoff {
    pub initial_ms: u64,
    pub multiplier: f64,
    pub max_ms: u64,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            initial_ms: 500,
            multiplier: 2.0,
            max_ms: 30_000,
        }
    }
}

impl Backoff {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let ms = self.initial_ms as f64 * self.multiplier.powi(retry.saturating_sub(1) as i32);
        Duration::from_millis(ms.min(self.max_ms as f64).max(0.0) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub backoff: Backoff,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_retries() -> u32 {
    3
}

fn default_in_flight() -> usize {
    4
}

fn default_timeout() -> u64 {
    600
}

impl BackendConfig {
    pub fn new(kind: BackendKind) -> Self {
        BackendConfig {
            kind,
            max_retries: default_retries(),
            backoff: Backoff::default(),
            max_in_flight: default_in_flight(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_in_flight == 0 {
            return Err(Error::Backend("max_in_flight must be at least 1".into()));
        }
        if self.backoff.multiplier < 1.0 {
            return Err(Error::Backend("backoff multiplier must be at least 1".into()));
        }
        Ok(())
    }

    /// Model name recorded with each window.
    pub fn model_name(&self) -> String {
        match &self.kind {
            BackendKind::Http { model, .. } => model.clone(),
            BackendKind::Mock { .. } => "mock".into(),
            BackendKind::Replay { run_dir } => format!("replay:{}", run_dir.display()),
        }
    }
}

#[derive(Debug)]
pub(crate) enum CallError {
    Transient(String),
    Fatal(String),
}

enum Backend {
    Http(HttpBackend),
    Mock(MockBackend),
    Replay(ReplayStore),
}

/// Summary of a [`Gateway::run_windows`] call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    /// One result per input window, in input order.
    pub results: Vec<InferenceResult>,
    /// Windows loaded from the run directory instead of being queried.
    pub reused: usize,
    /// Windows sent to the backend during this call.
    pub queried: usize,
}

pub struct Gateway {
    backend: Backend,
    cfg: BackendConfig,
    vocabulary: Vec<ActivityLabel>,
    model: String,
    calls: AtomicUsize,
}

impl Gateway {
    pub fn new(cfg: &BackendConfig, profile: &HomeProfile) -> Result<Gateway> {
        cfg.validate()?;
        let backend = match &cfg.kind {
            BackendKind::Http {
                endpoint,
                model,
                temperature,
                max_tokens,
                api_key_env,
            } => Backend::Http(HttpBackend::new(
                endpoint,
                model,
                *temperature,
                *max_tokens,
                api_key_env.as_deref(),
                Duration::from_secs(cfg.timeout_secs),
            )?),
            BackendKind::Mock { script } => {
                Backend::Mock(MockBackend::new(script.load()?, profile.labels.clone()))
            }
            BackendKind::Replay { run_dir } => Backend::Replay(ReplayStore::open(run_dir)?),
        };
        Ok(Gateway {
            backend,
            cfg: cfg.clone(),
            vocabulary: profile.labels.clone(),
            model: cfg.model_name(),
            calls: AtomicUsize::new(0),
        })
    }

    /// Backend requests issued so far, retries included. Replays are not counted.
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    fn finish(
        &self,
        window: &Window,
        raw_text: String,
        failure: Option<Failure>,
        latency_ms: u64,
        attempt_count: u32,
    ) -> InferenceResult {
        if failure == Some(Failure::TransportFailed) {
            return InferenceResult {
                session_id: window.session_id.clone(),
                window_id: window.window_id,
                raw_text,
                reasoning_trace: String::new(),
                predictions: Vec::new(),
                failure,
                latency_ms,
                attempt_count,
            };
        }
        let reasoning_trace = split_reasoning(&raw_text).0.to_string();
        let mut predictions = extract_predictions(&raw_text, window);
        resolve_predictions(&mut predictions, &self.vocabulary);
        let failure = classify_output(&raw_text, &predictions);
        InferenceResult {
            session_id: window.session_id.clone(),
            window_id: window.window_id,
            raw_text,
            reasoning_trace,
            predictions,
            failure,
            latency_ms,
            attempt_count,
        }
    }

    async fn call(&self, window: &Window, prompt: &PromptText) -> Result<String, CallError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.backend {
            Backend::Http(b) => b.complete(prompt).await,
            Backend::Mock(b) => b.complete(window, prompt),
            Backend::Replay(_) => unreachable!("replay never calls a backend"),
        }
    }

    /// Runs one prompt, retrying transient failures with exponential backoff.
    pub async fn infer(&self, window: &Window, prompt: &PromptText) -> Result<InferenceResult> {
        if let Backend::Replay(store) = &self.backend {
            let stored = store
                .get(&prompt.prompt_hash)
                .ok_or_else(|| Error::ReplayMiss(prompt.prompt_hash.clone()))?;
            return Ok(self.from_stored(window, stored));
        }

        let started = Instant::now();
        let mut attempts = 0u32;
        let outcome = loop {
            attempts += 1;
            match self.call(window, prompt).await {
                Ok(text) => break Ok(text),
                Err(CallError::Transient(msg)) if attempts <= self.cfg.max_retries => {
                    let delay = self.cfg.backoff.delay(attempts);
                    debug!(window = %window.key(), attempt = attempts, ?delay, "retrying: {msg}");
                    tokio::time::sleep(delay).await;
                }
                Err(CallError::Transient(msg)) | Err(CallError::Fatal(msg)) => break Err(msg),
            }
        };
        let latency_ms = match self.backend {
            Backend::Mock(_) => 0,
            _ => started.elapsed().as_millis() as u64,
        };
        Ok(match outcome {
            Ok(text) => self.finish(window, text, None, latency_ms, attempts),
            Err(msg) => {
                warn!(window = %window.key(), attempts, "transport failed: {msg}");
                self.finish(
                    window,
                    String::new(),
                    Some(Failure::TransportFailed),
                    latency_ms,
                    attempts,
                )
            }
        })
    }

    fn from_stored(&self, window: &Window, stored: &StoredWindow) -> InferenceResult {
        let failure = stored
            .meta
            .failure
            .filter(|f| *f == Failure::TransportFailed);
        self.finish(
            window,
            stored.raw_text.clone(),
            failure,
            stored.meta.latency_ms,
            stored.meta.attempt_count,
        )
    }

    fn meta_for(&self, window: &Window, prompt: &PromptText, result: &InferenceResult) -> WindowMeta {
        WindowMeta {
            session_id: window.session_id.clone(),
            window_id: window.window_id,
            prompt_hash: prompt.prompt_hash.clone(),
            model: self.model.clone(),
            event_ids: window.events.iter().map(|e| e.id).collect(),
            failure: result.failure,
            latency_ms: result.latency_ms,
            attempt_count: result.attempt_count,
        }
    }

    /// Runs every window, persisting each one under `run_dir` as it completes.
    ///
    /// Windows already present in `run_dir` are loaded instead of queried,
    /// except those recorded as transport failures, which are retried. At most
    /// `max_in_flight` windows are in progress at once.
    pub async fn run_windows(
        &self,
        windows: &[Window],
        profile: &HomeProfile,
        options: PromptOptions,
        run_dir: &Path,
    ) -> Result<RunOutcome> {
        let store = RunStore::new(run_dir);
        let mut slots: Vec<Option<InferenceResult>> = vec![None; windows.len()];
        let mut pending = Vec::new();
        for (i, window) in windows.iter().enumerate() {
            let prompt = build_prompt(window, profile, options);
            match store.load(&window.key())? {
                Some(stored) if stored.meta.prompt_hash != prompt.prompt_hash => {
                    return Err(Error::RunStore(format!(
                        "window {} in {} was recorded with a different prompt; use a fresh run directory",
                        window.key(),
                        run_dir.display()
                    )));
                }
                Some(stored) if stored.meta.failure != Some(Failure::TransportFailed) => {
                    slots[i] = Some(self.from_stored(window, &stored));
                }
                _ => pending.push((i, window, prompt)),
            }
        }
        let reused = windows.len() - pending.len();
        let queried = pending.len();

        let mut completions = stream::iter(pending)
            .map(|(i, window, prompt)| {
                let store = &store;
                async move {
                    let result = self.infer(window, &prompt).await?;
                    store.save(&prompt, &result.raw_text, &self.meta_for(window, &prompt, &result))?;
                    Ok::<_, Error>((i, result))
                }
            })
            .buffer_unordered(self.cfg.max_in_flight);
        while let Some(done) = completions.next().await {
            let (i, result) = done?;
            slots[i] = Some(result);
        }

        Ok(RunOutcome {
            results: slots
                .into_iter()
                .map(|r| r.expect("every window has a result"))
                .collect(),
            reused,
            queried,
        })
    }
}

/// Runs `windows` with a fresh gateway built from `cfg`.
pub async fn run_windows(
    windows: &[Window],
    profile: &HomeProfile,
    cfg: &BackendConfig,
    options: PromptOptions,
    run_dir: &Path,
) -> Result<RunOutcome> {
    Gateway::new(cfg, profile)?
        .run_windows(windows, profile, options, run_dir)
        .await
}
