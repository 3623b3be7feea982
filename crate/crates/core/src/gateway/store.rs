//! On-disk run store.
//!
//! ```text
//! run_dir/
//!   run.json                       session order and window counts
//!   windows/<session>/<window_id>/
//!     prompt.txt                   user message, byte-exact
//!     system.txt                   system message (only when non-empty)
//!     response.txt                 raw completion
//!     meta.json                    written last; its presence marks the window done
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::model::{Failure, WindowKey};
use crate::prompt::PromptText;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowMeta {
    pub session_id: String,
    pub window_id: u32,
    pub prompt_hash: String,
    pub model: String,
    pub event_ids: Vec<u64>,
    pub failure: Option<Failure>,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

/// A window as persisted: prompt, completion and metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredWindow {
    pub meta: WindowMeta,
    pub system_text: String,
    pub user_text: String,
    pub raw_text: String,
}

impl StoredWindow {
    pub fn prompt(&self) -> PromptText {
        PromptText::new(self.system_text.clone(), self.user_text.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub session_id: String,
    pub windows: u32,
}

/// Index of a run: which sessions it covers, in dataset order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunIndex {
    pub dataset: String,
    pub model: String,
    pub sessions: Vec<SessionEntry>,
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn window_dir(&self, key: &WindowKey) -> PathBuf {
        self.root
            .join("windows")
            .join(&key.session_id)
            .join(key.window_id.to_string())
    }

    pub fn index_path(&self) -> PathBuf {
        self.root.join("run.json")
    }

    pub fn write_index(&self, index: &RunIndex) -> Result<()> {
        fsutil::write_json(&self.index_path(), index)
    }

    pub fn read_index(&self) -> Result<RunIndex> {
        let path = self.index_path();
        if !path.exists() {
            return Err(Error::RunStore(format!(
                "{} is not a run directory (no run.json)",
                self.root.display()
            )));
        }
        fsutil::read_json(&path)
    }

    pub fn read_meta(&self, key: &WindowKey) -> Result<Option<WindowMeta>> {
        let path = self.window_dir(key).join("meta.json");
        if !path.exists() {
            return Ok(None);
        }
        fsutil::read_json(&path).map(Some)
    }

    pub fn load(&self, key: &WindowKey) -> Result<Option<StoredWindow>> {
        let Some(meta) = self.read_meta(key)? else {
            return Ok(None);
        };
        self.load_dir(&self.window_dir(key), meta).map(Some)
    }

    fn load_dir(&self, dir: &Path, meta: WindowMeta) -> Result<StoredWindow> {
        let system_path = dir.join("system.txt");
        let system_text = if system_path.exists() {
            fsutil::read_string(&system_path)?
        } else {
            String::new()
        };
        Ok(StoredWindow {
            meta,
            system_text,
            user_text: fsutil::read_string(&dir.join("prompt.txt"))?,
            raw_text: fsutil::read_string(&dir.join("response.txt"))?,
        })
    }

    /// Persists one window; `meta.json` is renamed into place last.
    pub fn save(&self, prompt: &PromptText, raw_text: &str, meta: &WindowMeta) -> Result<()> {
        let key = WindowKey {
            session_id: meta.session_id.clone(),
            window_id: meta.window_id,
        };
        let dir = self.window_dir(&key);
        fsutil::write_atomic(&dir.join("prompt.txt"), prompt.user_text.as_bytes())?;
        if !prompt.system_text.is_empty() {
            fsutil::write_atomic(&dir.join("system.txt"), prompt.system_text.as_bytes())?;
        }
        fsutil::write_atomic(&dir.join("response.txt"), raw_text.as_bytes())?;
        fsutil::write_json(&dir.join("meta.json"), meta)
    }

    /// Every completed window in the store.
    pub fn scan(&self) -> Result<Vec<StoredWindow>> {
        let windows = self.root.join("windows");
        let mut out = Vec::new();
        if !windows.exists() {
            return Ok(out);
        }
        let mut session_dirs = read_dir_sorted(&windows)?;
        session_dirs.retain(|p| p.is_dir());
        for sdir in session_dirs {
            for wdir in read_dir_sorted(&sdir)? {
                let meta_path = wdir.join("meta.json");
                if meta_path.exists() {
                    let meta: WindowMeta = fsutil::read_json(&meta_path)?;
                    out.push(self.load_dir(&wdir, meta)?);
                }
            }
        }
        Ok(out)
    }
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    Ok(entries)
}

/// Completions of an earlier run, looked up by prompt hash.
pub(crate) struct ReplayStore {
    by_hash: HashMap<String, StoredWindow>,
}

impl ReplayStore {
    pub(crate) fn open(run_dir: &Path) -> Result<Self> {
        if !run_dir.is_dir() {
            return Err(Error::Backend(format!(
                "replay run directory {} does not exist",
                run_dir.display()
            )));
        }
        let by_hash = RunStore::new(run_dir)
            .scan()?
            .into_iter()
            .map(|w| (w.meta.prompt_hash.clone(), w))
            .collect();
        Ok(ReplayStore { by_hash })
    }

    pub(crate) fn get(&self, prompt_hash: &str) -> Option<&StoredWindow> {
        self.by_hash.get(prompt_hash)
    }
}
