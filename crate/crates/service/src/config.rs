//! The single TOML configuration document shared by `serve`, `generate` and `edit`.

use std::path::{Path, PathBuf};


use serde::{Deserialize, Serialize};

use scengen_core::retrieval::DEFAULT_TOP_K;
use scengen_interpreter::ChatConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Generator checkpoint; the bundled fixture checkpoint when absent.
    pub checkpoint: Option<PathBuf>,
    /// Saved region index directory; the bundled fixture index when absent.
    pub index: Option<PathBuf>,
    /// Scenario store directory. `serve` uses `scenarios` when absent; the one-shot
    /// subcommands then persist nothing.
    pub store: Option<PathBuf>,
    /// Use the fallback grammar and the rule-based edit client instead of the chat endpoint.
    pub offline: bool,
    /// Retrieval candidates sampled from.
    pub k: usize,
    /// Retrieval seed used when a request carries none; fresh random seeds otherwise.
    pub seed: Option<u64>,
    pub llm: ChatConfig,
    /// Append every chat exchange to this JSON-lines file.
    pub transcript: Option<PathBuf>,
    pub listen: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            index: None,
            store: None,
            offline: false,
            k: DEFAULT_TOP_K,
            seed: None,
            llm: ChatConfig::default(),
            transcript: None,
            listen: "127.0.0.1:8080".into(),
        }
    }
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let mut config: Self = toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        // Relative paths are taken relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.checkpoint.as_mut().map(rebase);
        config.index.as_mut().map(rebase);
        config.transcript.as_mut().map(rebase);
        config.store.as_mut().map(rebase);
        Ok(config)
    }
}
