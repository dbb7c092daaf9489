use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use tsqa_core::agent::AgentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Real,
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Scripted offline backend.
    Mock,
    /// Chat-completions endpoint.
    Http,
}

/// Settings file contents. Every field can be overridden by a flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub data_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    pub mode: Mode,
    pub backend: BackendKind,
    /// Mock script; the benchmark replay script when unset.
    pub mock_script: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Score LA and HR with the backend model instead of the offline fallback.
    pub judge: bool,
    pub agent: AgentConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            data_dir: None,
            manifest: None,
            benchmark: None,
            mode: Mode::Stub,
            backend: BackendKind::Mock,
            mock_script: None,
            seeds: vec![1],
            workers: 4,
            out_dir: PathBuf::from("reports"),
            judge: false,
            agent: AgentConfig::default(),
        }
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn check(&self, needs_seeds: bool) -> anyhow::Result<()> {
        match self.mode {
            Mode::Stub if self.benchmark.is_none() => bail!("stub mode needs --benchmark"),
            Mode::Real if self.data_dir.is_none() && self.manifest.is_none() => {
                bail!("real mode needs --data-dir or --manifest")
            }
            _ => {}
        }
        if needs_seeds && self.seeds.is_empty() {
            bail!("--seeds must list at least one seed");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if let Err(e) = self.agent.validate() {
            bail!("{e}");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults() {
        let cfg: CliConfig = toml::from_str(
            r#"
            mode = "real"
            data_dir = "data/market"
            seeds = [1, 10, 100]
            [agent]
            temperature = 1.0
            [agent.backend]
            model = "gpt-4o"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Real);
        assert_eq!(cfg.seeds, [1, 10, 100]);
        assert_eq!(cfg.agent.temperature, 1.0);
        assert_eq!(cfg.agent.empty_output_retries, 5);
        assert_eq!(cfg.agent.backend.model, "gpt-4o");
        assert_eq!(cfg.agent.backend.api_key_env, "OPENAI_API_KEY");
        cfg.check(true).unwrap();
    }

    #[test]
    fn mode_requirements() {
        let cfg = CliConfig::default();
        assert!(cfg.check(false).is_err());
        let cfg = CliConfig {
            benchmark: Some("b.tsv".into()),
            seeds: vec![],
            ..CliConfig::default()
        };
        assert!(cfg.check(false).is_ok());
        assert!(cfg.check(true).is_err());
        assert!(toml::from_str::<CliConfig>("api_key = \"x\"").is_err());
    }
}
