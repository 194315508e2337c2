//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use parley_core::rephrase::{MockProvider, PromptConfig, Provider, RemoteProvider, RephraseEngine, RetryPolicy};
use parley_core::surveys::Instrument;
use parley_service::sim::SimConfig;

use crate::error::CliError;

/// Environment variable holding the provider credential.
pub const KEY_ENV: &str = "PARLEY_PROVIDER_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Serve,
    Simulate,
    Export,
    Analyze,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Remote,
    #[default]
    Mock,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "parley", version, about = "Run, simulate, export and analyze rephrasing experiments")]
pub struct Args {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Root seed; every artifact records it. Defaults to the config file's seed, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Topic cluster count.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of simulated dyads.
    #[arg(long)]
    pub dyads: Option<usize>,
    /// Input: event log for export, table directory for analyze.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Skip SVG rendering in analyze mode.
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub pre_survey: Option<PathBuf>,
    pub post_survey: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Remote {
    pub completion_endpoint: Option<String>,
    pub embed_endpoint: Option<String>,
    pub label_endpoint: Option<String>,
    /// Timeout for embedding and labelling calls.
    pub analysis_timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Serve {
    pub tcp: String,
    pub ws: Option<String>,
}

impl Default for Serve {
    fn default() -> Self {
        Self {
            tcp: "127.0.0.1:7400".into(),
            ws: Some("127.0.0.1:7401".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub provider: ProviderKind,
    pub k: usize,
    pub paths: Paths,
    pub timeouts: RetryPolicy,
    pub remote: Remote,
    pub serve: Serve,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            provider: ProviderKind::Mock,
            k: parley_analysis::topics::DEFAULT_K,
            paths: Paths::default(),
            timeouts: RetryPolicy::default(),
            remote: Remote::default(),
            serve: Serve::default(),
            sim: SimConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::Config(format!("run config: {e}")))
    }

    /// Reads `args.config` if given, then applies the flags.
    pub fn resolve(args: &Args) -> Result<Self, CliError> {
        let mut config = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                Self::from_toml_str(&text)?
            }
            None => Self::default(),
        };
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        if let Some(p) = args.provider {
            config.provider = p;
        }
        if let Some(k) = args.k {
            config.k = k;
        }
        if let Some(n) = args.dyads {
            config.sim.dyads = n;
        }
        if args.out.is_some() {
            config.paths.out = args.out.clone();
        }
        if args.input.is_some() {
            config.paths.input = args.input.clone();
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.k < 2 {
            return Err(CliError::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.timeouts.call_timeout_ms == 0 {
            return Err(CliError::Config("timeouts.call_timeout_ms must be positive".into()));
        }
        if self.provider == ProviderKind::Remote && self.remote.completion_endpoint.is_none() {
            return Err(CliError::Config(
                "provider = remote needs remote.completion_endpoint".into(),
            ));
        }
        self.sim.validate()?;
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn instruments(&self) -> Result<(Instrument, Instrument), CliError> {
        let load = |p: &Option<PathBuf>, default: fn() -> Instrument| -> Result<Instrument, CliError> {
            Ok(match p {
                Some(path) => Instrument::load(path)?,
                None => default(),
            })
        };
        Ok((
            load(&self.paths.pre_survey, Instrument::default_pre)?,
            load(&self.paths.post_survey, Instrument::default_post)?,
        ))
    }

    pub fn prompts(&self) -> Result<PromptConfig, CliError> {
        match &self.paths.prompts {
            Some(path) => PromptConfig::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
            None => Ok(PromptConfig::default()),
        }
    }

    pub fn engine(&self) -> Result<Arc<RephraseEngine>, CliError> {
        let provider: Arc<dyn Provider> = match self.provider {
            ProviderKind::Mock => Arc::new(MockProvider::new()),
            ProviderKind::Remote => Arc::new(RemoteProvider::from_env(
                self.remote.completion_endpoint.clone().unwrap_or_default(),
                KEY_ENV,
            )),
        };
        Ok(Arc::new(RephraseEngine::new(provider, self.prompts()?, self.timeouts)))
    }

    pub fn analysis_timeout(&self) -> Duration {
        Duration::from_millis(if self.remote.analysis_timeout_ms == 0 {
            30_000
        } else {
            self.remote.analysis_timeout_ms
        })
    }
}

pub fn resolve_under(dir: &Path, given: Option<&Path>, default: &str) -> PathBuf {
    given.map(Path::to_path_buf).unwrap_or_else(|| dir.join(default))
}
