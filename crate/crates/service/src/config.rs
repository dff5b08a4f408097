//! JSON configuration shared by `serve` and the batch subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use arsimplify_core::calibration::TrainConfig;
use arsimplify_core::classifier::{ErrorClassifier, RemoteClassifier, RuleBasedClassifier};
use arsimplify_core::corpus;
use arsimplify_core::generation::GenerationConfig;
use arsimplify_core::llm::{Fixture, HttpBackend, HttpBackendConfig, LlmBackend, ScriptedBackend};
use arsimplify_core::pipeline::PipelineConfig;
use arsimplify_core::prompt::PromptTemplate;
use arsimplify_core::types::ErrorRegistry;
use arsimplify_core::validators::{DisplayProfile, DEFAULT_MEANING_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    /// Replays a fixture file; the bundled coffee fixture when no path is
    /// given.
    Mock {
        #[serde(default)]
        fixture: Option<PathBuf>,
    },
    Http(HttpBackendConfig),
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self::Mock { fixture: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierConfig {
    #[default]
    RuleBased,
    Remote {
        endpoint: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_store_dir() -> PathBuf {
    PathBuf::from("arsimplify-data")
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_meaning_threshold() -> f64 {
    DEFAULT_MEANING_THRESHOLD
}

fn default_training() -> TrainConfig {
    TrainConfig::new(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default = "default_store_dir")]
    pub store_dir: PathBuf,
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Shared token expected in `X-Api-Token` (or `Authorization: Bearer`).
    /// No check when absent.
    #[serde(default)]
    pub api_token: Option<String>,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub profile: DisplayProfile,
    #[serde(default = "default_meaning_threshold")]
    pub meaning_threshold: f64,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default = "default_training")]
    pub training: TrainConfig,
    /// Prompt template file; the built-in exemplars when absent.
    #[serde(default)]
    pub template: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let raw = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            generation: self.generation.clone(),
            profile: self.profile,
            meaning_threshold: self.meaning_threshold,
        }
    }

    pub fn template(&self) -> anyhow::Result<PromptTemplate> {
        match &self.template {
            None => Ok(corpus::default_template()),
            Some(p) => {
                let raw = fs::read_to_string(p)
                    .with_context(|| format!("reading template {}", p.display()))?;
                PromptTemplate::from_file_str(&raw)
                    .with_context(|| format!("parsing template {}", p.display()))
            }
        }
    }

    pub fn classifier(&self) -> Arc<dyn ErrorClassifier> {
        match &self.classifier {
            ClassifierConfig::RuleBased => Arc::new(RuleBasedClassifier::default()),
            ClassifierConfig::Remote {
                endpoint,
                timeout_secs,
            } => Arc::new(RemoteClassifier::new(
                endpoint.clone(),
                ErrorRegistry::default(),
                Duration::from_secs(*timeout_secs),
            )),
        }
    }

    pub fn backend(&self) -> anyhow::Result<BackendSource> {
        Ok(match &self.backend {
            BackendConfig::Mock { fixture: None } => BackendSource::Mock(
                serde_json::from_str(corpus::COFFEE_MOCK_FIXTURE).expect("bundled fixture parses"),
            ),
            BackendConfig::Mock { fixture: Some(p) } => {
                let raw = fs::read_to_string(p)
                    .with_context(|| format!("reading fixture {}", p.display()))?;
                BackendSource::Mock(
                    serde_json::from_str(&raw)
                        .with_context(|| format!("parsing fixture {}", p.display()))?,
                )
            }
            BackendConfig::Http(c) => BackendSource::Http(Arc::new(HttpBackend::new(c.clone()))),
        })
    }
}

/// Produces the backend for one pipeline run. Mock runs replay the fixture
/// from its start, so identical requests produce identical responses.
#[derive(Clone)]
pub enum BackendSource {
    Mock(Fixture),
    Http(Arc<HttpBackend>),
}

impl BackendSource {
    pub fn instance(&self) -> Arc<dyn LlmBackend> {
        match self {
            Self::Mock(f) => Arc::new(ScriptedBackend::new(f.clone())),
            Self::Http(b) => b.clone(),
        }
    }
}
