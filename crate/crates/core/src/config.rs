//! The TOML configuration file read by the command-line tool.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayConfig;
use crate::harness::ToolchainAdapter;
use crate::model::{validate_config, RunConfig};
use crate::profile::{FrameworkProfile, ProfileError};
use crate::prompt::{PromptTemplates, TemplateError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectSection {
    /// Subject project root.
    pub root: PathBuf,
    /// Production sources, relative to `root`.
    pub source_root: String,
    /// Where per-focal workspaces are created.
    pub work_dir: PathBuf,
    /// Where `generate` writes the ledger and `export` writes suites.
    pub out_dir: PathBuf,
}

impl Default for ProjectSection {
    fn default() -> Self {
        ProjectSection {
            root: PathBuf::from("."),
            source_root: "src/main/java".into(),
            work_dir: PathBuf::from("coevo-work"),
            out_dir: PathBuf::from("coevo-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoevoConfig {
    pub project: ProjectSection,
    /// A built-in profile name or a path to a profile file.
    pub profile: String,
    /// Directory overriding the built-in prompt templates.
    pub templates: Option<PathBuf>,
    pub run: RunConfig,
    pub gateway: GatewayConfig,
    pub toolchain: ToolchainAdapter,
}

impl Default for CoevoConfig {
    fn default() -> Self {
        CoevoConfig {
            project: ProjectSection::default(),
            profile: "junit4".into(),
            templates: None,
            run: RunConfig::default(),
            gateway: GatewayConfig::default(),
            toolchain: ToolchainAdapter::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Templates(#[from] TemplateError),
}

impl CoevoConfig {
    /// Reads a config file; relative paths in it are taken from the file's directory.
    pub fn load(path: &Path) -> Result<CoevoConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut config: CoevoConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Malformed { path: path.display().to_string(), message: e.to_string() })?;
        let base = std::path::absolute(path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")))
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        config.rebase(&base);
        Ok(config)
    }

    /// Makes every relative path absolute against `base`.
    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.project.root);
        fix(&mut self.project.work_dir);
        fix(&mut self.project.out_dir);
        if let Some(t) = self.templates.as_mut() {
            fix(t);
        }
        if let Some(t) = self.gateway.transcript_dir.as_mut() {
            fix(t);
        }
        if let Some(s) = self.gateway.stub_script.as_mut() {
            fix(s);
        }
        if self.profile.ends_with(".toml") && Path::new(&self.profile).is_relative() {
            self.profile = base.join(&self.profile).display().to_string();
        }
    }

    /// Every violated constraint across the run settings and the toolchain adapter.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        if let Err(e) = validate_config(&self.run) {
            errors.extend(e);
        }
        if let Err(e) = self.toolchain.validate() {
            errors.extend(e);
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn framework_profile(&self) -> Result<FrameworkProfile, ConfigError> {
        if self.profile.ends_with(".toml") {
            Ok(FrameworkProfile::load(Path::new(&self.profile))?)
        } else {
            Ok(FrameworkProfile::builtin(&self.profile)?)
        }
    }

    pub fn prompt_templates(&self) -> Result<PromptTemplates, ConfigError> {
        match &self.templates {
            Some(dir) => Ok(PromptTemplates::load_dir(dir)?.validated()?),
            None => Ok(PromptTemplates::builtin()),
        }
    }
}
