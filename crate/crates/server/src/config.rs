use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use easel_core::Capability;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TIMEOUT_SECS: f64 = 120.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapabilityConfig {
    pub base_url: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub max_retries: u32,
    #[serde(default = "yes")]
    pub enabled: bool,
}

impl CapabilityConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            max_retries: 0,
            enabled: true,
        }
    }
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

fn yes() -> bool {
    true
}

/// Where each capability lives. A missing capability counts as disabled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub capabilities: BTreeMap<Capability, CapabilityConfig>,
    /// Sent as `Authorization: Bearer <token>` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearer_token: Option<String>,
}

impl BackendConfig {
    /// Every capability at `{base}`, as served by `easel mock --capability all`.
    pub fn single_host(base: &str) -> Self {
        Self {
            capabilities: Capability::ALL
                .iter()
                .map(|&c| (c, CapabilityConfig::new(base)))
                .collect(),
            bearer_token: None,
        }
    }

    pub fn get(&self, capability: Capability) -> Option<&CapabilityConfig> {
        self.capabilities.get(&capability).filter(|c| c.enabled)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (cap, c) in &self.capabilities {
            if !(c.timeout_secs > 0.0 && c.timeout_secs.is_finite()) {
                return Err(format!("{cap}: timeout must be positive"));
            }
            if c.enabled && !is_absolute_http_url(&c.base_url) {
                return Err(format!("{cap}: base_url {:?} is not an absolute http(s) URL", c.base_url));
            }
        }
        Ok(())
    }
}

fn is_absolute_http_url(s: &str) -> bool {
    let rest = s
        .strip_prefix("http://")
        .or_else(|| s.strip_prefix("https://"));
    matches!(rest, Some(r) if !r.is_empty() && !r.starts_with('/'))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default)]
    pub backends: BackendConfig,
    #[serde(default)]
    pub mock_mode: bool,
    #[serde(default = "default_max_sessions")]
    pub max_sessions: usize,
    #[serde(default = "default_max_image_side")]
    pub max_image_side: u32,
    /// Scene manifests for the mocks and for `fixture` references.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures_dir: Option<PathBuf>,
    /// Built console assets served at `/`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_dir: Option<PathBuf>,
    /// Size requested from the generate capability.
    #[serde(default = "default_output_size")]
    pub output_size: (u32, u32),
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_data_dir() -> PathBuf {
    "data".into()
}

fn default_max_sessions() -> usize {
    256
}

fn default_max_image_side() -> u32 {
    2048
}

fn default_output_size() -> (u32, u32) {
    (512, 512)
}

impl Default for ServiceConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Apply `EASEL_PORT` and `EASEL_DATA_DIR`.
    pub fn apply_env(&mut self) {
        if let Ok(port) = std::env::var("EASEL_PORT") {
            let host = self.listen.rsplit_once(':').map_or("127.0.0.1", |(h, _)| h);
            self.listen = format!("{host}:{port}");
        }
        if let Ok(dir) = std::env::var("EASEL_DATA_DIR") {
            self.data_dir = dir.into();
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_image_side < 64 {
            return Err("max_image_side must be at least 64".into());
        }
        if self.max_sessions == 0 {
            return Err("max_sessions must be at least 1".into());
        }
        if self.output_size.0 == 0 || self.output_size.1 == 0 {
            return Err("output_size must be nonzero".into());
        }
        if !self.mock_mode {
            self.backends.validate()?;
        }
        Ok(())
    }
}
