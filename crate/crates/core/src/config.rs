//! Configuration files: scan settings, per-site credentials and marker
//! sets. All are TOML.
//!
//! Scan settings (`--config`), every key optional:
//!
//! ```toml
//! budget = 500
//! rate = 2.0
//! techniques = ["path_parameter", "encoded_question"]   # or "all"
//! extension = "css"
//! embedded_param = "name=val"
//! delay = 0
//! mode = "full"            # or "marker-gated"
//! workers = 4
//! seed = 1
//! user_agent = "..."
//! logout_patterns = ["logout", "signout"]
//! fingerprints = "fingerprints.toml"
//!
//! [randomness]
//! min_residual_length = 8
//! entropy_threshold = 3.0
//! keywords = ["csrf", "token"]
//! ```
//!
//! Site file (referenced from a seed line with `login=`):
//!
//! ```toml
//! user_agent = "..."       # optional
//!
//! [victim]
//! session_cookie = "sid"
//! success = { cookie = "sid" }
//! [[victim.steps]]
//! method = "POST"
//! url = "/login"           # relative to the site root
//! fields = { username = "alice", password = "..." }
//!
//! [attacker]
//! # same shape as [victim]
//!
//! [[marker]]               # victim markers; may also live in a markers= file
//! label = "email"
//! value = "q8Zr0x4LmPa2vT@mail.example"
//! ```
//!
//! Marker file (referenced with `markers=`): just the `[[marker]]` tables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::client::{LoginDescriptor, DEFAULT_LOGOUT_PATTERNS, DEFAULT_RATE};
use crate::detector::{Marker, MarkerSet, RandomnessConfig};
use crate::urls::{parse_url, resolve_reference, PathConfusionTechnique};

/// Default number of unique page groups crawled per domain.
pub const DEFAULT_BUDGET: usize = 500;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    SeedLine { path: String, line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMode {
    /// Attack every representative page.
    #[default]
    Full,
    /// Attack only pages whose victim rendering contains a marker.
    MarkerGated,
}

/// Parse `all` or a comma-separated technique list.
pub fn parse_techniques(s: &str) -> Result<Vec<PathConfusionTechnique>, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(PathConfusionTechnique::ALL.to_vec());
    }
    let mut out: Vec<PathConfusionTechnique> =
        s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err("empty technique list".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum TechniqueList {
    Word(String),
    List(Vec<PathConfusionTechnique>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomnessFile {
    min_residual_length: Option<usize>,
    entropy_threshold: Option<f64>,
    keywords: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanFile {
    budget: Option<usize>,
    rate: Option<f64>,
    techniques: Option<TechniqueList>,
    extension: Option<String>,
    embedded_param: Option<String>,
    delay: Option<u64>,
    mode: Option<ScanMode>,
    workers: Option<usize>,
    seed: Option<u64>,
    user_agent: Option<String>,
    logout_patterns: Option<Vec<String>>,
    fingerprints: Option<PathBuf>,
    #[serde(default)]
    randomness: RandomnessFile,
}

/// Effective scan settings. Command-line flags are applied on top of the
/// values read from a file.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub budget: usize,
    pub rate: f64,
    pub techniques: Vec<PathConfusionTechnique>,
    pub extension: String,
    pub embedded_param: Option<String>,
    pub delay_secs: u64,
    pub mode: ScanMode,
    pub workers: usize,
    pub seed: u64,
    pub user_agent: Option<String>,
    pub logout_patterns: Vec<String>,
    /// Fingerprint table file; built-in table when `None`.
    pub fingerprints: Option<PathBuf>,
    pub randomness: RandomnessConfig,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            budget: DEFAULT_BUDGET,
            rate: DEFAULT_RATE,
            techniques: PathConfusionTechnique::ALL.to_vec(),
            extension: crate::urls::DEFAULT_EXTENSION.to_string(),
            embedded_param: None,
            delay_secs: 0,
            mode: ScanMode::Full,
            workers: 4,
            seed: 0,
            user_agent: None,
            logout_patterns: DEFAULT_LOGOUT_PATTERNS.iter().map(|s| s.to_string()).collect(),
            fingerprints: None,
            randomness: RandomnessConfig::default(),
        }
    }
}

impl ScanConfig {
    pub fn parse(path: &Path, text: &str) -> Result<Self, ConfigError> {
        let f: ScanFile = parse_toml(path, text)?;
        let d = ScanConfig::default();
        let techniques = match f.techniques {
            None => d.techniques,
            Some(TechniqueList::Word(w)) => parse_techniques(&w).map_err(ConfigError::Invalid)?,
            Some(TechniqueList::List(l)) => parse_techniques(
                &l.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(","),
            )
            .map_err(ConfigError::Invalid)?,
        };
        let mut randomness = d.randomness;
        if let Some(v) = f.randomness.min_residual_length {
            randomness.min_residual_length = v;
        }
        if let Some(v) = f.randomness.entropy_threshold {
            randomness.entropy_threshold_bits_per_char = v;
        }
        if let Some(v) = f.randomness.keywords {
            randomness.keywords = v;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = ScanConfig {
            budget: f.budget.unwrap_or(d.budget),
            rate: f.rate.unwrap_or(d.rate),
            techniques,
            extension: f.extension.unwrap_or(d.extension),
            embedded_param: f.embedded_param,
            delay_secs: f.delay.unwrap_or(0),
            mode: f.mode.unwrap_or_default(),
            workers: f.workers.unwrap_or(d.workers),
            seed: f.seed.unwrap_or(0),
            user_agent: f.user_agent,
            logout_patterns: f.logout_patterns.unwrap_or(d.logout_patterns),
            fingerprints: f.fingerprints.map(|p| base.join(p)),
            randomness,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(path, &read(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.budget == 0 {
            return Err(ConfigError::Invalid("budget must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if !self.rate.is_finite() || self.rate < 0.0 {
            return Err(ConfigError::Invalid(format!("invalid rate {}", self.rate)));
        }
        if self.extension.is_empty() || !self.extension.bytes().all(|b| b.is_ascii_alphanumeric()) {
            return Err(ConfigError::Invalid(format!("invalid extension `{}`", self.extension)));
        }
        self.randomness.validate().map_err(ConfigError::Invalid)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    user_agent: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    victim: Option<LoginDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attacker: Option<LoginDescriptor>,
    #[serde(default, rename = "marker")]
    markers: Vec<Marker>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkerFile {
    #[serde(default, rename = "marker")]
    markers: Vec<Marker>,
}

/// Credentials and markers for one seed site.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiteConfig {
    pub user_agent: Option<String>,
    pub victim: Option<LoginDescriptor>,
    pub attacker: Option<LoginDescriptor>,
    pub markers: MarkerSet,
}

impl SiteConfig {
    pub fn parse(path: &Path, text: &str) -> Result<Self, ConfigError> {
        let f: SiteFile = parse_toml(path, text)?;
        let markers = marker_set(path, f.markers)?;
        Ok(SiteConfig { user_agent: f.user_agent, victim: f.victim, attacker: f.attacker, markers })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(path, &read(path)?)
    }

    pub fn to_toml(&self) -> String {
        let f = SiteFile {
            user_agent: self.user_agent.clone(),
            victim: self.victim.clone(),
            attacker: self.attacker.clone(),
            markers: self.markers.iter().cloned().collect(),
        };
        toml::to_string(&f).expect("site config serialises")
    }

    /// Make every login step URL absolute against `origin`
    /// (`scheme://host[:port]`).
    pub fn resolve_against(&mut self, origin: &str) -> Result<(), ConfigError> {
        for d in [&mut self.victim, &mut self.attacker].into_iter().flatten() {
            resolve_login(d, origin)?;
        }
        Ok(())
    }
}

fn marker_set(path: &Path, markers: Vec<Marker>) -> Result<MarkerSet, ConfigError> {
    MarkerSet::new(markers)
        .map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })
}

pub fn load_markers(path: &Path) -> Result<MarkerSet, ConfigError> {
    let f: MarkerFile = parse_toml(path, &read(path)?)?;
    marker_set(path, f.markers)
}

/// Rewrite relative step URLs of `desc` into absolute ones.
pub fn resolve_login(desc: &mut LoginDescriptor, origin: &str) -> Result<(), ConfigError> {
    let base = parse_url(&format!("{}/", origin.trim_end_matches('/')))
        .map_err(|e| ConfigError::Invalid(format!("bad site origin `{origin}`: {e}")))?;
    for step in &mut desc.steps {
        let abs = resolve_reference(&base, &step.url)
            .ok_or_else(|| ConfigError::Invalid(format!("bad login step URL `{}`", step.url)))?;
        step.url = abs.to_string();
    }
    Ok(())
}
