use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::client::HttpExchange;

/// Vendor name reserved for the catch-all fingerprint, reported only when no
/// named vendor matched.
pub const OTHER_VENDOR: &str = "Other";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderPattern {
    pub header: String,
    /// Case-insensitive substring of the header value; empty matches any
    /// value.
    #[serde(default)]
    pub contains: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdnFingerprint {
    pub vendor: String,
    #[serde(rename = "pattern")]
    pub header_patterns: Vec<HeaderPattern>,
}

impl CdnFingerprint {
    pub fn new(vendor: &str, patterns: &[(&str, &str)]) -> Self {
        CdnFingerprint {
            vendor: vendor.to_string(),
            header_patterns: patterns
                .iter()
                .map(|(h, c)| HeaderPattern { header: h.to_string(), contains: c.to_string() })
                .collect(),
        }
    }

    pub fn matches(&self, headers: &[(String, String)]) -> bool {
        self.header_patterns.iter().any(|p| {
            let needle = p.contains.to_ascii_lowercase();
            headers
                .iter()
                .any(|(k, v)| k.eq_ignore_ascii_case(&p.header) && v.to_ascii_lowercase().contains(&needle))
        })
    }
}

/// Header heuristics for the four large vendors plus a catch-all for other
/// caching intermediaries.
pub fn default_fingerprints() -> Vec<CdnFingerprint> {
    vec![
        CdnFingerprint::new(
            "Akamai",
            &[
                ("server", "akamaighost"),
                ("x-akamai-transformed", ""),
                ("akamai-grn", ""),
                ("x-cache", "akamaitechnologies.com"),
            ],
        ),
        CdnFingerprint::new("Cloudflare", &[("cf-ray", ""), ("cf-cache-status", ""), ("server", "cloudflare")]),
        CdnFingerprint::new(
            "CloudFront",
            &[("x-amz-cf-id", ""), ("x-amz-cf-pop", ""), ("via", "cloudfront"), ("x-cache", "cloudfront")],
        ),
        CdnFingerprint::new(
            "Fastly",
            &[("x-fastly-request-id", ""), ("fastly-debug-digest", ""), ("x-served-by", "cache-")],
        ),
        CdnFingerprint::new(OTHER_VENDOR, &[("x-cache", ""), ("x-cache-status", ""), ("cdn-cache", ""), ("via", "varnish")]),
    ]
}

#[derive(Debug, Deserialize)]
struct FingerprintFile {
    fingerprint: Vec<CdnFingerprint>,
}

#[derive(Debug, thiserror::Error)]
pub enum FingerprintError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid fingerprint file: {0}")]
    Parse(String),
}

/// Parse a `[[fingerprint]]` table list. Every fingerprint needs at least one
/// pattern.
pub fn parse_fingerprints(text: &str) -> Result<Vec<CdnFingerprint>, FingerprintError> {
    let file: FingerprintFile = toml::from_str(text).map_err(|e| FingerprintError::Parse(e.to_string()))?;
    if let Some(fp) = file.fingerprint.iter().find(|f| f.header_patterns.is_empty()) {
        return Err(FingerprintError::Parse(format!("fingerprint `{}` has no patterns", fp.vendor)));
    }
    Ok(file.fingerprint)
}

pub fn load_fingerprints(path: &Path) -> Result<Vec<CdnFingerprint>, FingerprintError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| FingerprintError::Io { path: path.display().to_string(), source })?;
    parse_fingerprints(&text)
}

/// Every vendor whose fingerprint matches the response headers. The catch-all
/// vendor is reported only when nothing else matched.
pub fn cdn_label(exchange: &HttpExchange, fingerprints: &[CdnFingerprint]) -> Vec<String> {
    label_headers(&exchange.response_headers, fingerprints)
}

pub fn label_headers(headers: &[(String, String)], fingerprints: &[CdnFingerprint]) -> Vec<String> {
    let named: Vec<String> = fingerprints
        .iter()
        .filter(|f| f.vendor != OTHER_VENDOR && f.matches(headers))
        .map(|f| f.vendor.clone())
        .collect();
    if !named.is_empty() {
        return named;
    }
    fingerprints.iter().filter(|f| f.vendor == OTHER_VENDOR && f.matches(headers)).map(|f| f.vendor.clone()).take(1).collect()
}
