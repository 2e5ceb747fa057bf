use std::collections::BTreeSet;
use std::path::Path;

use globset::{Glob, GlobMatcher};
use serde::{Deserialize, Serialize};

use super::CacheControlDirectives;

pub const DEFAULT_TTL_SECS: u64 = 3600;

pub const DEFAULT_STATIC_EXTENSIONS: [&str; 14] =
    ["css", "js", "jpg", "jpeg", "png", "gif", "ico", "svg", "woff", "woff2", "txt", "pdf", "exe", "zip"];

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("cannot read profile file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid profile config: {0}")]
    Config(String),
}

/// Which `Cache-Control` directives prevent storage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HonoredHeaders {
    pub no_store: bool,
    pub no_cache: bool,
    pub private: bool,
}

impl HonoredHeaders {
    pub const ALL: HonoredHeaders = HonoredHeaders { no_store: true, no_cache: true, private: true };
    pub const NONE: HonoredHeaders = HonoredHeaders { no_store: false, no_cache: false, private: false };

    pub fn forbids(&self, d: &CacheControlDirectives) -> bool {
        (self.no_store && d.no_store) || (self.no_cache && d.no_cache) || (self.private && d.private)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultCached {
    /// Only paths whose extension is in the static list.
    ExtensionList,
    /// Everything.
    AllObjects,
    /// Static extensions, plus anything marked `public` or `max-age > 0`.
    ExtensionListOrHeaderOptIn,
}

/// How a [`CacheRule`] selects request paths. Exactly one form per rule.
#[derive(Debug, Clone)]
pub enum RuleMatch {
    Extensions(BTreeSet<String>),
    Glob(GlobMatcher),
}

impl RuleMatch {
    pub fn glob(pattern: &str) -> Result<Self, PolicyError> {
        Glob::new(pattern)
            .map(|g| RuleMatch::Glob(g.compile_matcher()))
            .map_err(|e| PolicyError::Config(format!("bad glob `{pattern}`: {e}")))
    }

    fn matches(&self, path: &str) -> bool {
        match self {
            RuleMatch::Extensions(exts) => path_extension(path).is_some_and(|e| exts.contains(&e)),
            RuleMatch::Glob(g) => g.is_match(path),
        }
    }
}

impl PartialEq for RuleMatch {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (RuleMatch::Extensions(a), RuleMatch::Extensions(b)) => a == b,
            (RuleMatch::Glob(a), RuleMatch::Glob(b)) => a.glob() == b.glob(),
            _ => false,
        }
    }
}

/// A custom caching rule, evaluated before the profile's default behaviour.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheRule {
    pub matcher: RuleMatch,
    pub honor_headers: HonoredHeaders,
    pub ttl: u64,
    /// Store even when an honoured directive forbids it.
    pub override_headers: bool,
}

/// A cache rules engine configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CdnProfile {
    pub name: String,
    pub default_cached: DefaultCached,
    pub static_extensions: BTreeSet<String>,
    pub honored: HonoredHeaders,
    pub default_ttl: u64,
    pub rules: Vec<CacheRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    ExtensionMatch,
    HeaderOptIn,
    HeaderForbids,
    DefaultAll,
    NoMatch,
    /// A custom [`CacheRule`] matched.
    RuleMatch,
    /// Status other than 200/404.
    UncacheableStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheDecision {
    pub store: bool,
    pub ttl: u64,
    pub reason: DecisionReason,
}

impl CacheDecision {
    fn store(ttl: u64, reason: DecisionReason) -> Self {
        CacheDecision { store: true, ttl, reason }
    }

    fn skip(reason: DecisionReason) -> Self {
        CacheDecision { store: false, ttl: 0, reason }
    }
}

/// Lower-cased extension of the last path segment, if any.
pub fn path_extension(path: &str) -> Option<String> {
    let path = path.split(['?', '#']).next().unwrap_or(path);
    let last = path.rsplit('/').next()?;
    let (stem, ext) = last.rsplit_once('.')?;
    if stem.is_empty() && ext.is_empty() {
        return None;
    }
    (!ext.is_empty()).then(|| ext.to_ascii_lowercase())
}

fn is_cacheable_status(status: u16) -> bool {
    matches!(status, 200 | 404)
}

/// Decide whether a response is stored. `request_path` is the path as the
/// cache sees it.
pub fn decide(profile: &CdnProfile, request_path: &str, status: u16, directives: &CacheControlDirectives) -> CacheDecision {
    if !is_cacheable_status(status) {
        return CacheDecision::skip(DecisionReason::UncacheableStatus);
    }

    if let Some(rule) = profile.rules.iter().find(|r| r.matcher.matches(request_path)) {
        if !rule.override_headers && rule.honor_headers.forbids(directives) {
            return CacheDecision::skip(DecisionReason::HeaderForbids);
        }
        return CacheDecision::store(rule.ttl, DecisionReason::RuleMatch);
    }

    if profile.honored.forbids(directives) {
        return CacheDecision::skip(DecisionReason::HeaderForbids);
    }

    let extension_hit = path_extension(request_path).is_some_and(|e| profile.static_extensions.contains(&e));
    match profile.default_cached {
        DefaultCached::AllObjects => CacheDecision::store(profile.default_ttl, DecisionReason::DefaultAll),
        DefaultCached::ExtensionList if extension_hit => {
            CacheDecision::store(profile.default_ttl, DecisionReason::ExtensionMatch)
        }
        DefaultCached::ExtensionList => CacheDecision::skip(DecisionReason::NoMatch),
        DefaultCached::ExtensionListOrHeaderOptIn if extension_hit => {
            CacheDecision::store(profile.default_ttl, DecisionReason::ExtensionMatch)
        }
        DefaultCached::ExtensionListOrHeaderOptIn => match directives.max_age {
            Some(age) if age > 0 => CacheDecision::store(age, DecisionReason::HeaderOptIn),
            _ if directives.public => CacheDecision::store(profile.default_ttl, DecisionReason::HeaderOptIn),
            _ => CacheDecision::skip(DecisionReason::NoMatch),
        },
    }
}

fn default_extensions() -> BTreeSet<String> {
    DEFAULT_STATIC_EXTENSIONS.iter().map(|e| e.to_string()).collect()
}

impl CdnProfile {
    pub fn new(name: &str, default_cached: DefaultCached, honored: HonoredHeaders) -> Self {
        CdnProfile {
            name: name.to_string(),
            default_cached,
            static_extensions: default_extensions(),
            honored,
            default_ttl: DEFAULT_TTL_SECS,
            rules: Vec::new(),
        }
    }

    pub fn akamai_default() -> Self {
        CdnProfile::new("akamai_default", DefaultCached::ExtensionList, HonoredHeaders::NONE)
    }

    pub fn cloudflare_default() -> Self {
        CdnProfile::new("cloudflare_default", DefaultCached::ExtensionListOrHeaderOptIn, HonoredHeaders::ALL)
    }

    pub fn cloudfront_default() -> Self {
        CdnProfile::new("cloudfront_default", DefaultCached::AllObjects, HonoredHeaders::ALL)
    }

    pub fn fastly_default() -> Self {
        CdnProfile::new(
            "fastly_default",
            DefaultCached::AllObjects,
            HonoredHeaders { no_store: false, no_cache: false, private: true },
        )
    }

    /// Look up a built-in profile by name.
    pub fn builtin(name: &str) -> Option<Self> {
        builtin_profiles().into_iter().find(|p| p.name == name)
    }
}

/// Default behaviour of the four major CDNs: Akamai caches a static extension
/// list and ignores all three directives; Cloudflare adds header opt-in and
/// honours all three; CloudFront caches everything and honours all three;
/// Fastly caches everything and honours only `private`.
pub fn builtin_profiles() -> Vec<CdnProfile> {
    vec![
        CdnProfile::akamai_default(),
        CdnProfile::cloudflare_default(),
        CdnProfile::cloudfront_default(),
        CdnProfile::fastly_default(),
    ]
}

// ---- declarative config ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    #[serde(default, rename = "profile")]
    profiles: Vec<ProfileSpec>,
}

/// Serialized form of a [`CdnProfile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub name: String,
    /// Start from a built-in profile and override the fields given here.
    #[serde(default)]
    pub base: Option<String>,
    #[serde(default)]
    pub default_cached: Option<DefaultCached>,
    #[serde(default)]
    pub static_extensions: Option<Vec<String>>,
    #[serde(default)]
    pub honored: Option<HonoredHeaders>,
    #[serde(default)]
    pub default_ttl: Option<u64>,
    #[serde(default, rename = "rule")]
    pub rules: Vec<RuleSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    #[serde(default)]
    pub extensions: Option<Vec<String>>,
    #[serde(default)]
    pub glob: Option<String>,
    /// Directive names: `no-store`, `no-cache`, `private`.
    #[serde(default)]
    pub honor: Vec<String>,
    pub ttl: u64,
    #[serde(default)]
    pub override_headers: bool,
}

impl RuleSpec {
    fn build(&self) -> Result<CacheRule, PolicyError> {
        let matcher = match (&self.extensions, &self.glob) {
            (Some(exts), None) => {
                RuleMatch::Extensions(exts.iter().map(|e| e.trim_start_matches('.').to_ascii_lowercase()).collect())
            }
            (None, Some(g)) => RuleMatch::glob(g)?,
            _ => return Err(PolicyError::Config("a rule needs exactly one of `extensions` or `glob`".into())),
        };
        let mut honor_headers = HonoredHeaders::NONE;
        for h in &self.honor {
            match h.to_ascii_lowercase().as_str() {
                "no-store" => honor_headers.no_store = true,
                "no-cache" => honor_headers.no_cache = true,
                "private" => honor_headers.private = true,
                other => return Err(PolicyError::Config(format!("unknown honored header `{other}`"))),
            }
        }
        Ok(CacheRule { matcher, honor_headers, ttl: self.ttl, override_headers: self.override_headers })
    }
}

impl ProfileSpec {
    pub fn build(&self) -> Result<CdnProfile, PolicyError> {
        let mut profile = match &self.base {
            Some(b) => CdnProfile::builtin(b).ok_or_else(|| PolicyError::Config(format!("unknown base profile `{b}`")))?,
            None => CdnProfile::new(&self.name, DefaultCached::ExtensionList, HonoredHeaders::NONE),
        };
        profile.name = self.name.clone();
        if let Some(dc) = self.default_cached {
            profile.default_cached = dc;
        }
        if let Some(exts) = &self.static_extensions {
            profile.static_extensions = exts.iter().map(|e| e.trim_start_matches('.').to_ascii_lowercase()).collect();
        }
        if let Some(h) = self.honored {
            profile.honored = h;
        }
        if let Some(ttl) = self.default_ttl {
            profile.default_ttl = ttl;
        }
        profile.rules = self.rules.iter().map(RuleSpec::build).collect::<Result<_, _>>()?;
        Ok(profile)
    }
}

/// Parse `[[profile]]` tables from TOML text.
pub fn parse_profiles(text: &str) -> Result<Vec<CdnProfile>, PolicyError> {
    let file: ProfileFile = toml::from_str(text).map_err(|e| PolicyError::Config(e.to_string()))?;
    file.profiles.iter().map(ProfileSpec::build).collect()
}

pub fn load_profiles(path: &Path) -> Result<Vec<CdnProfile>, PolicyError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| PolicyError::Io { path: path.display().to_string(), source })?;
    parse_profiles(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::parse_cache_control;

    fn cc(s: &str) -> CacheControlDirectives {
        parse_cache_control(s)
    }

    #[test]
    fn akamai_ignores_no_store_on_static_extension() {
        let d = decide(&CdnProfile::akamai_default(), "/account.php/x.css", 200, &cc("no-store"));
        assert!(d.store);
        assert_eq!(d.reason, DecisionReason::ExtensionMatch);
        assert_eq!(d.ttl, DEFAULT_TTL_SECS);
    }

    #[test]
    fn akamai_skips_non_static_paths() {
        let d = decide(&CdnProfile::akamai_default(), "/account.php", 200, &cc("public, max-age=600"));
        assert!(!d.store);
        assert_eq!(d.reason, DecisionReason::NoMatch);
    }

    #[test]
    fn cloudfront_honours_no_store() {
        let d = decide(&CdnProfile::cloudfront_default(), "/account.php/x.css", 200, &cc("no-store"));
        assert_eq!(d, CacheDecision { store: false, ttl: 0, reason: DecisionReason::HeaderForbids });
        let d = decide(&CdnProfile::cloudfront_default(), "/anything", 200, &cc(""));
        assert_eq!(d.reason, DecisionReason::DefaultAll);
    }

    #[test]
    fn fastly_only_honours_private() {
        let f = CdnProfile::fastly_default();
        assert!(!decide(&f, "/anything", 200, &cc("private")).store);
        assert!(decide(&f, "/anything", 200, &cc("no-cache")).store);
        assert!(decide(&f, "/anything", 200, &cc("no-store")).store);
    }

    #[test]
    fn cloudflare_header_opt_in() {
        let p = CdnProfile::cloudflare_default();
        assert!(!decide(&p, "/page", 200, &cc("")).store);
        let d = decide(&p, "/page", 200, &cc("max-age=120"));
        assert_eq!((d.store, d.ttl, d.reason), (true, 120, DecisionReason::HeaderOptIn));
        assert!(decide(&p, "/page", 200, &cc("public")).store);
        assert!(!decide(&p, "/page", 200, &cc("max-age=0")).store);
        assert!(!decide(&p, "/x.css", 200, &cc("private")).store);
    }

    #[test]
    fn status_gate() {
        let p = CdnProfile::akamai_default();
        assert!(decide(&p, "/x.css", 404, &cc("")).store);
        for status in [301, 302, 403, 500] {
            let d = decide(&p, "/x.css", status, &cc(""));
            assert_eq!(d.reason, DecisionReason::UncacheableStatus);
            assert_eq!(d.ttl, 0);
        }
    }

    #[test]
    fn builtin_table() {
        let ps = builtin_profiles();
        let names: Vec<_> = ps.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["akamai_default", "cloudflare_default", "cloudfront_default", "fastly_default"]);
        assert_eq!(ps[0].honored, HonoredHeaders::NONE);
        assert_eq!(ps[1].honored, HonoredHeaders::ALL);
        assert_eq!(ps[1].default_cached, DefaultCached::ExtensionListOrHeaderOptIn);
        assert_eq!(ps[2].honored, HonoredHeaders::ALL);
        assert_eq!(ps[2].default_cached, DefaultCached::AllObjects);
        assert_eq!(ps[3].honored, HonoredHeaders { no_store: false, no_cache: false, private: true });
        assert!(ps.iter().all(|p| p.default_ttl == 3600));
    }

    #[test]
    fn extension_extraction() {
        assert_eq!(path_extension("/account.php%0Anonexistent.css").as_deref(), Some("css"));
        assert_eq!(path_extension("/a/b.JPG").as_deref(), Some("jpg"));
        assert_eq!(path_extension("/a/b"), None);
        assert_eq!(path_extension("/a.b/c"), None);
        assert_eq!(path_extension("/x.css?v=1").as_deref(), Some("css"));
    }

    #[test]
    fn config_rules() {
        let text = r#"
            [[profile]]
            name = "shop"
            base = "cloudflare_default"
            default_ttl = 60

            [[profile.rule]]
            glob = "/static/**"
            honor = ["no-store"]
            ttl = 30
            override_headers = true

            [[profile.rule]]
            extensions = [".pdf"]
            honor = ["private"]
            ttl = 10
        "#;
        let ps = parse_profiles(text).unwrap();
        let p = &ps[0];
        assert_eq!(p.honored, HonoredHeaders::ALL);
        let d = decide(p, "/static/app/x.html", 200, &cc("no-store"));
        assert_eq!((d.store, d.ttl, d.reason), (true, 30, DecisionReason::RuleMatch));
        assert!(!decide(p, "/doc/tax.pdf", 200, &cc("private")).store);
        assert_eq!(decide(p, "/doc/tax.pdf", 200, &cc("no-store")).ttl, 10);
        assert_eq!(decide(p, "/x.css", 200, &cc("")).ttl, 60);
    }

    #[test]
    fn config_rule_needs_one_matcher() {
        let both = "[[profile]]\nname='x'\n[[profile.rule]]\nglob='/a'\nextensions=['css']\nttl=1\n";
        assert!(parse_profiles(both).is_err());
        let neither = "[[profile]]\nname='x'\n[[profile.rule]]\nttl=1\n";
        assert!(parse_profiles(neither).is_err());
        assert!(parse_profiles("[[profile]]\nname='x'\nbase='nope'\n").is_err());
    }
}
