use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{OriginSemantics, OriginVariant, SimSite, UnauthBehavior};
use crate::policy::{builtin_profiles, CdnProfile, ProfileSpec};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Home, about, three items, login/logout and two protected pages.
    #[default]
    Standard,
    /// 1,200 public pages in 7 structural groups.
    Sitemap,
}

/// Declarative form of a [`SimSite`], as found in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub name: String,
    /// Defaults to `www.<name>.test`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host: Option<String>,
    #[serde(default)]
    pub layout: Layout,
    #[serde(default)]
    pub origin: Vec<OriginVariant>,
    #[serde(default = "yes")]
    pub decode_before_route: bool,
    pub profile: String,
    #[serde(default)]
    pub proxy_decodes_percent: bool,
    #[serde(default)]
    pub protected_no_store: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttl_override: Option<u64>,
    #[serde(default)]
    pub tiered_retry: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub unauthenticated: UnauthBehavior,
}

fn yes() -> bool {
    true
}

impl SiteSpec {
    pub fn host(&self) -> String {
        self.host.clone().unwrap_or_else(|| format!("www.{}.test", self.name))
    }

    pub fn build(&self, profiles: &[CdnProfile]) -> Result<SimSite, ScenarioError> {
        let profile = profiles
            .iter()
            .find(|p| p.name == self.profile)
            .cloned()
            .or_else(|| CdnProfile::builtin(&self.profile))
            .ok_or_else(|| ScenarioError::Invalid(format!("site `{}`: unknown profile `{}`", self.name, self.profile)))?;
        let origin = OriginSemantics::new(&self.origin, self.decode_before_route);
        let mut site = match self.layout {
            Layout::Standard => {
                SimSite::standard(&self.name, &self.host(), origin, profile, self.protected_no_store, self.seed)
            }
            Layout::Sitemap => {
                let mut s = SimSite::sitemap(&self.name, &self.host(), profile, self.seed);
                s.origin = origin;
                s
            }
        };
        site.proxy_decodes_percent = self.proxy_decodes_percent;
        site.ttl_override = self.ttl_override;
        site.tiered_retry = self.tiered_retry;
        site.auth.unauthenticated = self.unauthenticated;
        Ok(site)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// A scenario file: optional custom `[[profile]]` tables followed by
/// `[[site]]` tables.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, rename = "profile", skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<ProfileSpec>,
    #[serde(default, rename = "site")]
    pub sites: Vec<SiteSpec>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// Instantiate every site. Names and hosts must be unique.
    pub fn build(&self) -> Result<Vec<SimSite>, ScenarioError> {
        let profiles: Vec<CdnProfile> = self
            .profiles
            .iter()
            .map(|p| p.build().map_err(|e| ScenarioError::Invalid(e.to_string())))
            .collect::<Result<_, _>>()?;
        let mut hosts = std::collections::HashSet::new();
        let mut out = Vec::new();
        for spec in &self.sites {
            if !hosts.insert(spec.host()) {
                return Err(ScenarioError::Invalid(format!("duplicate host `{}`", spec.host())));
            }
            out.push(spec.build(&profiles)?);
        }
        Ok(out)
    }
}

fn profile_slug(name: &str) -> &str {
    name.strip_suffix("_default").unwrap_or(name)
}

/// All origin-semantics subsets of size at most two, in a fixed order.
pub fn semantics_subsets() -> Vec<Vec<OriginVariant>> {
    let v = OriginVariant::ALL;
    let mut out = vec![Vec::new()];
    out.extend(v.iter().map(|x| vec![*x]));
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            out.push(vec![v[i], v[j]]);
        }
    }
    out
}

/// The evaluation matrix: every origin-semantics subset of size ≤ 2, under
/// each built-in CDN profile, with and without `no-store` on protected
/// pages (16 × 4 × 2 = 128 sites), plus the single-page replay of the
/// classic path-parameter attack.
pub fn catalog_scenario() -> Scenario {
    let mut sites = Vec::new();
    let mut seed = 1000;
    for origin in semantics_subsets() {
        for profile in builtin_profiles() {
            for no_store in [false, true] {
                seed += 1;
                let sem = OriginSemantics::new(&origin, true);
                let name = format!(
                    "{}-{}-{}",
                    sem.slug(),
                    profile_slug(&profile.name),
                    if no_store { "nostore" } else { "plain" }
                );
                sites.push(SiteSpec {
                    name,
                    host: None,
                    layout: Layout::Standard,
                    origin: origin.clone(),
                    decode_before_route: true,
                    profile: profile.name.clone(),
                    proxy_decodes_percent: false,
                    protected_no_store: no_store,
                    ttl_override: None,
                    tiered_retry: false,
                    seed,
                    unauthenticated: UnauthBehavior::Redirect,
                });
            }
        }
    }
    sites.push(demo_spec());
    Scenario { profiles: Vec::new(), sites }
}

pub fn catalog() -> Vec<SimSite> {
    catalog_scenario().build().expect("built-in catalog is valid")
}

/// Path-parameter fallback origin behind an extension-list cache: the
/// textbook `/account.php/nonexistent.jpg` case.
pub fn demo_spec() -> SiteSpec {
    SiteSpec {
        name: "demo".into(),
        host: None,
        layout: Layout::Standard,
        origin: vec![OriginVariant::PathParameterFallback],
        decode_before_route: true,
        profile: "akamai_default".into(),
        proxy_decodes_percent: false,
        protected_no_store: false,
        ttl_override: None,
        tiered_retry: false,
        seed: 1,
        unauthenticated: UnauthBehavior::Redirect,
    }
}

pub fn demo_site() -> SimSite {
    demo_spec().build(&[]).expect("valid")
}

pub fn sitemap_spec() -> SiteSpec {
    SiteSpec {
        name: "sitemap".into(),
        host: None,
        layout: Layout::Sitemap,
        origin: Vec::new(),
        decode_before_route: true,
        profile: "akamai_default".into(),
        proxy_decodes_percent: false,
        protected_no_store: false,
        ttl_override: None,
        tiered_retry: false,
        seed: 2,
        unauthenticated: UnauthBehavior::Redirect,
    }
}

pub fn sitemap_site() -> SimSite {
    sitemap_spec().build(&[]).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_shape() {
        assert_eq!(semantics_subsets().len(), 16);
        let s = catalog_scenario();
        assert_eq!(s.sites.len(), 129);
        let sites = s.build().unwrap();
        assert_eq!(sites.len(), 129);
        assert!(sites.iter().all(|x| x.host.ends_with(".test")));
    }

    #[test]
    fn toml_round_trip() {
        let s = catalog_scenario();
        let back = Scenario::parse(&s.to_toml()).unwrap();
        assert_eq!(back.sites, s.sites);
    }

    #[test]
    fn custom_profile_in_scenario() {
        let text = r#"
[[profile]]
name = "strict"
base = "cloudfront_default"
default_ttl = 60

[[site]]
name = "custom"
profile = "strict"
origin = ["truncate_at_question"]
"#;
        let sites = Scenario::parse(text).unwrap().build().unwrap();
        assert_eq!(sites[0].cache_profile.default_ttl, 60);
        assert_eq!(sites[0].host, "www.custom.test");
        assert!(Scenario::parse("[[site]]\nname='x'\nprofile='nope'").unwrap().build().is_err());
    }
}
