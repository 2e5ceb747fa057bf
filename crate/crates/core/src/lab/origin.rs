use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::urls::percent_decode;

/// One URL-interpretation quirk of an origin server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginVariant {
    /// Extra segments after a known resource are ignored and the resource is
    /// served.
    PathParameterFallback,
    /// Everything from a newline on is dropped.
    TruncateAtNewline,
    /// `;` starts a parameter list that does not take part in routing.
    SemicolonParams,
    /// `#` starts a fragment.
    TruncateAtFragment,
    /// `?` starts a query string.
    TruncateAtQuestion,
}

impl OriginVariant {
    pub const ALL: [OriginVariant; 5] = [
        OriginVariant::PathParameterFallback,
        OriginVariant::TruncateAtNewline,
        OriginVariant::SemicolonParams,
        OriginVariant::TruncateAtFragment,
        OriginVariant::TruncateAtQuestion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OriginVariant::PathParameterFallback => "path_parameter_fallback",
            OriginVariant::TruncateAtNewline => "truncate_at_newline",
            OriginVariant::SemicolonParams => "semicolon_params",
            OriginVariant::TruncateAtFragment => "truncate_at_fragment",
            OriginVariant::TruncateAtQuestion => "truncate_at_question",
        }
    }

    /// Short tag used in generated site names.
    pub fn slug(self) -> &'static str {
        match self {
            OriginVariant::PathParameterFallback => "pp",
            OriginVariant::TruncateAtNewline => "nl",
            OriginVariant::SemicolonParams => "sc",
            OriginVariant::TruncateAtFragment => "fr",
            OriginVariant::TruncateAtQuestion => "qm",
        }
    }

    fn delimiter(self) -> Option<char> {
        match self {
            OriginVariant::PathParameterFallback => None,
            OriginVariant::TruncateAtNewline => Some('\n'),
            OriginVariant::SemicolonParams => Some(';'),
            OriginVariant::TruncateAtFragment => Some('#'),
            OriginVariant::TruncateAtQuestion => Some('?'),
        }
    }
}

impl fmt::Display for OriginVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OriginVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let n = s.trim().to_ascii_lowercase().replace('-', "_");
        OriginVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == n || v.slug() == n)
            .ok_or_else(|| format!("unknown origin variant `{s}`"))
    }
}

/// How an origin maps a request path to a resource. No variants means exact
/// routing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OriginSemantics {
    pub variants: Vec<OriginVariant>,
    /// Percent-decode the path before any variant applies.
    #[serde(default)]
    pub decode_before_route: bool,
}

impl OriginSemantics {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn new(variants: &[OriginVariant], decode_before_route: bool) -> Self {
        let mut v = variants.to_vec();
        v.sort();
        v.dedup();
        OriginSemantics { variants: v, decode_before_route }
    }

    pub fn has(&self, v: OriginVariant) -> bool {
        self.variants.contains(&v)
    }

    pub fn slug(&self) -> String {
        if self.variants.is_empty() {
            "exact".to_string()
        } else {
            self.variants.iter().map(|v| v.slug()).collect::<Vec<_>>().join("-")
        }
    }
}

/// The path an origin routes on for the request target `raw_target`, or
/// `None` for a 404.
///
/// A literal `?` always ends the path. The remainder is percent-decoded when
/// `decode_before_route` is set, then cut at the earliest delimiter among the
/// enabled truncation variants. If the result is not a known resource and
/// path-parameter fallback is enabled, the longest proper, non-root prefix
/// of segments naming a resource is used.
pub fn route_path(origin: &OriginSemantics, raw_target: &str, exists: impl Fn(&str) -> bool) -> Option<String> {
    let raw_path = raw_target.split('?').next().unwrap_or("");
    let raw_path = if raw_path.is_empty() { "/" } else { raw_path };
    let mut path = if origin.decode_before_route { percent_decode(raw_path) } else { raw_path.to_string() };

    let cut = origin.variants.iter().filter_map(|v| v.delimiter()).filter_map(|d| path.find(d)).min();
    if let Some(i) = cut {
        path.truncate(i);
        if path.is_empty() {
            path.push('/');
        }
    }

    if exists(&path) {
        return Some(path);
    }
    if origin.has(OriginVariant::PathParameterFallback) {
        let segments: Vec<&str> = path.trim_start_matches('/').split('/').collect();
        for keep in (1..segments.len()).rev() {
            let prefix = format!("/{}", segments[..keep].join("/"));
            if exists(&prefix) {
                return Some(prefix);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use OriginVariant::*;

    fn known(p: &str) -> bool {
        matches!(p, "/" | "/account.php" | "/item/1")
    }

    fn route(variants: &[OriginVariant], decode: bool, target: &str) -> Option<String> {
        route_path(&OriginSemantics::new(variants, decode), target, known)
    }

    #[test]
    fn spec_examples() {
        assert_eq!(route(&[TruncateAtNewline], true, "/account.php%0Anonexistent.css").as_deref(), Some("/account.php"));
        assert_eq!(route(&[PathParameterFallback], true, "/account.php/nonexistent.css").as_deref(), Some("/account.php"));
        assert_eq!(route(&[], true, "/account.php/nonexistent.css"), None);
    }

    #[test]
    fn encoded_delimiters_need_decoding() {
        assert_eq!(route(&[TruncateAtNewline], false, "/account.php%0Ax.css"), None);
        assert_eq!(route(&[SemicolonParams], false, "/account.php;x.css").as_deref(), Some("/account.php"));
        assert_eq!(route(&[TruncateAtFragment], true, "/account.php%23x.css").as_deref(), Some("/account.php"));
        assert_eq!(route(&[TruncateAtQuestion], true, "/account.php%3Fx.css").as_deref(), Some("/account.php"));
        assert_eq!(route(&[TruncateAtQuestion], true, "/account.php/x.css"), None);
    }

    #[test]
    fn literal_query_never_routes() {
        assert_eq!(route(&[], false, "/account.php?x=1").as_deref(), Some("/account.php"));
        assert_eq!(route(&[], false, "?x").as_deref(), Some("/"));
    }

    #[test]
    fn earliest_delimiter_wins() {
        assert_eq!(
            route(&[TruncateAtFragment, SemicolonParams], true, "/account.php%3Ba%23b").as_deref(),
            Some("/account.php")
        );
    }

    #[test]
    fn fallback_never_reaches_root() {
        assert_eq!(route(&[PathParameterFallback], true, "/nothing.css"), None);
        assert_eq!(route(&[PathParameterFallback], true, "/item/1/a/b.css").as_deref(), Some("/item/1"));
    }

    #[test]
    fn variant_names() {
        assert_eq!("qm".parse::<OriginVariant>().unwrap(), TruncateAtQuestion);
        assert_eq!("path-parameter-fallback".parse::<OriginVariant>().unwrap(), PathParameterFallback);
        assert!("x".parse::<OriginVariant>().is_err());
    }
}
