use std::fmt;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

/// Parsed `Cache-Control` header. Directive names are matched
/// case-insensitively. Unrecognised or malformed directives are kept in
/// `extensions` in the order they appeared.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheControlDirectives {
    pub no_store: bool,
    pub no_cache: bool,
    pub private: bool,
    pub public: bool,
    pub max_age: Option<u64>,
    pub must_revalidate: bool,
    pub no_transform: bool,
    pub extensions: Vec<(String, Option<String>)>,
}

/// Split on commas that are not inside a quoted string.
fn split_directives(value: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut in_quotes = false;
    let mut escaped = false;
    let mut start = 0;
    for (i, c) in value.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_quotes => escaped = true,
            '"' => in_quotes = !in_quotes,
            ',' if !in_quotes => {
                parts.push(&value[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&value[start..]);
    parts
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

pub fn parse_cache_control(header_value: &str) -> CacheControlDirectives {
    let mut d = CacheControlDirectives::default();
    for token in split_directives(header_value) {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        let (name, value) = match token.split_once('=') {
            Some((n, v)) => (n.trim().to_ascii_lowercase(), Some(v.trim().to_string())),
            None => (token.to_ascii_lowercase(), None),
        };
        let flag = match (name.as_str(), value.is_some()) {
            ("no-store", false) => Some(&mut d.no_store),
            ("no-cache", false) => Some(&mut d.no_cache),
            ("private", false) => Some(&mut d.private),
            ("public", false) => Some(&mut d.public),
            ("must-revalidate", false) => Some(&mut d.must_revalidate),
            ("no-transform", false) => Some(&mut d.no_transform),
            _ => None,
        };
        match flag {
            Some(f) if !*f => {
                *f = true;
                continue;
            }
            Some(_) => {}
            None if name == "max-age" && d.max_age.is_none() => {
                if let Some(secs) = value.as_deref().and_then(|v| unquote(v).parse::<u64>().ok()) {
                    d.max_age = Some(secs);
                    continue;
                }
            }
            None => {}
        }
        d.extensions.push((name, value));
    }
    d
}

impl CacheControlDirectives {
    /// Alphabetical list of directive names present, with `=` appended to
    /// those that carry a value (`max-age=, public`). Used to bucket
    /// responses by header combination.
    pub fn shape(&self) -> String {
        let mut names: Vec<String> = self
            .known_directives()
            .into_iter()
            .map(|(n, v)| if v.is_some() { format!("{n}=") } else { n.to_string() })
            .chain(self.extensions.iter().map(|(n, v)| if v.is_some() { format!("{n}=") } else { n.clone() }))
            .collect();
        names.sort();
        names.dedup();
        names.join(", ")
    }

    pub fn is_empty(&self) -> bool {
        self.known_directives().is_empty() && self.extensions.is_empty()
    }

    fn known_directives(&self) -> Vec<(&'static str, Option<String>)> {
        let mut out = Vec::new();
        if let Some(secs) = self.max_age {
            out.push(("max-age", Some(secs.to_string())));
        }
        for (set, name) in [
            (self.must_revalidate, "must-revalidate"),
            (self.no_cache, "no-cache"),
            (self.no_store, "no-store"),
            (self.no_transform, "no-transform"),
            (self.private, "private"),
            (self.public, "public"),
        ] {
            if set {
                out.push((name, None));
            }
        }
        out
    }
}

/// Canonical header rendering: known directives first, then extensions in
/// their original order.
impl fmt::Display for CacheControlDirectives {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rendered: Vec<String> = self
            .known_directives()
            .into_iter()
            .map(|(n, v)| match v {
                Some(v) => format!("{n}={v}"),
                None => n.to_string(),
            })
            .chain(self.extensions.iter().map(|(n, v)| match v {
                Some(v) => format!("{n}={v}"),
                None => n.clone(),
            }))
            .collect();
        f.write_str(&rendered.join(", "))
    }
}

/// All cache-relevant headers of a response. `Expires` and `Pragma` are
/// recorded for reporting only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseCacheHeaders {
    pub cache_control: Option<CacheControlDirectives>,
    pub pragma_no_cache: bool,
    pub expires: Option<String>,
}

impl ResponseCacheHeaders {
    pub fn from_headers<'a, I>(headers: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut out = ResponseCacheHeaders::default();
        let mut cc_values: Vec<&str> = Vec::new();
        for (name, value) in headers {
            if name.eq_ignore_ascii_case("cache-control") {
                cc_values.push(value);
            } else if name.eq_ignore_ascii_case("pragma") {
                out.pragma_no_cache |= value.split(',').any(|t| t.trim().eq_ignore_ascii_case("no-cache"));
            } else if name.eq_ignore_ascii_case("expires") {
                out.expires = Some(value.trim().to_string());
            }
        }
        if !cc_values.is_empty() {
            out.cache_control = Some(parse_cache_control(&cc_values.join(", ")));
        }
        out
    }

    /// Parsed `Expires` date; `None` when absent or not a valid HTTP date.
    pub fn expires_at(&self) -> Option<SystemTime> {
        self.expires.as_deref().and_then(|e| httpdate::parse_http_date(e).ok())
    }

    pub fn directives(&self) -> CacheControlDirectives {
        self.cache_control.clone().unwrap_or_default()
    }

    /// Labels in the style of a header inventory: `Expires:`,
    /// `Pragma: no-cache`, `Cache-Control: <shape>`.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.expires.is_some() {
            out.push("Expires:".to_string());
        }
        if self.pragma_no_cache {
            out.push("Pragma: no-cache".to_string());
        }
        if let Some(cc) = &self.cache_control {
            out.push(format!("Cache-Control: {}", cc.shape()));
        }
        out
    }
}
