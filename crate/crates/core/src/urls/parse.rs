use std::fmt;

use percent_encoding::percent_decode_str;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UrlError {
    #[error("malformed url `{url}`: {reason}")]
    MalformedUrl { url: String, reason: &'static str },
}

/// Structural view of an absolute `http(s)` URL.
///
/// `raw_path` holds the path exactly as received, percent-encoding included,
/// so that payload construction never re-encodes or normalises it.
/// `path_segments` are the percent-decoded `/`-separated pieces of that path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParsedUrl {
    pub scheme: String,
    pub host: String,
    pub port: u16,
    pub path_segments: Vec<String>,
    pub raw_path: String,
    pub query_params: Vec<(String, String)>,
    /// Query string as received, without the leading `?`.
    pub raw_query: Option<String>,
    pub fragment: Option<String>,
}

impl ParsedUrl {
    pub fn default_port(&self) -> u16 {
        default_port_for(&self.scheme)
    }

    /// `scheme://host[:port]`, with the port omitted when it is the default.
    pub fn origin(&self) -> String {
        if self.port == self.default_port() {
            format!("{}://{}", self.scheme, self.host)
        } else {
            format!("{}://{}:{}", self.scheme, self.host, self.port)
        }
    }

    /// Path plus query as it appears on the request line. An empty path is
    /// sent as `/`.
    pub fn request_target(&self) -> String {
        let mut target = if self.raw_path.is_empty() { "/".to_string() } else { self.raw_path.clone() };
        if let Some(q) = &self.raw_query {
            target.push('?');
            target.push_str(q);
        }
        target
    }

    /// Same URL with query and fragment removed.
    pub fn without_query(&self) -> ParsedUrl {
        ParsedUrl { query_params: Vec::new(), raw_query: None, fragment: None, ..self.clone() }
    }
}

impl fmt::Display for ParsedUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.origin(), self.raw_path)?;
        if let Some(q) = &self.raw_query {
            write!(f, "?{q}")?;
        }
        if let Some(frag) = &self.fragment {
            write!(f, "#{frag}")?;
        }
        Ok(())
    }
}

fn default_port_for(scheme: &str) -> u16 {
    if scheme == "https" {
        443
    } else {
        80
    }
}

/// Lossy percent-decoding (invalid UTF-8 becomes U+FFFD).
pub fn percent_decode(s: &str) -> String {
    percent_decode_str(s).decode_utf8_lossy().into_owned()
}

fn decode_form_component(s: &str) -> String {
    percent_decode(&s.replace('+', " "))
}

/// Parse an absolute `http`/`https` URL without normalising its path.
pub fn parse_url(raw: &str) -> Result<ParsedUrl, UrlError> {
    let malformed = |reason| UrlError::MalformedUrl { url: raw.to_string(), reason };

    let (scheme, rest) = raw.split_once("://").ok_or_else(|| malformed("missing scheme"))?;
    let scheme = scheme.to_ascii_lowercase();
    if scheme != "http" && scheme != "https" {
        return Err(malformed("unsupported scheme"));
    }

    let authority_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let (authority, tail) = rest.split_at(authority_end);
    // userinfo is accepted and dropped
    let host_port = authority.rsplit_once('@').map_or(authority, |(_, hp)| hp);

    let (host, port) = if let Some(stripped) = host_port.strip_prefix('[') {
        let (h, after) = stripped.split_once(']').ok_or_else(|| malformed("unterminated IPv6 literal"))?;
        let port = match after.strip_prefix(':') {
            Some(p) => Some(p),
            None if after.is_empty() => None,
            None => return Err(malformed("garbage after IPv6 literal")),
        };
        (format!("[{h}]"), port)
    } else {
        match host_port.rsplit_once(':') {
            Some((h, p)) => (h.to_string(), Some(p)),
            None => (host_port.to_string(), None),
        }
    };
    if host.is_empty() || host.contains(char::is_whitespace) {
        return Err(malformed("empty or invalid host"));
    }
    let port = match port {
        Some("") | None => default_port_for(&scheme),
        Some(p) => p.parse::<u16>().map_err(|_| malformed("invalid port"))?,
    };

    let (before_fragment, fragment) = match tail.split_once('#') {
        Some((b, f)) => (b, Some(f.to_string())),
        None => (tail, None),
    };
    let (raw_path, raw_query) = match before_fragment.split_once('?') {
        Some((p, q)) => (p, Some(q.to_string())),
        None => (before_fragment, None),
    };

    let trimmed = raw_path.strip_prefix('/').unwrap_or(raw_path);
    let path_segments = if trimmed.is_empty() {
        Vec::new()
    } else {
        trimmed.split('/').map(percent_decode).collect()
    };

    let query_params = raw_query
        .as_deref()
        .map(|q| {
            q.split('&')
                .filter(|pair| !pair.is_empty())
                .map(|pair| match pair.split_once('=') {
                    Some((k, v)) => (decode_form_component(k), decode_form_component(v)),
                    None => (decode_form_component(pair), String::new()),
                })
                .collect()
        })
        .unwrap_or_default();

    Ok(ParsedUrl {
        scheme,
        host: host.to_ascii_lowercase(),
        port,
        path_segments,
        raw_path: raw_path.to_string(),
        query_params,
        raw_query,
        fragment,
    })
}

/// Resolve a link found on `base` into an absolute URL. Returns `None` for
/// non-HTTP schemes (`mailto:`, `javascript:`), fragment-only links and
/// anything that does not parse.
pub fn resolve_reference(base: &ParsedUrl, href: &str) -> Option<ParsedUrl> {
    let href = href.trim();
    if href.is_empty() || href.starts_with('#') {
        return None;
    }
    let base = url::Url::parse(&base.to_string()).ok()?;
    let joined = base.join(href).ok()?;
    if joined.scheme() != "http" && joined.scheme() != "https" {
        return None;
    }
    let mut parsed = parse_url(joined.as_str()).ok()?;
    parsed.fragment = None;
    Some(parsed)
}
