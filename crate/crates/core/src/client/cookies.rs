use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Seconds since the Unix epoch.
pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cookie {
    pub domain: String,
    pub name: String,
    pub value: String,
    #[serde(default = "root_path")]
    pub path: String,
    /// Absolute expiry in Unix seconds; `None` for session cookies.
    #[serde(default)]
    pub expires: Option<u64>,
    /// Sent only to `domain` itself, not its subdomains.
    #[serde(default)]
    pub host_only: bool,
}

fn root_path() -> String {
    "/".to_string()
}

impl Cookie {
    pub fn is_expired(&self, now: u64) -> bool {
        self.expires.is_some_and(|e| e <= now)
    }

    fn matches_host(&self, host: &str) -> bool {
        host == self.domain || (!self.host_only && host.ends_with(&format!(".{}", self.domain)))
    }

    fn matches_path(&self, path: &str) -> bool {
        path.starts_with(&self.path)
            && (self.path.ends_with('/') || path.len() == self.path.len() || path[self.path.len()..].starts_with('/'))
    }
}

/// A minimal RFC 6265 cookie store keyed by (domain, path, name).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CookieJar {
    cookies: Vec<Cookie>,
}

impl CookieJar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.cookies.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cookies.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cookie> {
        self.cookies.iter()
    }

    pub fn get(&self, name: &str) -> Option<&Cookie> {
        self.cookies.iter().find(|c| c.name == name)
    }

    pub fn clear(&mut self) {
        self.cookies.clear();
    }

    pub fn insert(&mut self, cookie: Cookie) {
        self.cookies
            .retain(|c| !(c.domain == cookie.domain && c.path == cookie.path && c.name == cookie.name));
        self.cookies.push(cookie);
    }

    pub fn remove_expired(&mut self, now: u64) {
        self.cookies.retain(|c| !c.is_expired(now));
    }

    /// Apply one `Set-Cookie` header received from `request_host` for a
    /// request to `request_path`. Headers naming a foreign domain are ignored.
    pub fn store_set_cookie(&mut self, request_host: &str, request_path: &str, header: &str, now: u64) {
        let mut parts = header.split(';');
        let Some((name, value)) = parts.next().and_then(|nv| nv.split_once('=')) else {
            return;
        };
        let name = name.trim();
        if name.is_empty() {
            return;
        }
        let mut cookie = Cookie {
            domain: request_host.to_ascii_lowercase(),
            name: name.to_string(),
            value: value.trim().trim_matches('"').to_string(),
            path: default_path(request_path),
            expires: None,
            host_only: true,
        };
        let mut max_age: Option<i64> = None;
        for attr in parts {
            let (k, v) = attr.split_once('=').map_or((attr.trim(), ""), |(k, v)| (k.trim(), v.trim()));
            match k.to_ascii_lowercase().as_str() {
                "domain" if !v.is_empty() => {
                    let d = v.trim_start_matches('.').to_ascii_lowercase();
                    let host = request_host.to_ascii_lowercase();
                    if host != d && !host.ends_with(&format!(".{d}")) {
                        return;
                    }
                    cookie.domain = d;
                    cookie.host_only = false;
                }
                "path" if v.starts_with('/') => cookie.path = v.to_string(),
                "max-age" => max_age = v.parse().ok(),
                "expires" => {
                    if let Ok(t) = httpdate::parse_http_date(v) {
                        cookie.expires = Some(t.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
                    }
                }
                _ => {}
            }
        }
        if let Some(age) = max_age {
            cookie.expires = Some(if age <= 0 { 0 } else { now.saturating_add(age as u64) });
        }
        if cookie.is_expired(now) {
            self.cookies
                .retain(|c| !(c.domain == cookie.domain && c.path == cookie.path && c.name == cookie.name));
        } else {
            self.insert(cookie);
        }
    }

    /// `Cookie` header value for a request, or `None` when nothing applies.
    pub fn header_for(&self, host: &str, path: &str, now: u64) -> Option<String> {
        let host = host.to_ascii_lowercase();
        let pairs: Vec<String> = self
            .cookies
            .iter()
            .filter(|c| !c.is_expired(now) && c.matches_host(&host) && c.matches_path(path))
            .map(|c| format!("{}={}", c.name, c.value))
            .collect();
        (!pairs.is_empty()).then(|| pairs.join("; "))
    }
}

fn default_path(request_path: &str) -> String {
    match request_path.rfind('/') {
        Some(0) | None => "/".to_string(),
        Some(i) => request_path[..i].to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_and_send() {
        let mut jar = CookieJar::new();
        jar.store_set_cookie("www.example.com", "/login", "sid=abc; Path=/; HttpOnly", 100);
        assert_eq!(jar.header_for("www.example.com", "/account", 100).as_deref(), Some("sid=abc"));
        assert_eq!(jar.header_for("other.example.com", "/account", 100), None);
    }

    #[test]
    fn domain_cookies_reach_subdomains() {
        let mut jar = CookieJar::new();
        jar.store_set_cookie("www.example.com", "/", "a=1; Domain=.example.com", 0);
        assert!(jar.header_for("shop.example.com", "/", 0).is_some());
        jar.store_set_cookie("www.example.com", "/", "b=2; Domain=evil.com", 0);
        assert!(jar.get("b").is_none());
    }

    #[test]
    fn max_age_expiry_and_deletion() {
        let mut jar = CookieJar::new();
        jar.store_set_cookie("h", "/", "sid=x; Max-Age=10", 1000);
        assert_eq!(jar.get("sid").unwrap().expires, Some(1010));
        assert!(jar.header_for("h", "/", 1009).is_some());
        assert!(jar.header_for("h", "/", 1010).is_none());
        jar.store_set_cookie("h", "/", "sid=; Max-Age=0", 1001);
        assert!(jar.is_empty());
    }

    #[test]
    fn path_scoping() {
        let mut jar = CookieJar::new();
        jar.store_set_cookie("h", "/", "p=1; Path=/app", 0);
        assert!(jar.header_for("h", "/app/x", 0).is_some());
        assert!(jar.header_for("h", "/app", 0).is_some());
        assert!(jar.header_for("h", "/apple", 0).is_none());
    }
}
