use regex::Regex;

use crate::urls::percent_decode;

pub const DEFAULT_LOGOUT_PATTERNS: [&str; 5] = ["logout", "signout", "sign-out", "log-out", "session/destroy"];

/// Compiled logout blacklist. Each pattern is a literal that must appear
/// between non-alphanumeric boundaries in the URL's path or query.
#[derive(Debug, Clone)]
pub struct LogoutBlacklist {
    re: Option<Regex>,
}

impl LogoutBlacklist {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Self {
        let alts: Vec<String> =
            patterns.iter().map(|p| p.as_ref().trim()).filter(|p| !p.is_empty()).map(regex::escape).collect();
        if alts.is_empty() {
            return LogoutBlacklist { re: None };
        }
        let re = Regex::new(&format!("(?i)(?:^|[^a-z0-9])(?:{})(?:$|[^a-z0-9])", alts.join("|")))
            .expect("escaped literals form a valid regex");
        LogoutBlacklist { re: Some(re) }
    }

    pub fn matches(&self, url: &str) -> bool {
        let Some(re) = &self.re else { return false };
        let rest = url.split_once("://").map_or(url, |(_, r)| r);
        let target = match rest.find(['/', '?']) {
            Some(i) if url.contains("://") => &rest[i..],
            _ => rest,
        };
        let target = target.split('#').next().unwrap_or(target);
        re.is_match(target) || re.is_match(&percent_decode(target))
    }
}

impl Default for LogoutBlacklist {
    fn default() -> Self {
        LogoutBlacklist::new(&DEFAULT_LOGOUT_PATTERNS)
    }
}

/// True when `url` (absolute or a bare path) looks like a logout link.
pub fn is_logout_link<S: AsRef<str>>(url: &str, blacklist: &[S]) -> bool {
    LogoutBlacklist::new(blacklist).matches(url)
}
