use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::CookieJar;

/// Mainstream desktop Chrome string; override through site config.
pub const DEFAULT_USER_AGENT: &str =
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/126.0.0.0 Safari/537.36";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Victim,
    Attacker,
    Unauthenticated,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Victim => "victim",
            Role::Attacker => "attacker",
            Role::Unauthenticated => "unauthenticated",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LoginMethod {
    Get,
    #[default]
    Post,
}

/// One request of a login sequence. Relative URLs resolve against the site
/// root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginStep {
    #[serde(default)]
    pub method: LoginMethod,
    pub url: String,
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
}

/// What a successful login looks like. Every populated condition must hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuccessPredicate {
    /// Status of the last step's final response (after redirects).
    pub status: Option<u16>,
    pub body_contains: Option<String>,
    /// Cookie that must be present in the jar afterwards.
    pub cookie: Option<String>,
}

/// Declarative login: a request sequence plus a success check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginDescriptor {
    pub steps: Vec<LoginStep>,
    #[serde(default)]
    pub success: SuccessPredicate,
    /// Name of the cookie carrying the session. When set, session freshness
    /// is judged by this cookie alone.
    #[serde(default)]
    pub session_cookie: Option<String>,
}

impl LoginDescriptor {
    /// Single form POST with a session cookie as the success signal.
    pub fn form_post(url: &str, fields: &[(&str, &str)], session_cookie: &str) -> Self {
        LoginDescriptor {
            steps: vec![LoginStep {
                method: LoginMethod::Post,
                url: url.to_string(),
                fields: fields.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            }],
            success: SuccessPredicate { cookie: Some(session_cookie.to_string()), ..Default::default() },
            session_cookie: Some(session_cookie.to_string()),
        }
    }
}

/// An HTTP persona. Identities are not shared between concurrent workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Identity {
    pub role: Role,
    pub cookie_jar: CookieJar,
    pub credentials: Option<LoginDescriptor>,
    pub user_agent: String,
    /// Sent with every request of this identity.
    pub extra_headers: Vec<(String, String)>,
}

impl Identity {
    pub fn new(role: Role) -> Self {
        Identity {
            role,
            cookie_jar: CookieJar::new(),
            credentials: None,
            user_agent: DEFAULT_USER_AGENT.to_string(),
            extra_headers: Vec::new(),
        }
    }

    pub fn victim(credentials: Option<LoginDescriptor>) -> Self {
        Identity { credentials, ..Identity::new(Role::Victim) }
    }

    pub fn attacker(credentials: Option<LoginDescriptor>) -> Self {
        Identity { credentials, ..Identity::new(Role::Attacker) }
    }

    /// A cookie-less persona derived from `other`: same user agent and extra
    /// headers, no jar and no credentials.
    pub fn unauthenticated_from(other: &Identity) -> Self {
        Identity {
            role: Role::Unauthenticated,
            cookie_jar: CookieJar::new(),
            credentials: None,
            user_agent: other.user_agent.clone(),
            extra_headers: other.extra_headers.clone(),
        }
    }

    pub fn with_user_agent(mut self, ua: &str) -> Self {
        self.user_agent = ua.to_string();
        self
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.extra_headers.push((name.to_string(), value.to_string()));
        self
    }

    /// True when a re-login is due: no session cookie, or it has expired.
    pub fn session_expired(&self, now: u64) -> bool {
        let session_name = self.credentials.as_ref().and_then(|c| c.session_cookie.as_deref());
        match session_name {
            Some(name) => self.cookie_jar.iter().filter(|c| c.name == name).all(|c| c.is_expired(now)),
            None => self.cookie_jar.is_empty() || self.cookie_jar.iter().any(|c| c.is_expired(now)),
        }
    }
}
