use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    unix_now, HttpRequest, HttpResponse, Identity, LoginDescriptor, LoginMethod, RateLimiter, Role, Transport,
    TransportError,
};
use crate::urls::{parse_url, resolve_reference, ParsedUrl};

pub const DEFAULT_MAX_REDIRECTS: usize = 5;
pub const DEFAULT_MAX_RETRIES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("network error for {url}: {message}")]
    Network { url: String, message: String },
    #[error("more than {limit} redirects starting at {url}")]
    TooManyRedirects { url: String, limit: usize },
    #[error("login failed: {0}")]
    AuthFailure(String),
    #[error("invalid url `{0}`")]
    InvalidUrl(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedirectHop {
    pub url: String,
    pub status: u16,
}

/// One logical request and its final response. Redirect hops preceding the
/// final response are kept in `hops`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpExchange {
    pub url: String,
    pub method: String,
    pub request_headers: Vec<(String, String)>,
    pub status: u16,
    pub response_headers: Vec<(String, String)>,
    #[serde(skip)]
    pub body: Vec<u8>,
    pub timing_ms: u64,
    pub identity_role: Role,
    pub final_url: String,
    pub hops: Vec<RedirectHop>,
}

impl HttpExchange {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.response_headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn body_text(&self) -> std::borrow::Cow<'_, str> {
        String::from_utf8_lossy(&self.body)
    }
}

/// Request driver shared by every stage of a scan: applies cookies,
/// pacing, redirects and retries on top of a [`Transport`].
#[derive(Clone)]
pub struct HttpEngine {
    transport: Arc<dyn Transport>,
    limiter: Arc<RateLimiter>,
    pub max_redirects: usize,
    pub max_retries: usize,
    pub retry_backoff: Duration,
}

impl HttpEngine {
    pub fn new(transport: Arc<dyn Transport>, limiter: Arc<RateLimiter>) -> Self {
        HttpEngine {
            transport,
            limiter,
            max_redirects: DEFAULT_MAX_REDIRECTS,
            max_retries: DEFAULT_MAX_RETRIES,
            retry_backoff: Duration::from_millis(200),
        }
    }

    pub fn limiter(&self) -> &Arc<RateLimiter> {
        &self.limiter
    }

    pub fn fetch(&self, identity: &mut Identity, url: &str) -> Result<HttpExchange, EngineError> {
        self.request(identity, "GET", url, Vec::new(), Vec::new())
    }

    /// Followed redirects switch to GET except for 307/308.
    pub fn post_form(
        &self,
        identity: &mut Identity,
        url: &str,
        fields: &[(String, String)],
    ) -> Result<HttpExchange, EngineError> {
        let body = url::form_urlencoded::Serializer::new(String::new()).extend_pairs(fields).finish().into_bytes();
        let headers = vec![("Content-Type".to_string(), "application/x-www-form-urlencoded".to_string())];
        self.request(identity, "POST", url, headers, body)
    }

    fn request(
        &self,
        identity: &mut Identity,
        method: &str,
        url: &str,
        extra: Vec<(String, String)>,
        body: Vec<u8>,
    ) -> Result<HttpExchange, EngineError> {
        let started = Instant::now();
        let mut current = parse_url(url).map_err(|_| EngineError::InvalidUrl(url.to_string()))?;
        let mut method = method.to_string();
        let mut body = body;
        let mut extra = extra;
        let mut hops = Vec::new();

        loop {
            let headers = self.headers_for(identity, &current, &extra);
            let request =
                HttpRequest { method: method.clone(), url: current.to_string(), headers: headers.clone(), body: body.clone() };
            let response = self.send_with_retries(&current, &request)?;
            self.absorb_cookies(identity, &current, &response);

            let location = response.header("location").filter(|_| is_redirect(response.status));
            let next = location.and_then(|loc| resolve_reference(&current, loc));
            match next {
                Some(next) => {
                    if hops.len() >= self.max_redirects {
                        return Err(EngineError::TooManyRedirects { url: url.to_string(), limit: self.max_redirects });
                    }
                    hops.push(RedirectHop { url: current.to_string(), status: response.status });
                    if !matches!(response.status, 307 | 308) {
                        method = "GET".to_string();
                        body.clear();
                        extra.clear();
                    }
                    current = next;
                }
                None => {
                    return Ok(HttpExchange {
                        url: url.to_string(),
                        method: request.method,
                        request_headers: headers,
                        status: response.status,
                        response_headers: response.headers,
                        body: response.body,
                        timing_ms: started.elapsed().as_millis() as u64,
                        identity_role: identity.role,
                        final_url: current.to_string(),
                        hops,
                    })
                }
            }
        }
    }

    fn headers_for(&self, identity: &Identity, url: &ParsedUrl, extra: &[(String, String)]) -> Vec<(String, String)> {
        let mut headers = vec![("User-Agent".to_string(), identity.user_agent.clone())];
        headers.extend(identity.extra_headers.iter().cloned());
        headers.extend(extra.iter().cloned());
        if identity.role != Role::Unauthenticated {
            let path = if url.raw_path.is_empty() { "/" } else { url.raw_path.as_str() };
            if let Some(cookie) = identity.cookie_jar.header_for(&url.host, path, unix_now()) {
                headers.push(("Cookie".to_string(), cookie));
            }
        }
        headers
    }

    /// Unauthenticated identities never keep cookies, so they stay
    /// cookie-less across a whole test.
    fn absorb_cookies(&self, identity: &mut Identity, url: &ParsedUrl, response: &HttpResponse) {
        if identity.role == Role::Unauthenticated {
            return;
        }
        let path = if url.raw_path.is_empty() { "/" } else { url.raw_path.as_str() };
        let now = unix_now();
        for header in response.headers_named("set-cookie") {
            identity.cookie_jar.store_set_cookie(&url.host, path, header, now);
        }
    }

    fn send_with_retries(&self, url: &ParsedUrl, request: &HttpRequest) -> Result<HttpResponse, EngineError> {
        let mut attempt = 0;
        loop {
            self.limiter.acquire(&url.host);
            match self.transport.send(request) {
                Ok(r) => return Ok(r),
                Err(TransportError { message, retryable }) => {
                    if !retryable || attempt >= self.max_retries {
                        return Err(EngineError::Network { url: request.url.clone(), message });
                    }
                    tracing::debug!(url = %request.url, attempt, "retrying after: {message}");
                    std::thread::sleep(self.retry_backoff * (attempt as u32 + 1));
                    attempt += 1;
                }
            }
        }
    }

    /// Re-run the login descriptor when the session has expired. Returns
    /// whether a login was performed. Fresh sessions cause no traffic.
    pub fn maintain_session(&self, identity: &mut Identity) -> Result<bool, EngineError> {
        if identity.credentials.is_none() || !identity.session_expired(unix_now()) {
            return Ok(false);
        }
        self.login(identity)?;
        Ok(true)
    }

    /// Run the login descriptor unconditionally.
    pub fn login(&self, identity: &mut Identity) -> Result<(), EngineError> {
        let Some(desc) = identity.credentials.clone() else {
            return Err(EngineError::AuthFailure("identity has no credentials".into()));
        };
        if desc.steps.is_empty() {
            return Err(EngineError::AuthFailure("login descriptor has no steps".into()));
        }
        identity.cookie_jar.remove_expired(unix_now());
        if let Some(name) = &desc.session_cookie {
            let stale: Vec<_> = identity.cookie_jar.iter().filter(|c| &c.name == name).cloned().collect();
            if !stale.is_empty() {
                let mut jar = identity.cookie_jar.clone();
                jar.clear();
                for c in identity.cookie_jar.iter().filter(|c| &c.name != name) {
                    jar.insert(c.clone());
                }
                identity.cookie_jar = jar;
            }
        }

        let mut last = None;
        for step in &desc.steps {
            let fields: Vec<(String, String)> = step.fields.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            let exchange = match step.method {
                LoginMethod::Get => {
                    let url = if fields.is_empty() {
                        step.url.clone()
                    } else {
                        let q = url::form_urlencoded::Serializer::new(String::new()).extend_pairs(&fields).finish();
                        format!("{}{}{q}", step.url, if step.url.contains('?') { '&' } else { '?' })
                    };
                    self.fetch(identity, &url)
                }
                LoginMethod::Post => self.post_form(identity, &step.url, &fields),
            }
            .map_err(|e| EngineError::AuthFailure(format!("step {}: {e}", step.url)))?;
            last = Some(exchange);
        }
        let last = last.expect("at least one step");
        check_success(&desc, identity, &last)
    }
}

fn check_success(desc: &LoginDescriptor, identity: &Identity, last: &HttpExchange) -> Result<(), EngineError> {
    let s = &desc.success;
    if let Some(status) = s.status {
        if last.status != status {
            return Err(EngineError::AuthFailure(format!("expected status {status}, got {}", last.status)));
        }
    }
    if let Some(needle) = &s.body_contains {
        if !last.body_text().contains(needle.as_str()) {
            return Err(EngineError::AuthFailure(format!("response lacks `{needle}`")));
        }
    }
    if let Some(cookie) = s.cookie.as_ref().or(desc.session_cookie.as_ref()) {
        if identity.cookie_jar.get(cookie).is_none() {
            return Err(EngineError::AuthFailure(format!("no `{cookie}` cookie after login")));
        }
    }
    if s.status.is_none() && s.body_contains.is_none() && s.cookie.is_none() && last.status >= 400 {
        return Err(EngineError::AuthFailure(format!("login ended with status {}", last.status)));
    }
    Ok(())
}

fn is_redirect(status: u16) -> bool {
    matches!(status, 301 | 302 | 303 | 307 | 308)
}
