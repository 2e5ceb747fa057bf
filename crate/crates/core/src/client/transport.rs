use std::collections::HashMap;
use std::io::Read;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use ureq::config::Config;
use ureq::http;
use ureq::unversioned::resolver::{DefaultResolver, ResolvedSocketAddrs, Resolver};
use ureq::unversioned::transport::{DefaultConnector, NextTimeout};

const MAX_BODY_BYTES: u64 = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpRequest {
    pub fn get(url: &str) -> Self {
        HttpRequest { method: "GET".into(), url: url.to_string(), headers: Vec::new(), body: Vec::new() }
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn headers_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.headers.iter().filter(move |(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    /// Connection-level failures are retryable; malformed requests are not.
    pub retryable: bool,
}

/// Moves one request to a server and back. No redirects, no cookies: those
/// belong to the engine.
pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

/// Host name to socket address overrides, e.g. to point `*.test` names at a
/// local lab listener. Keys are exact host names or `*.suffix` wildcards.
#[derive(Debug, Clone, Default)]
pub struct HostOverrides {
    exact: HashMap<String, SocketAddr>,
    wildcard: Vec<(String, SocketAddr)>,
}

impl HostOverrides {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, host: &str, addr: SocketAddr) {
        let host = host.to_ascii_lowercase();
        match host.strip_prefix("*.") {
            Some(suffix) => self.wildcard.push((format!(".{suffix}"), addr)),
            None => {
                self.exact.insert(host, addr);
            }
        }
    }

    /// Parse `HOST=ADDR` (as accepted on the command line).
    pub fn insert_spec(&mut self, spec: &str) -> Result<(), String> {
        let (host, addr) = spec.split_once('=').ok_or_else(|| format!("expected HOST=ADDR, got `{spec}`"))?;
        let addr: SocketAddr = addr.parse().map_err(|e| format!("bad address in `{spec}`: {e}"))?;
        self.insert(host, addr);
        Ok(())
    }

    pub fn lookup(&self, host: &str) -> Option<SocketAddr> {
        let host = host.to_ascii_lowercase();
        self.exact
            .get(&host)
            .copied()
            .or_else(|| self.wildcard.iter().find(|(suffix, _)| host.ends_with(suffix.as_str())).map(|(_, a)| *a))
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty() && self.wildcard.is_empty()
    }
}

#[derive(Debug)]
struct OverridingResolver {
    overrides: HostOverrides,
    fallback: DefaultResolver,
}

impl Resolver for OverridingResolver {
    fn resolve(&self, uri: &http::Uri, config: &Config, timeout: NextTimeout) -> Result<ResolvedSocketAddrs, ureq::Error> {
        if let Some(addr) = uri.host().and_then(|h| self.overrides.lookup(h)) {
            let mut out = self.empty();
            out.push(addr);
            return Ok(out);
        }
        self.fallback.resolve(uri, config, timeout)
    }
}

/// Blocking HTTP/1.1 transport. Proxy settings are taken from the
/// environment (`HTTP_PROXY`, `HTTPS_PROXY`, `NO_PROXY`).
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(overrides: HostOverrides, timeout: Duration) -> Self {
        Self::build(overrides, timeout, ureq::Proxy::try_from_env())
    }

    /// Ignore proxy settings from the environment.
    pub fn direct(overrides: HostOverrides, timeout: Duration) -> Self {
        Self::build(overrides, timeout, None)
    }

    fn build(overrides: HostOverrides, timeout: Duration, proxy: Option<ureq::Proxy>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .max_redirects(0)
            .timeout_global(Some(timeout))
            .user_agent(ureq::config::AutoHeaderValue::None)
            .accept(ureq::config::AutoHeaderValue::None)
            .proxy(proxy)
            .build();
        let resolver = OverridingResolver { overrides, fallback: DefaultResolver::default() };
        UreqTransport { agent: ureq::Agent::with_parts(config, DefaultConnector::default(), resolver) }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        UreqTransport::new(HostOverrides::new(), Duration::from_secs(30))
    }
}

fn classify(err: ureq::Error) -> TransportError {
    let retryable = matches!(
        err,
        ureq::Error::Io(_) | ureq::Error::Timeout(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound
    );
    TransportError { message: err.to_string(), retryable }
}

impl Transport for UreqTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut builder = http::Request::builder().method(request.method.as_str()).uri(request.url.as_str());
        for (k, v) in &request.headers {
            builder = builder.header(k.as_str(), v.as_str());
        }
        let req = builder
            .body(request.body.clone())
            .map_err(|e| TransportError { message: format!("invalid request: {e}"), retryable: false })?;

        let mut resp = self.agent.run(req).map_err(classify)?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .map(|(k, v)| (k.as_str().to_string(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
            .collect();
        let mut body = Vec::new();
        resp.body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .reader()
            .read_to_end(&mut body)
            .map_err(|e| TransportError { message: e.to_string(), retryable: true })?;
        Ok(HttpResponse { status, headers, body })
    }
}
