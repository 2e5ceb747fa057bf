use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::site::{render, RenderContext, ResourceKind, UnauthBehavior};
use super::{route_path, SimSite};
use crate::policy::{decide, ResponseCacheHeaders};
use crate::urls::percent_decode;

/// 2025-01-01T00:00:00Z; simulated time starts here.
pub const SIM_EPOCH: u64 = 1_735_689_600;

pub const REGION_HEADER: &str = "x-lab-region";
pub const DEFAULT_REGION: &str = "default";

/// Simulated seconds. Moves only through [`SimClock::advance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    now: u64,
}

impl Default for SimClock {
    fn default() -> Self {
        SimClock { now: SIM_EPOCH }
    }
}

impl SimClock {
    pub fn at(now: u64) -> Self {
        SimClock { now }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn advance(&mut self, seconds: u64) {
        self.now = self.now.saturating_add(seconds);
    }

    pub fn http_date(&self) -> String {
        httpdate::fmt_http_date(UNIX_EPOCH + Duration::from_secs(self.now))
    }
}

/// Return `clock` moved forward by `seconds`.
pub fn advance_clock(mut clock: SimClock, seconds: u64) -> SimClock {
    clock.advance(seconds);
    clock
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
    pub stored_at: u64,
    pub ttl: u64,
}

impl CacheEntry {
    pub fn fresh_at(&self, now: u64) -> bool {
        self.stored_at.saturating_add(self.ttl) > now
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheEvent {
    Hit,
    MissStored,
    MissNotStored,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabRequest {
    pub method: String,
    /// Path and query exactly as on the request line.
    pub target: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl LabRequest {
    pub fn get(target: &str) -> Self {
        LabRequest { method: "GET".into(), target: target.into(), headers: Vec::new(), body: Vec::new() }
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    fn cookie(&self, name: &str) -> Option<String> {
        self.headers
            .iter()
            .filter(|(k, _)| k.eq_ignore_ascii_case("cookie"))
            .flat_map(|(_, v)| v.split(';'))
            .filter_map(|p| p.trim().split_once('='))
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl LabResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn body_text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

#[derive(Debug, Clone)]
struct Session {
    account: usize,
    csrf: String,
}

/// What the origin produced for one request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OriginResponse {
    /// Routed resource path, `None` for 404.
    pub resource: Option<String>,
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

fn html(headers: &mut Vec<(String, String)>) {
    if !headers.iter().any(|(k, _)| k.eq_ignore_ascii_case("content-type")) {
        headers.push(("Content-Type".into(), "text/html; charset=utf-8".into()));
    }
}

const NOT_FOUND: &str = "<!doctype html>\n<html><head><title>404 Not Found</title></head>\n<body>\n<h1>Not Found</h1>\n<p>The requested URL {{path}} was not found on this server.</p>\n</body></html>\n";

/// Origin behaviour for a GET of `raw_target`. `session` is the logged-in
/// account index and its CSRF token.
pub fn origin_resolve(
    site: &SimSite,
    raw_target: &str,
    session: Option<(usize, &str)>,
    clock: &SimClock,
) -> OriginResponse {
    let date = clock.http_date();
    let path_only = raw_target.split('?').next().unwrap_or("");
    let Some(resource_path) = route_path(&site.origin, raw_target, |p| site.resources.contains_key(p)) else {
        let ctx = RenderContext { account: None, csrf: "", date: &date, path: path_only };
        let mut headers = Vec::new();
        html(&mut headers);
        return OriginResponse { resource: None, status: 404, headers, body: render(NOT_FOUND, &ctx) };
    };
    let res = &site.resources[&resource_path];
    if res.protected && session.is_none() {
        let (status, headers, body) = match site.auth.unauthenticated {
            UnauthBehavior::Redirect => {
                (302, vec![("Location".to_string(), site.auth.login_path.clone())], String::new())
            }
            UnauthBehavior::Forbidden => (403, Vec::new(), "<!doctype html>\n<h1>Forbidden</h1>\n".to_string()),
        };
        return OriginResponse { resource: Some(resource_path), status, headers, body };
    }
    let account = session.and_then(|(i, _)| site.auth.accounts.get(i));
    let ctx = RenderContext { account, csrf: session.map_or("", |(_, c)| c), date: &date, path: path_only };
    let mut headers = res.headers.clone();
    html(&mut headers);
    OriginResponse { resource: Some(resource_path.clone()), status: res.status, headers, body: render(&res.body, &ctx) }
}

/// Path and query as the caching proxy sees them.
pub fn proxy_view(target: &str, decodes_percent: bool) -> String {
    if !decodes_percent {
        return target.to_string();
    }
    let (path, query) = match target.split_once('?') {
        Some((p, q)) => (p, Some(q)),
        None => (target, None),
    };
    let mut decoded = percent_decode(path);
    if let Some(i) = decoded.find(['\n', ';', '#', '?']) {
        decoded.truncate(i);
    }
    match query {
        Some(q) => format!("{decoded}?{q}"),
        None => decoded,
    }
}

/// Origin and cache state for one simulated site. Single-threaded: callers
/// serialise access.
#[derive(Debug)]
pub struct SiteRuntime {
    pub site: Arc<SimSite>,
    pub clock: SimClock,
    cache: HashMap<(String, String), CacheEntry>,
    sessions: HashMap<String, Session>,
    rng: ChaCha8Rng,
    origin_requests: u64,
}

impl SiteRuntime {
    pub fn new(site: Arc<SimSite>) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(site.seed ^ 0x5eed_5e55_10a5);
        SiteRuntime {
            site,
            clock: SimClock::default(),
            cache: HashMap::new(),
            sessions: HashMap::new(),
            rng,
            origin_requests: 0,
        }
    }

    /// Requests that reached the origin so far.
    pub fn origin_requests(&self) -> u64 {
        self.origin_requests
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    pub fn advance_clock(&mut self, seconds: u64) {
        self.clock.advance(seconds);
    }

    fn token(&mut self, n: usize) -> String {
        const A: &[u8] = b"0123456789abcdef";
        (0..n).map(|_| A[self.rng.random_range(0..A.len())] as char).collect()
    }

    /// Start a session for `account` directly, returning the session id.
    pub fn open_session(&mut self, account: usize) -> String {
        let sid = self.token(32);
        let csrf = self.token(32);
        self.sessions.insert(sid.clone(), Session { account, csrf });
        sid
    }

    fn session_of(&self, req: &LabRequest) -> Option<(usize, String)> {
        let sid = req.cookie(&self.site.auth.session_cookie)?;
        self.sessions.get(&sid).map(|s| (s.account, s.csrf.clone()))
    }

    /// Forward one request to the origin.
    fn origin(&mut self, req: &LabRequest) -> LabResponse {
        self.origin_requests += 1;
        let site = self.site.clone();
        let routed = route_path(&site.origin, &req.target, |p| site.resources.contains_key(p));
        let kind = routed.as_ref().map(|p| site.resources[p].kind).unwrap_or_default();
        let date = ("Date".to_string(), self.clock.http_date());

        match kind {
            ResourceKind::Login if req.method == "POST" => {
                let form: HashMap<String, String> = url::form_urlencoded::parse(&req.body).into_owned().collect();
                let found = site.auth.accounts.iter().position(|a| {
                    Some(&a.username) == form.get("username") && Some(&a.password) == form.get("password")
                });
                return match found {
                    Some(i) => {
                        let sid = self.open_session(i);
                        LabResponse {
                            status: 302,
                            headers: vec![
                                date,
                                ("Location".into(), "/account.php".into()),
                                ("Set-Cookie".into(), format!("{}={sid}; Path=/; HttpOnly", site.auth.session_cookie)),
                            ],
                            body: Vec::new(),
                        }
                    }
                    None => LabResponse {
                        status: 200,
                        headers: vec![date, ("Content-Type".into(), "text/html; charset=utf-8".into())],
                        body: b"<!doctype html>\n<p>Invalid username or password.</p>\n".to_vec(),
                    },
                };
            }
            ResourceKind::Logout => {
                if let Some(sid) = req.cookie(&site.auth.session_cookie) {
                    self.sessions.remove(&sid);
                }
                return LabResponse {
                    status: 302,
                    headers: vec![
                        date,
                        ("Location".into(), "/".into()),
                        ("Set-Cookie".into(), format!("{}=; Path=/; Max-Age=0", site.auth.session_cookie)),
                    ],
                    body: Vec::new(),
                };
            }
            _ => {}
        }

        let session = self.session_of(req);
        let r = origin_resolve(&site, &req.target, session.as_ref().map(|(i, c)| (*i, c.as_str())), &self.clock);
        let mut headers = vec![date];
        headers.extend(r.headers);
        LabResponse { status: r.status, headers, body: r.body.into_bytes() }
    }

    /// Serve `req` through the cache. GETs are looked up by region and
    /// proxy-visible URL; misses go to the origin and are stored when the
    /// site's cache profile says so. Other methods always reach the origin.
    pub fn proxy_handle(&mut self, req: &LabRequest) -> (LabResponse, CacheEvent) {
        let now = self.clock.now();
        if req.method != "GET" && req.method != "HEAD" {
            let mut resp = self.origin(req);
            self.decorate(&mut resp, CacheEvent::MissNotStored, None);
            return (resp, CacheEvent::MissNotStored);
        }
        let view = proxy_view(&req.target, self.site.proxy_decodes_percent);
        let key = format!("{}{}", self.site.host, view);
        let region = req.header(REGION_HEADER).unwrap_or(DEFAULT_REGION).to_ascii_lowercase();
        let slot = (region, key.clone());

        let mut expired = false;
        match self.cache.get(&slot) {
            Some(e) if e.fresh_at(now) => {
                let e = e.clone();
                return (self.serve_hit(&e, now), CacheEvent::Hit);
            }
            Some(_) => {
                self.cache.remove(&slot);
                expired = true;
            }
            None => {}
        }
        if self.site.tiered_retry && !expired {
            let other = self.cache.iter().find(|((_, k), e)| *k == key && e.fresh_at(now)).map(|(_, e)| e.clone());
            if let Some(e) = other {
                return (self.serve_hit(&e, now), CacheEvent::Hit);
            }
        }

        let mut resp = self.origin(req);
        let cache_path = view.split('?').next().unwrap_or("");
        let directives = ResponseCacheHeaders::from_headers(resp.headers.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .directives();
        let decision = decide(&self.site.cache_profile, cache_path, resp.status, &directives);
        let event = if decision.store {
            let ttl = self.site.ttl_override.unwrap_or(decision.ttl);
            let headers = resp.headers.iter().filter(|(k, _)| !k.eq_ignore_ascii_case("set-cookie")).cloned().collect();
            self.cache.insert(
                slot,
                CacheEntry { key, status: resp.status, headers, body: resp.body.clone(), stored_at: now, ttl },
            );
            if expired { CacheEvent::Expired } else { CacheEvent::MissStored }
        } else if expired {
            CacheEvent::Expired
        } else {
            CacheEvent::MissNotStored
        };
        self.decorate(&mut resp, event, None);
        (resp, event)
    }

    fn serve_hit(&self, e: &CacheEntry, now: u64) -> LabResponse {
        let mut resp = LabResponse { status: e.status, headers: e.headers.clone(), body: e.body.clone() };
        self.decorate(&mut resp, CacheEvent::Hit, Some(now - e.stored_at));
        resp
    }

    /// Vendor-style response headers, so fingerprinting can be exercised.
    fn decorate(&self, resp: &mut LabResponse, event: CacheEvent, age: Option<u64>) {
        let hit = event == CacheEvent::Hit;
        if let Some(age) = age {
            resp.headers.push(("Age".into(), age.to_string()));
        }
        let name = self.site.cache_profile.name.to_ascii_lowercase();
        let h = &mut resp.headers;
        let id = format!("{:016x}", self.site.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        if name.starts_with("akamai") {
            h.push(("Server".into(), "AkamaiGHost".into()));
            let state = if hit { "TCP_HIT" } else { "TCP_MISS" };
            h.push(("X-Cache".into(), format!("{state} from a23-45-67-89.deploy.akamaitechnologies.com")));
        } else if name.starts_with("cloudflare") {
            h.push(("Server".into(), "cloudflare".into()));
            h.push(("CF-Ray".into(), format!("{}-BOS", &id[..16])));
            let state = match event {
                CacheEvent::Hit => "HIT",
                CacheEvent::MissStored => "MISS",
                CacheEvent::Expired => "EXPIRED",
                CacheEvent::MissNotStored => "DYNAMIC",
            };
            h.push(("CF-Cache-Status".into(), state.into()));
        } else if name.starts_with("cloudfront") {
            h.push(("Via".into(), format!("1.1 {}.cloudfront.net (CloudFront)", &id[..12])));
            h.push(("X-Amz-Cf-Pop".into(), "BOS50-C1".into()));
            h.push(("X-Cache".into(), if hit { "Hit from cloudfront" } else { "Miss from cloudfront" }.into()));
        } else if name.starts_with("fastly") {
            h.push(("Via".into(), "1.1 varnish".into()));
            h.push(("X-Served-By".into(), "cache-bos4620-BOS".into()));
            h.push(("X-Cache".into(), if hit { "HIT" } else { "MISS" }.into()));
        } else {
            h.push(("X-Cache".into(), if hit { "HIT" } else { "MISS" }.into()));
        }
    }
}

/// Stateless entry point: serve `req` for the site held by `runtime`.
pub fn proxy_handle(runtime: &mut SiteRuntime, req: &LabRequest) -> (LabResponse, CacheEvent) {
    runtime.proxy_handle(req)
}
