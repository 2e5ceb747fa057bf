use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{HeaderMap, Method, Response, Uri};
use serde::Serialize;

use super::{CacheEvent, LabRequest, LabResponse, SimSite, SiteRuntime, REGION_HEADER};
use crate::detector::AttackerDelay;
use crate::client::{HostOverrides, HttpRequest, HttpResponse, Transport, TransportError};
use crate::urls::parse_url;

/// One request as it arrived at the lab.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequestRecord {
    pub host: String,
    pub method: String,
    pub target: String,
    pub region: Option<String>,
    pub event: Option<CacheEvent>,
    /// Wall time since the lab was created.
    pub arrived: Duration,
    pub sim_time: u64,
}

/// A set of simulated sites addressed by host name. Each site is guarded by
/// its own lock, so requests to one site are handled one at a time while
/// different sites proceed in parallel.
pub struct Lab {
    sites: Vec<Mutex<SiteRuntime>>,
    by_host: HashMap<String, usize>,
    log: Mutex<Vec<RequestRecord>>,
    started: Instant,
}

impl Lab {
    pub fn new(sites: Vec<SimSite>) -> Self {
        let by_host = sites.iter().enumerate().map(|(i, s)| (s.host.clone(), i)).collect();
        Lab {
            sites: sites.into_iter().map(|s| Mutex::new(SiteRuntime::new(Arc::new(s)))).collect(),
            by_host,
            log: Mutex::new(Vec::new()),
            started: Instant::now(),
        }
    }

    pub fn sites(&self) -> Vec<Arc<SimSite>> {
        self.sites.iter().map(|s| s.lock().unwrap().site.clone()).collect()
    }

    pub fn hosts(&self) -> Vec<String> {
        let mut h: Vec<String> = self.by_host.keys().cloned().collect();
        h.sort();
        h
    }

    pub fn site(&self, host: &str) -> Option<Arc<SimSite>> {
        let i = *self.by_host.get(&strip_port(host))?;
        Some(self.sites[i].lock().unwrap().site.clone())
    }

    /// Run `f` on the runtime of `host` under its lock.
    pub fn with_runtime<T>(&self, host: &str, f: impl FnOnce(&mut SiteRuntime) -> T) -> Option<T> {
        let i = *self.by_host.get(&strip_port(host))?;
        let mut rt = self.sites[i].lock().unwrap();
        Some(f(&mut rt))
    }

    pub fn advance_all(&self, seconds: u64) {
        for s in &self.sites {
            s.lock().unwrap().advance_clock(seconds);
        }
    }

    pub fn handle(&self, host: &str, req: &LabRequest) -> LabResponse {
        let arrived = self.started.elapsed();
        let host = strip_port(host);
        let outcome = self.by_host.get(&host).map(|&i| {
            let mut rt = self.sites[i].lock().unwrap();
            let sim_time = rt.clock.now();
            let (resp, event) = rt.proxy_handle(req);
            (resp, event, sim_time)
        });
        let (resp, event, sim_time) = match outcome {
            Some((r, e, t)) => (r, Some(e), t),
            None => (
                LabResponse {
                    status: 421,
                    headers: vec![("Content-Type".into(), "text/plain".into())],
                    body: format!("no site for host `{host}`\n").into_bytes(),
                },
                None,
                0,
            ),
        };
        self.log.lock().unwrap().push(RequestRecord {
            host,
            method: req.method.clone(),
            target: req.target.clone(),
            region: req.header(REGION_HEADER).map(str::to_string),
            event,
            arrived,
            sim_time,
        });
        resp
    }

    pub fn log(&self) -> Vec<RequestRecord> {
        self.log.lock().unwrap().clone()
    }

    pub fn clear_log(&self) {
        self.log.lock().unwrap().clear();
    }
}

fn strip_port(host: &str) -> String {
    let h = host.trim().to_ascii_lowercase();
    if let Some(rest) = h.strip_prefix('[') {
        return match rest.split_once(']') {
            Some((inner, _)) => format!("[{inner}]"),
            None => h,
        };
    }
    match h.rsplit_once(':') {
        Some((name, port)) if !name.contains(':') && port.bytes().all(|b| b.is_ascii_digit()) => name.to_string(),
        _ => h,
    }
}

/// Sends requests straight into a [`Lab`] without sockets.
#[derive(Clone)]
pub struct LabTransport {
    lab: Arc<Lab>,
}

impl LabTransport {
    pub fn new(lab: Arc<Lab>) -> Self {
        LabTransport { lab }
    }
}

impl Transport for LabTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let url = parse_url(&request.url).map_err(|e| TransportError { message: e.to_string(), retryable: false })?;
        if !self.lab.by_host.contains_key(&url.host) {
            return Err(TransportError { message: format!("unknown host {}", url.host), retryable: false });
        }
        let req = LabRequest {
            method: request.method.clone(),
            target: url.request_target(),
            headers: request.headers.clone(),
            body: request.body.clone(),
        };
        let resp = self.lab.handle(&url.host, &req);
        Ok(HttpResponse { status: resp.status, headers: resp.headers, body: resp.body })
    }
}

/// Attacker delay that advances the simulated clock of the site being
/// attacked instead of sleeping.
#[derive(Clone)]
pub struct LabDelay {
    lab: Arc<Lab>,
}

impl LabDelay {
    pub fn new(lab: Arc<Lab>) -> Self {
        LabDelay { lab }
    }
}

impl AttackerDelay for LabDelay {
    fn wait(&self, seconds: u64, target: &str) {
        if let Ok(url) = parse_url(target) {
            self.lab.with_runtime(&url.host, |rt| rt.advance_clock(seconds));
        }
    }
}

/// The lab served over HTTP/1.1 on a local socket. Dropping the value stops
/// the listener.
pub struct LabServer {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl LabServer {
    pub fn start(lab: Arc<Lab>, addr: SocketAddr) -> std::io::Result<LabServer> {
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build()?;
        let thread = std::thread::Builder::new().name("wcd-lab".into()).spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
                let app = axum::Router::new().fallback(serve).with_state(lab);
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        })?;
        Ok(LabServer { addr, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Resolve every lab host to this listener.
    pub fn overrides(&self, lab: &Lab) -> HostOverrides {
        let mut o = HostOverrides::new();
        for h in lab.hosts() {
            o.insert(&h, self.addr);
        }
        o
    }

    /// Block until the listener stops.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for LabServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

async fn serve(State(lab): State<Arc<Lab>>, method: Method, uri: Uri, headers: HeaderMap, body: Bytes) -> Response<Body> {
    let host = headers
        .get("host")
        .and_then(|h| h.to_str().ok())
        .map(str::to_string)
        .or_else(|| uri.host().map(str::to_string))
        .unwrap_or_default();
    let target = uri.path_and_query().map(|p| p.as_str().to_string()).unwrap_or_else(|| "/".into());
    let req = LabRequest {
        method: method.as_str().to_string(),
        target,
        headers: headers
            .iter()
            .map(|(k, v)| (k.as_str().to_string(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
            .collect(),
        body: body.to_vec(),
    };
    let resp = tokio::task::spawn_blocking(move || lab.handle(&host, &req)).await.unwrap_or_else(|e| LabResponse {
        status: 500,
        headers: Vec::new(),
        body: e.to_string().into_bytes(),
    });
    let mut builder = Response::builder().status(resp.status);
    for (k, v) in &resp.headers {
        builder = builder.header(k.as_str(), v.as_str());
    }
    builder.body(Body::from(resp.body)).unwrap_or_else(|_| Response::new(Body::from("bad response")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ports_are_stripped() {
        assert_eq!(strip_port("WWW.A.test:8080"), "www.a.test");
        assert_eq!(strip_port("www.a.test"), "www.a.test");
        assert_eq!(strip_port("[::1]:80"), "[::1]");
    }
}
