use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::client::{HttpEngine, Identity, Role};
use crate::config::{read, ConfigError};
use crate::urls::{parse_url, registrable_domain};

/// One measured site: a primary host and the other hosts under the same
/// registrable domain. Hosts are stored as origins (`scheme://host[:port]`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSite {
    pub primary: String,
    #[serde(default)]
    pub subdomains: Vec<String>,
    /// Site file with login descriptors (and possibly markers).
    #[serde(default)]
    pub login: Option<PathBuf>,
    /// Marker file.
    #[serde(default)]
    pub markers: Option<PathBuf>,
}

impl SeedSite {
    pub fn hosts(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.primary).chain(self.subdomains.iter())
    }

    pub fn site_name(&self) -> String {
        let host = parse_url(&self.primary).map(|u| u.host).unwrap_or_default();
        registrable_domain(&host)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPool {
    pub sites: Vec<SeedSite>,
}

impl SeedPool {
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn host_count(&self) -> usize {
        self.sites.iter().map(|s| 1 + s.subdomains.len()).sum()
    }

    /// Parse a seed file. One host per line as `[scheme://]host[:port]`
    /// followed by optional `login=<file>` and `markers=<file>` references,
    /// resolved against `base_dir`. `#` starts a comment. The scheme
    /// defaults to https. Hosts sharing a registrable domain form one site
    /// whose primary is the first of them listed; repeated hosts are
    /// dropped.
    pub fn parse(text: &str, base_dir: &Path, origin: &str) -> Result<SeedPool, ConfigError> {
        let mut sites: Vec<SeedSite> = Vec::new();
        let mut by_site: HashMap<String, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| ConfigError::SeedLine { path: origin.to_string(), line: i + 1, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let host = parts.next().expect("non-empty line");
            let with_scheme = if host.contains("://") { host.to_string() } else { format!("https://{host}") };
            let url = parse_url(&with_scheme).map_err(|e| err(format!("bad host `{host}`: {e}")))?;
            if url.host.is_empty() || url.raw_path.len() > 1 || url.raw_query.is_some() {
                return Err(err(format!("expected a bare host, got `{host}`")));
            }
            let mut login = None;
            let mut markers = None;
            for part in parts {
                match part.split_once('=') {
                    Some(("login", v)) if !v.is_empty() => login = Some(base_dir.join(v)),
                    Some(("markers", v)) if !v.is_empty() => markers = Some(base_dir.join(v)),
                    _ => return Err(err(format!("unexpected `{part}`"))),
                }
            }
            let origin_text = url.origin();
            let key = registrable_domain(&url.host);
            match by_site.get(&key) {
                None => {
                    by_site.insert(key, sites.len());
                    sites.push(SeedSite { primary: origin_text, subdomains: Vec::new(), login, markers });
                }
                Some(&idx) => {
                    let site = &mut sites[idx];
                    if site.hosts().any(|h| *h == origin_text) {
                        if login.is_some() && login != site.login || markers.is_some() && markers != site.markers {
                            return Err(err(format!("conflicting references for `{host}`")));
                        }
                        continue;
                    }
                    for (slot, new) in [(&mut site.login, login), (&mut site.markers, markers)] {
                        match (&slot, new) {
                            (_, None) => {}
                            (None, Some(v)) => *slot = Some(v),
                            (Some(a), Some(b)) if *a == b => {}
                            _ => return Err(err(format!("conflicting references for site of `{host}`"))),
                        }
                    }
                    site.subdomains.push(origin_text);
                }
            }
        }
        Ok(SeedPool { sites })
    }

    pub fn load(path: &Path) -> Result<SeedPool, ConfigError> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&read(path)?, base, &path.display().to_string())
    }

    /// Keep only hosts that answer an HTTP request at all. A site whose
    /// primary is down but has a live subdomain is kept with that
    /// subdomain promoted.
    pub fn retain_live(self, engine: &HttpEngine, workers: usize) -> SeedPool {
        let hosts: Vec<String> = self.sites.iter().flat_map(|s| s.hosts().cloned()).collect();
        let live = probe_all(engine, &hosts, workers);
        let sites = self
            .sites
            .into_iter()
            .filter_map(|s| {
                let mut alive: Vec<String> = s.hosts().filter(|h| live.get(*h).copied().unwrap_or(false)).cloned().collect();
                if alive.is_empty() {
                    tracing::info!(site = %s.primary, "no responsive host, dropped");
                    return None;
                }
                let primary = alive.remove(0);
                Some(SeedSite { primary, subdomains: alive, ..s })
            })
            .collect();
        SeedPool { sites }
    }
}

/// True when a GET of the host root produces any HTTP response.
pub fn probe(engine: &HttpEngine, origin: &str) -> bool {
    let mut id = Identity::new(Role::Unauthenticated);
    match engine.fetch(&mut id, &format!("{origin}/")) {
        Ok(_) => true,
        Err(crate::client::EngineError::TooManyRedirects { .. }) => true,
        Err(e) => {
            tracing::info!(host = origin, error = %e, "liveness probe failed");
            false
        }
    }
}

fn probe_all(engine: &HttpEngine, hosts: &[String], workers: usize) -> HashMap<String, bool> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let out = std::sync::Mutex::new(HashMap::new());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, hosts.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(h) = hosts.get(i) else { break };
                let ok = probe(engine, h);
                out.lock().unwrap().insert(h.clone(), ok);
            });
        }
    });
    out.into_inner().unwrap()
}

/// Read a seed file and drop unresponsive hosts.
pub fn ingest_domains(path: &Path, engine: &HttpEngine, workers: usize) -> Result<SeedPool, ConfigError> {
    Ok(SeedPool::load(path)?.retain_live(engine, workers))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(t: &str) -> Result<SeedPool, ConfigError> {
        SeedPool::parse(t, Path::new("/seeds"), "seeds.txt")
    }

    #[test]
    fn grouping_and_dedup() {
        let p = parse(
            "# pool\nwww.shop.example login=shop.toml\napi.shop.example\nwww.shop.example\nhttp://blog.test:8080 markers=m.toml # lab\n",
        )
        .unwrap();
        assert_eq!(p.sites.len(), 2);
        assert_eq!(p.sites[0].primary, "https://www.shop.example");
        assert_eq!(p.sites[0].subdomains, vec!["https://api.shop.example"]);
        assert_eq!(p.sites[0].login.as_deref(), Some(Path::new("/seeds/shop.toml")));
        assert_eq!(p.sites[1].primary, "http://blog.test:8080");
        assert_eq!(p.host_count(), 3);
    }

    #[test]
    fn malformed_lines() {
        for bad in ["www.a.example foo", "www.a.example login=", "https://www.a.example/path", "http://"] {
            let e = parse(bad).unwrap_err();
            assert!(matches!(e, ConfigError::SeedLine { line: 1, .. }), "{bad}: {e}");
        }
        assert!(parse("www.a.example login=a.toml\napi.a.example login=b.toml").is_err());
        assert!(parse("").unwrap().is_empty());
    }
}
