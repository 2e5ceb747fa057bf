use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::client::{HttpEngine, Identity, LogoutBlacklist};
use crate::detector::{anchor_hrefs, extract_markers, MarkerSet};
use crate::policy::{path_extension, DEFAULT_STATIC_EXTENSIONS};
use crate::urls::{group_key, parse_url, resolve_reference, same_site, select_representatives, ParsedUrl, UrlGroupKey};

/// Safety valve on fetched pages, as a multiple of the group budget.
pub const RAW_CAP_FACTOR: usize = 10;

#[derive(Debug, Clone)]
pub struct CrawlOptions {
    /// Maximum number of distinct page groups.
    pub budget: usize,
    /// Seed for representative selection.
    pub seed: u64,
    pub blacklist: LogoutBlacklist,
}

impl CrawlOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        CrawlOptions { budget, seed, blacklist: LogoutBlacklist::default() }
    }
}

/// Pages found on one domain, one per structural group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackSurface {
    pub domain: String,
    pub pages: Vec<ParsedUrl>,
    /// Distinct HTML pages fetched while crawling.
    pub pages_seen: usize,
    /// The group budget or the raw page cap stopped the crawl early.
    pub truncated: bool,
    /// Victim-rendered body of each representative, keyed by URL.
    #[serde(skip)]
    pub victim_bodies: BTreeMap<String, Vec<u8>>,
}

impl AttackSurface {
    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }
}

fn is_static(url: &ParsedUrl) -> bool {
    path_extension(&url.raw_path).is_some_and(|e| DEFAULT_STATIC_EXTENSIONS.contains(&e.as_str()))
}

fn is_html(content_type: Option<&str>) -> bool {
    content_type.is_none_or(|c| {
        let c = c.to_ascii_lowercase();
        c.contains("html") || c.contains("xml")
    })
}

fn page_key(url: &ParsedUrl) -> String {
    let mut u = url.clone();
    u.fragment = None;
    u.to_string()
}

/// Breadth-first crawl of `start` as the victim. Links are followed when
/// they stay on the same registrable domain, are not static files and do
/// not look like logout links. Crawling stops once `budget` distinct group
/// keys have been seen, or after `RAW_CAP_FACTOR × budget` pages.
pub fn crawl_domain(engine: &HttpEngine, victim: &mut Identity, start: &ParsedUrl, opts: &CrawlOptions) -> AttackSurface {
    let budget = opts.budget.max(1);
    let raw_cap = budget.saturating_mul(RAW_CAP_FACTOR);
    let mut queue: VecDeque<ParsedUrl> = VecDeque::from([start.clone()]);
    let mut queued: HashSet<String> = HashSet::from([page_key(start)]);
    let mut collected: Vec<ParsedUrl> = Vec::new();
    let mut collected_keys: HashSet<String> = HashSet::new();
    let mut groups: HashSet<UrlGroupKey> = HashSet::new();
    let mut bodies: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let mut fetches = 0usize;
    let mut truncated = false;

    while let Some(url) = queue.pop_front() {
        if groups.len() >= budget || fetches >= raw_cap {
            truncated = true;
            break;
        }
        if let Err(e) = engine.maintain_session(victim) {
            tracing::warn!(domain = %start.host, error = %e, "victim login failed during crawl");
        }
        fetches += 1;
        let exchange = match engine.fetch(victim, &url.to_string()) {
            Ok(x) => x,
            Err(e) => {
                tracing::warn!(url = %url, error = %e, "crawl fetch failed");
                continue;
            }
        };
        let Ok(final_url) = parse_url(&exchange.final_url) else { continue };
        if !same_site(&final_url.host, &start.host) || opts.blacklist.matches(&final_url.to_string()) {
            continue;
        }
        if !(200..300).contains(&exchange.status) || !is_html(exchange.header("content-type")) {
            continue;
        }
        let key = page_key(&final_url);
        if collected_keys.insert(key.clone()) {
            groups.insert(group_key(&final_url));
            collected.push(final_url.clone());
            bodies.insert(key, exchange.body.clone());
        }

        for href in anchor_hrefs(&exchange.body) {
            let Some(link) = resolve_reference(&final_url, &href) else { continue };
            if !same_site(&link.host, &start.host) || is_static(&link) || opts.blacklist.matches(&link.to_string()) {
                continue;
            }
            if queued.insert(page_key(&link)) {
                queue.push_back(link);
            }
        }
    }

    let pages = select_representatives(&collected, opts.seed);
    let victim_bodies = pages
        .iter()
        .filter_map(|p| {
            let k = page_key(p);
            bodies.remove(&k).map(|b| (k, b))
        })
        .collect();
    AttackSurface { domain: start.host.clone(), pages, pages_seen: collected.len(), truncated, victim_bodies }
}

/// Keep the pages whose victim rendering contains at least one marker.
/// Pages without a recorded body are dropped.
pub fn filter_marked_pages(surface: AttackSurface, markers: &MarkerSet) -> AttackSurface {
    let AttackSurface { domain, pages, pages_seen, truncated, mut victim_bodies } = surface;
    let pages: Vec<ParsedUrl> = pages
        .into_iter()
        .filter(|p| victim_bodies.get(&page_key(p)).is_some_and(|b| !extract_markers(b, markers).is_empty()))
        .collect();
    let keep: HashSet<String> = pages.iter().map(page_key).collect();
    victim_bodies.retain(|k, _| keep.contains(k));
    AttackSurface { domain, pages, pages_seen, truncated, victim_bodies }
}

/// Fetch the victim rendering of any representative that lacks one (after
/// resuming from a journal, for example).
pub fn fill_victim_bodies(engine: &HttpEngine, victim: &mut Identity, surface: &mut AttackSurface) {
    for p in &surface.pages {
        let k = page_key(p);
        if surface.victim_bodies.contains_key(&k) {
            continue;
        }
        let _ = engine.maintain_session(victim);
        match engine.fetch(victim, &k) {
            Ok(x) => {
                surface.victim_bodies.insert(k, x.body);
            }
            Err(e) => tracing::warn!(url = %k, error = %e, "victim refetch failed"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::Marker;

    fn surface(bodies: &[(&str, &str)]) -> AttackSurface {
        AttackSurface {
            domain: "a.test".into(),
            pages: bodies.iter().map(|(u, _)| parse_url(u).unwrap()).collect(),
            pages_seen: bodies.len(),
            truncated: false,
            victim_bodies: bodies.iter().map(|(u, b)| (u.to_string(), b.as_bytes().to_vec())).collect(),
        }
    }

    #[test]
    fn marker_filter() {
        let m = MarkerSet::new(vec![Marker { label: "email".into(), value: "zq81XkP0vLw3@mail.test".into() }]).unwrap();
        let s = surface(&[("http://a.test/me", "hi zq81XkP0vLw3@mail.test"), ("http://a.test/about", "about")]);
        let f = filter_marked_pages(s, &m);
        assert_eq!(f.pages.len(), 1);
        assert_eq!(f.pages[0].raw_path, "/me");
        assert_eq!(f.victim_bodies.len(), 1);
        let none = filter_marked_pages(surface(&[("http://a.test/x", "nothing")]), &m);
        assert!(none.is_empty());
    }

    #[test]
    fn html_content_types() {
        assert!(is_html(Some("text/html; charset=utf-8")));
        assert!(is_html(None));
        assert!(!is_html(Some("image/png")));
        assert!(is_static(&parse_url("http://a.test/x/logo.PNG").unwrap()));
        assert!(!is_static(&parse_url("http://a.test/account.php").unwrap()));
    }
}
