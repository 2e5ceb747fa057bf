use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::client::{HttpEngine, Identity, LoginDescriptor, LogoutBlacklist};
use crate::config::{ConfigError, ScanConfig, ScanMode, SiteConfig};
use crate::crawler::{
    crawl_domain, fill_victim_bodies, filter_marked_pages, AttackSurface, CrawlJournal, CrawlOptions, CrawlRecord,
    SeedPool,
};
use crate::detector::{run_wcd_test, DetectorConfig, MarkerSet, ScanVerdict};
use crate::urls::{parse_url, NonceGenerator, ParsedUrl, PathConfusionTechnique};

/// Everything needed to scan one site.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanTarget {
    /// Site label used in logs and the journal.
    pub site: String,
    /// Host roots to crawl, primary first.
    pub roots: Vec<ParsedUrl>,
    pub victim: Option<LoginDescriptor>,
    pub attacker: Option<LoginDescriptor>,
    pub markers: MarkerSet,
    pub user_agent: Option<String>,
}

/// Load the site and marker files referenced by `pool`. Relative login
/// URLs resolve against each site's primary origin.
pub fn targets_from_pool(pool: &SeedPool) -> Result<Vec<ScanTarget>, ConfigError> {
    let mut out = Vec::new();
    for s in &pool.sites {
        let mut cfg = match &s.login {
            Some(p) => SiteConfig::load(p)?,
            None => SiteConfig::default(),
        };
        cfg.resolve_against(&s.primary)?;
        if let Some(p) = &s.markers {
            cfg.markers = crate::config::load_markers(p)?;
        }
        let roots = s
            .hosts()
            .map(|h| parse_url(&format!("{h}/")).map_err(|e| ConfigError::Invalid(format!("{h}: {e}"))))
            .collect::<Result<_, _>>()?;
        out.push(ScanTarget {
            site: s.site_name(),
            roots,
            victim: cfg.victim,
            attacker: cfg.attacker,
            markers: cfg.markers,
            user_agent: cfg.user_agent,
        });
    }
    Ok(out)
}

/// Extra state for a scan run.
#[derive(Default)]
pub struct ScanOptions {
    pub journal: Option<Arc<CrawlJournal>>,
    /// Surfaces from an earlier run, keyed by domain; these hosts are not
    /// crawled again.
    pub resume_surfaces: HashMap<String, AttackSurface>,
    /// `(page, technique)` pairs already tested.
    pub done: HashSet<(String, PathConfusionTechnique)>,
}

impl ScanOptions {
    pub fn skip_verdicts(mut self, verdicts: &[ScanVerdict]) -> Self {
        self.done.extend(verdicts.iter().filter(|v| !v.is_inconclusive()).map(|v| (v.page.clone(), v.technique)));
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ScanSummary {
    pub sites: usize,
    pub sites_skipped: usize,
    pub domains_crawled: usize,
    pub pages_tested: usize,
    pub tests: usize,
    pub vulnerable: usize,
    pub inconclusive: usize,
    pub errors: Vec<String>,
}

impl ScanSummary {
    fn merge(&mut self, o: ScanSummary) {
        self.sites += o.sites;
        self.sites_skipped += o.sites_skipped;
        self.domains_crawled += o.domains_crawled;
        self.pages_tested += o.pages_tested;
        self.tests += o.tests;
        self.vulnerable += o.vulnerable;
        self.inconclusive += o.inconclusive;
        self.errors.extend(o.errors);
    }
}

/// Crawl and test every target. Sites are spread over `config.workers`
/// threads; within a site all requests are sequential. Each verdict is
/// passed to `sink` as soon as it is produced.
pub fn scan(
    engine: &HttpEngine,
    targets: &[ScanTarget],
    config: &ScanConfig,
    detector: &DetectorConfig,
    options: &ScanOptions,
    sink: &(dyn Fn(&ScanVerdict) + Sync),
) -> ScanSummary {
    let next = AtomicUsize::new(0);
    let total = Mutex::new(ScanSummary::default());
    std::thread::scope(|s| {
        for _ in 0..config.workers.clamp(1, targets.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(t) = targets.get(i) else { break };
                let r = scan_site(engine, t, config, detector, options, sink);
                total.lock().unwrap().merge(r);
            });
        }
    });
    total.into_inner().unwrap()
}

fn identity(role: fn(Option<LoginDescriptor>) -> Identity, d: &Option<LoginDescriptor>, ua: Option<&str>) -> Identity {
    let id = role(d.clone());
    match ua {
        Some(ua) => id.with_user_agent(ua),
        None => id,
    }
}

/// Crawl and test one site.
pub fn scan_site(
    engine: &HttpEngine,
    target: &ScanTarget,
    config: &ScanConfig,
    detector: &DetectorConfig,
    options: &ScanOptions,
    sink: &(dyn Fn(&ScanVerdict) + Sync),
) -> ScanSummary {
    let mut summary = ScanSummary { sites: 1, ..Default::default() };
    let ua = target.user_agent.as_deref().or(config.user_agent.as_deref());
    let mut victim = identity(Identity::victim, &target.victim, ua);
    let mut attacker = identity(Identity::attacker, &target.attacker, ua);
    let skip = |summary: &mut ScanSummary, reason: String| {
        tracing::warn!(site = %target.site, %reason, "site skipped");
        if let Some(j) = &options.journal {
            let _ = j.record(&CrawlRecord::Skipped { domain: target.site.clone(), reason: reason.clone() });
        }
        summary.sites_skipped += 1;
        summary.errors.push(format!("{}: {reason}", target.site));
    };

    for (who, id) in [("victim", &mut victim), ("attacker", &mut attacker)] {
        if id.credentials.is_some() {
            if let Err(e) = engine.login(id) {
                skip(&mut summary, format!("{who} login failed: {e}"));
                return summary;
            }
        }
    }
    if config.mode == ScanMode::MarkerGated && target.markers.is_empty() {
        skip(&mut summary, "marker-gated mode but no markers configured".into());
        return summary;
    }

    let crawl_opts = CrawlOptions {
        budget: config.budget,
        seed: config.seed,
        blacklist: LogoutBlacklist::new(&config.logout_patterns),
    };
    let mut nonces = NonceGenerator::from_entropy();
    let mut tested_pages: HashSet<String> = HashSet::new();
    for root in &target.roots {
        let mut surface = match options.resume_surfaces.get(&root.host) {
            Some(s) => s.clone(),
            None => {
                let s = crawl_domain(engine, &mut victim, root, &crawl_opts);
                summary.domains_crawled += 1;
                if let Some(j) = &options.journal {
                    if let Err(e) = j.record(&CrawlRecord::Surface(s.clone())) {
                        tracing::warn!(error = %e, "cannot write crawl journal");
                    }
                }
                s
            }
        };
        tracing::info!(domain = %surface.domain, pages = surface.pages.len(), seen = surface.pages_seen, "crawled");
        if config.mode == ScanMode::MarkerGated {
            fill_victim_bodies(engine, &mut victim, &mut surface);
            surface = filter_marked_pages(surface, &target.markers);
        }

        for page in &surface.pages {
            let page_text = page.to_string();
            if !tested_pages.insert(page_text.clone()) {
                continue;
            }
            summary.pages_tested += 1;
            for &t in &config.techniques {
                if options.done.contains(&(page_text.clone(), t)) {
                    continue;
                }
                for id in [&mut victim, &mut attacker] {
                    if let Err(e) = engine.maintain_session(id) {
                        tracing::warn!(site = %target.site, error = %e, "session refresh failed");
                    }
                }
                let nonce = nonces.next_name();
                let v = run_wcd_test(engine, page, t, &mut victim, &mut attacker, &target.markers, &nonce, detector);
                summary.tests += 1;
                if v.vulnerable {
                    summary.vulnerable += 1;
                }
                if v.is_inconclusive() {
                    summary.inconclusive += 1;
                }
                sink(&v);
            }
        }
    }
    summary
}
