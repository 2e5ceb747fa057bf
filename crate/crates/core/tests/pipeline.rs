use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use wcd::client::{HttpEngine, Identity, RateLimiter, UreqTransport};
use wcd::config::{ScanConfig, ScanMode};
use wcd::crawler::{crawl_domain, fill_victim_bodies, filter_marked_pages, ingest_domains, load_journal, CrawlOptions};
use wcd::detector::{extract_markers, DetectorConfig};
use wcd::lab::{catalog, demo_site, sitemap_site, Lab, LabDelay, LabServer, LabTransport, SimSite};
use wcd::pipeline::{lab_targets, scan, selfcheck, LabMode, ScanOptions, SelfcheckOptions};
use wcd::urls::{group_key, parse_url, PathConfusionTechnique as T};

fn in_process(sites: Vec<SimSite>) -> (Arc<Lab>, HttpEngine) {
    let lab = Arc::new(Lab::new(sites));
    let engine = HttpEngine::new(Arc::new(LabTransport::new(lab.clone())), Arc::new(RateLimiter::unlimited()));
    (lab, engine)
}

fn logged_in_victim(lab: &Lab, engine: &HttpEngine) -> Identity {
    let target = lab_targets(lab, |h| format!("http://{h}")).remove(0);
    let mut victim = Identity::victim(target.victim);
    engine.login(&mut victim).expect("lab login");
    victim
}

fn start(lab: &Lab) -> wcd::urls::ParsedUrl {
    parse_url(&format!("http://{}/", lab.hosts()[0])).unwrap()
}

#[test]
fn logged_in_crawl_skips_logout_and_finds_protected_pages() {
    let (lab, engine) = in_process(vec![demo_site()]);
    let mut victim = logged_in_victim(&lab, &engine);
    let surface = crawl_domain(&engine, &mut victim, &start(&lab), &CrawlOptions::new(500, 1));
    let paths: BTreeSet<String> = surface.pages.iter().map(|p| p.raw_path.clone()).collect();
    assert!(paths.contains("/account.php") && paths.contains("/settings"), "{paths:?}");
    assert_eq!(paths.iter().filter(|p| p.starts_with("/item/")).count(), 1);
    assert!(lab.log().iter().all(|r| !r.target.contains("logout")), "logout was requested");
    // The session survived the crawl.
    let x = engine.fetch(&mut victim, &format!("http://{}/account.php", lab.hosts()[0])).unwrap();
    assert_eq!(x.status, 200);
}

#[test]
fn marker_filter_keeps_personal_pages() {
    let site = demo_site();
    let markers = wcd::detector::MarkerSet::new(site.victim().markers.clone()).unwrap();
    let (lab, engine) = in_process(vec![site]);
    let mut victim = logged_in_victim(&lab, &engine);
    let mut surface = crawl_domain(&engine, &mut victim, &start(&lab), &CrawlOptions::new(500, 1));
    fill_victim_bodies(&engine, &mut victim, &mut surface);
    let all = surface.pages.len();
    let marked = filter_marked_pages(surface, &markers);
    assert!(!marked.pages.is_empty() && marked.pages.len() < all);
    assert!(marked.pages.iter().any(|p| p.raw_path == "/account.php"));
    for p in &marked.pages {
        let body = &marked.victim_bodies[&p.to_string()];
        assert!(!extract_markers(body, &markers).is_empty(), "{p} has no marker");
    }
}

#[test]
fn crawl_budget_bounds_groups() {
    let (lab, engine) = in_process(vec![sitemap_site()]);
    for budget in [1, 3] {
        let s = crawl_domain(&engine, &mut Identity::victim(None), &start(&lab), &CrawlOptions::new(budget, 9));
        assert_eq!(s.pages.len(), budget);
        assert!(s.truncated);
        assert!(s.pages.iter().all(|p| wcd::urls::same_site(&p.host, "www.sitemap.test")));
    }
}

#[test]
fn numbered_pages_collapse_to_one_group() {
    let (lab, engine) = in_process(vec![sitemap_site()]);
    let s = crawl_domain(&engine, &mut Identity::victim(None), &start(&lab), &CrawlOptions::new(500, 3));
    let items: Vec<_> = s.pages.iter().filter(|p| p.raw_path.starts_with("/item/")).collect();
    assert_eq!(items.len(), 1);
    let keys: BTreeSet<_> = s.pages.iter().map(group_key).collect();
    assert_eq!(keys.len(), s.pages.len());
    assert!(s.pages_seen > 1000, "{} pages seen", s.pages_seen);
}

#[test]
fn ingestion_drops_dead_hosts() {
    let lab = Arc::new(Lab::new(catalog().into_iter().take(3).collect()));
    let server = LabServer::start(lab.clone(), SocketAddr::from(([127, 0, 0, 1], 0))).unwrap();
    let port = server.addr().port();
    let dead = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dead_port = dead.local_addr().unwrap().port();
    drop(dead);

    let dir = tempfile::tempdir().unwrap();
    let hosts = lab.hosts();
    let dead_host = hosts[2].replacen("www.", "api.", 1);
    let seeds = format!(
        "http://{}:{port}\nhttp://{}:{port}\nhttp://{dead_host}:{dead_port}\nhttp://{}:{port}\n",
        hosts[0], hosts[1], hosts[2]
    );
    let path = dir.path().join("seeds.txt");
    std::fs::write(&path, seeds).unwrap();
    let mut overrides = server.overrides(&lab);
    overrides.insert_spec(&format!("{dead_host}=127.0.0.1:{dead_port}")).unwrap();
    let engine = HttpEngine::new(
        Arc::new(UreqTransport::direct(overrides, Duration::from_secs(2))),
        Arc::new(RateLimiter::unlimited()),
    );
    let pool = ingest_domains(&path, &engine, 4).unwrap();
    assert_eq!(pool.sites.len(), 3);
    // The third site's first listed host is dead; its live sibling is
    // promoted.
    assert_eq!(pool.sites[2].primary, format!("http://{}:{port}", hosts[2]));
    assert!(pool.sites[2].subdomains.is_empty());
}

#[test]
fn marker_gated_scan_tests_only_marked_pages() {
    let (lab, engine) = in_process(vec![demo_site()]);
    let targets = lab_targets(&lab, |h| format!("http://{h}"));
    let config = ScanConfig {
        mode: ScanMode::MarkerGated,
        techniques: vec![T::PathParameter],
        rate: 0.0,
        ..ScanConfig::default()
    };
    let detector = DetectorConfig { delay: Arc::new(LabDelay::new(lab.clone())), ..DetectorConfig::default() };
    let seen = Mutex::new(Vec::new());
    let summary = scan(&engine, &targets, &config, &detector, &ScanOptions::default(), &|v| {
        seen.lock().unwrap().push(v.clone())
    });
    let verdicts = seen.into_inner().unwrap();
    assert_eq!(summary.tests, verdicts.len());
    assert!(verdicts.iter().any(|v| v.page.ends_with("/account.php") && v.vulnerable));
    assert!(verdicts.iter().all(|v| !v.page.ends_with("/about")));
    // Every test used its own payload name.
    let urls: BTreeSet<_> = verdicts.iter().map(|v| &v.attack_url).collect();
    assert_eq!(urls.len(), verdicts.len());
}

#[test]
fn journal_resumes_crawls() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("crawl.jsonl");
    let (lab, engine) = in_process(vec![demo_site()]);
    let targets = lab_targets(&lab, |h| format!("http://{h}"));
    let config = ScanConfig { techniques: vec![T::EncodedPound], rate: 0.0, ..ScanConfig::default() };
    let detector = DetectorConfig { delay: Arc::new(LabDelay::new(lab.clone())), ..DetectorConfig::default() };
    let options =
        ScanOptions { journal: Some(Arc::new(wcd::crawler::CrawlJournal::open(&path).unwrap())), ..Default::default() };
    scan(&engine, &targets, &config, &detector, &options, &|_| {});
    let surfaces = load_journal(&path).unwrap();
    assert_eq!(surfaces.len(), 1);

    lab.clear_log();
    let options = ScanOptions { resume_surfaces: surfaces, ..Default::default() };
    scan(&engine, &targets, &config, &detector, &options, &|_| {});
    // No crawl: only login and test traffic, never the home page.
    assert!(lab.log().iter().all(|r| r.target != "/"), "home page fetched again");
}

#[test]
fn verdicts_never_contradict_the_oracle() {
    let sites: Vec<SimSite> = catalog().into_iter().step_by(9).collect();
    let r = selfcheck(sites, &SelfcheckOptions { mode: LabMode::InProcess, ..Default::default() }).unwrap();
    for c in &r.comparisons {
        if !c.oracle {
            assert_ne!(c.scanner, Some(true), "{} {} vulnerable but oracle says no", c.site, c.technique);
        }
    }
    assert!(r.is_clean());
}
