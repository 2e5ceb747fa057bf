use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{scan, ScanOptions, ScanSummary, ScanTarget};
use crate::client::{HttpEngine, RateLimiter, Role, Transport, UreqTransport};
use crate::config::{resolve_login, ScanConfig};
use crate::detector::{DetectorConfig, ScanVerdict};
use crate::lab::{oracle_query, Lab, LabDelay, LabServer, LabTransport, OracleQuery, SimSite};
use crate::report::{aggregate, SiteMap};
use crate::urls::{parse_url, PathConfusionTechnique};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum LabMode {
    /// Serve the lab on a loopback socket and scan it over HTTP.
    #[default]
    Http,
    /// Hand requests straight to the lab.
    InProcess,
}

#[derive(Debug, Clone)]
pub struct SelfcheckOptions {
    pub mode: LabMode,
    /// Scanner settings. `delay_secs` is applied on the simulated clock.
    pub scan: ScanConfig,
}

impl Default for SelfcheckOptions {
    fn default() -> Self {
        SelfcheckOptions { mode: LabMode::Http, scan: ScanConfig { rate: 100.0, workers: 8, ..ScanConfig::default() } }
    }
}

/// Oracle and scanner verdict for one site and technique. `scanner` is
/// `None` when every test of the pair was inconclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Comparison {
    pub site: String,
    pub host: String,
    pub technique: PathConfusionTechnique,
    pub oracle: bool,
    pub scanner: Option<bool>,
}

impl Comparison {
    pub fn agrees(&self) -> bool {
        self.scanner == Some(self.oracle)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfcheckReport {
    pub comparisons: Vec<Comparison>,
    #[serde(skip)]
    pub verdicts: Vec<ScanVerdict>,
    pub summary: ScanSummary,
    pub elapsed: Duration,
    /// Sites the oracle says are exploitable, per technique.
    pub oracle_sites: BTreeMap<PathConfusionTechnique, usize>,
    /// Vulnerable sites per technique in the aggregated scanner output.
    pub scanner_sites: BTreeMap<PathConfusionTechnique, usize>,
}

impl SelfcheckReport {
    pub fn disagreements(&self) -> Vec<&Comparison> {
        self.comparisons.iter().filter(|c| !c.agrees()).collect()
    }

    pub fn is_clean(&self) -> bool {
        self.disagreements().is_empty() && self.oracle_sites == self.scanner_sites
    }
}

/// Scan targets for every lab site. `origin` maps a host to the origin the
/// scanner should use for it.
pub fn lab_targets(lab: &Lab, origin: impl Fn(&str) -> String) -> Vec<ScanTarget> {
    lab.sites()
        .iter()
        .map(|site| {
            let o = origin(&site.host);
            let login = |role| {
                let mut d = site.login_descriptor(role)?;
                for s in &mut d.steps {
                    s.url = site.auth.login_path.clone();
                }
                resolve_login(&mut d, &o).ok()?;
                Some(d)
            };
            ScanTarget {
                site: site.name.clone(),
                roots: vec![parse_url(&format!("{o}/")).expect("lab origins parse")],
                victim: login(Role::Victim),
                attacker: login(Role::Attacker),
                markers: site.victim_markers(),
                user_agent: None,
            }
        })
        .collect()
}

/// Oracle truth for every site and technique in `config`.
pub fn oracle_table(sites: &[Arc<SimSite>], config: &ScanConfig) -> Vec<(String, String, PathConfusionTechnique, bool)> {
    let mut out = Vec::new();
    for s in sites {
        for &t in &config.techniques {
            let q = OracleQuery::new(t)
                .extension(&config.extension)
                .delay(config.delay_secs)
                .embedded_param(config.embedded_param.clone());
            out.push((s.name.clone(), s.host.clone(), t, oracle_query(s, &q)));
        }
    }
    out
}

/// Maps a lab host to the origin the scanner should use.
pub type OriginFn = Box<dyn Fn(&str) -> String>;

/// Build an engine pointed at `lab`, served according to `mode`. The
/// returned server (if any) must outlive the engine's use.
pub fn lab_engine(lab: &Arc<Lab>, mode: LabMode, rate: f64) -> std::io::Result<(HttpEngine, Option<LabServer>, OriginFn)> {
    let (transport, server, origin): (Arc<dyn Transport>, Option<LabServer>, OriginFn) =
        match mode {
            LabMode::InProcess => {
                (Arc::new(LabTransport::new(lab.clone())), None, Box::new(|h: &str| format!("http://{h}")))
            }
            LabMode::Http => {
                let server = LabServer::start(lab.clone(), SocketAddr::from(([127, 0, 0, 1], 0)))?;
                let port = server.addr().port();
                let t = UreqTransport::direct(server.overrides(lab), Duration::from_secs(10));
                (Arc::new(t), Some(server), Box::new(move |h: &str| format!("http://{h}:{port}")))
            }
        };
    let mut engine = HttpEngine::new(transport, Arc::new(RateLimiter::new(rate)));
    engine.retry_backoff = Duration::from_millis(50);
    Ok((engine, server, origin))
}

/// Scan a lab holding `sites` and compare with the oracle.
pub fn selfcheck(sites: Vec<SimSite>, options: &SelfcheckOptions) -> std::io::Result<SelfcheckReport> {
    selfcheck_lab(Arc::new(Lab::new(sites)), options)
}

/// As [`selfcheck`], on an existing lab whose request log the caller may
/// inspect afterwards.
pub fn selfcheck_lab(lab: Arc<Lab>, options: &SelfcheckOptions) -> std::io::Result<SelfcheckReport> {
    let started = Instant::now();
    let config = &options.scan;
    let (engine, server, origin) = lab_engine(&lab, options.mode, config.rate)?;
    let targets = lab_targets(&lab, origin);
    let detector = DetectorConfig {
        randomness: config.randomness.clone(),
        extension: config.extension.clone(),
        embedded_param: config.embedded_param.clone(),
        delay_secs: config.delay_secs,
        delay: Arc::new(LabDelay::new(lab.clone())),
        ..DetectorConfig::default()
    };
    let verdicts = Mutex::new(Vec::new());
    let summary = scan(&engine, &targets, config, &detector, &ScanOptions::default(), &|v| {
        verdicts.lock().unwrap().push(v.clone())
    });
    drop(server);
    let verdicts = verdicts.into_inner().unwrap();

    let mut by_pair: BTreeMap<(String, PathConfusionTechnique), (bool, bool)> = BTreeMap::new();
    for v in &verdicts {
        let e = by_pair.entry((v.domain.clone(), v.technique)).or_insert((false, false));
        e.0 |= v.vulnerable;
        e.1 |= !v.is_inconclusive();
    }
    let sites = lab.sites();
    let truth = oracle_table(&sites, config);
    let comparisons: Vec<Comparison> = truth
        .into_iter()
        .map(|(site, host, technique, oracle)| {
            let scanner = match by_pair.get(&(host.clone(), technique)) {
                Some((true, _)) => Some(true),
                Some((false, true)) => Some(false),
                _ => None,
            };
            Comparison { site, host, technique, oracle, scanner }
        })
        .collect();

    let mut oracle_sites = BTreeMap::new();
    for c in &comparisons {
        *oracle_sites.entry(c.technique).or_insert(0) += usize::from(c.oracle);
    }
    let stats = aggregate(&verdicts, &SiteMap::registrable());
    let scanner_sites = config
        .techniques
        .iter()
        .map(|t| (*t, stats.by_technique_total.get(t).map_or(0, |c| c.sites)))
        .collect();

    Ok(SelfcheckReport { comparisons, verdicts, summary, elapsed: started.elapsed(), oracle_sites, scanner_sites })
}

pub fn render_selfcheck(r: &SelfcheckReport) -> String {
    let mut s = String::new();
    let sites: std::collections::BTreeSet<&str> = r.comparisons.iter().map(|c| c.site.as_str()).collect();
    let _ = writeln!(
        s,
        "selfcheck: {} sites, {} comparisons, {} tests, {:.1}s",
        sites.len(),
        r.comparisons.len(),
        r.summary.tests,
        r.elapsed.as_secs_f64()
    );
    let _ = writeln!(s, "{:<22}{:>8}{:>9}", "technique", "oracle", "scanner");
    for (t, n) in &r.oracle_sites {
        let _ = writeln!(s, "{:<22}{:>8}{:>9}", t.label(), n, r.scanner_sites.get(t).copied().unwrap_or(0));
    }
    let d = r.disagreements();
    if d.is_empty() {
        let _ = writeln!(s, "no disagreements");
    } else {
        let _ = writeln!(s, "{} disagreements:", d.len());
        for c in d {
            let scanner = match c.scanner {
                Some(true) => "vulnerable",
                Some(false) => "clean",
                None => "inconclusive",
            };
            let oracle = if c.oracle { "vulnerable" } else { "clean" };
            let _ = writeln!(s, "  {:<28} {:<18} oracle={oracle} scanner={scanner}", c.site, c.technique.as_str());
        }
    }
    for e in &r.summary.errors {
        let _ = writeln!(s, "error: {e}");
    }
    s
}
