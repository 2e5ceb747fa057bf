use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::detector::{LeakKind, ScanVerdict};
use crate::urls::{registrable_domain, PathConfusionTechnique};

/// Maps a domain to the site it belongs to.
#[derive(Debug, Clone, Default)]
pub struct SiteMap {
    explicit: HashMap<String, String>,
    /// Fall back to the registrable domain for hosts not listed explicitly.
    pub public_suffix_fallback: bool,
}

impl SiteMap {
    /// Every domain maps to its registrable domain.
    pub fn registrable() -> Self {
        SiteMap { explicit: HashMap::new(), public_suffix_fallback: true }
    }

    /// Only the listed domains are known.
    pub fn explicit() -> Self {
        SiteMap::default()
    }

    pub fn insert(&mut self, domain: &str, site: &str) {
        self.explicit.insert(domain.to_ascii_lowercase(), site.to_ascii_lowercase());
    }

    pub fn site_of(&self, domain: &str) -> Option<String> {
        let domain = domain.to_ascii_lowercase();
        self.explicit
            .get(&domain)
            .cloned()
            .or_else(|| self.public_suffix_fallback.then(|| registrable_domain(&domain)))
    }
}

/// Distinct pages, domains and sites in one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pages: usize,
    pub domains: usize,
    pub sites: usize,
}

#[derive(Debug, Clone, Default)]
struct Bucket {
    pages: BTreeSet<String>,
    domains: BTreeSet<String>,
    sites: BTreeSet<String>,
}

impl Bucket {
    fn add(&mut self, item: &Item) {
        self.pages.insert(item.page.clone());
        self.domains.insert(item.domain.clone());
        self.sites.insert(item.site.clone());
    }

    fn counts(&self) -> Counts {
        Counts { pages: self.pages.len(), domains: self.domains.len(), sites: self.sites.len() }
    }

    fn minus(&self, other: &Bucket) -> Counts {
        Counts {
            pages: self.pages.difference(&other.pages).count(),
            domains: self.domains.difference(&other.domains).count(),
            sites: self.sites.difference(&other.sites).count(),
        }
    }
}

struct Item {
    page: String,
    domain: String,
    site: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quarantined {
    pub page: String,
    pub domain: String,
    pub reason: String,
}

/// Vulnerable counts split by the victim response status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusSplit {
    pub ok: Counts,
    pub not_ok: Counts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniquenessCell {
    pub row: PathConfusionTechnique,
    pub col: PathConfusionTechnique,
    /// Items exploitable with `row` but not with `col`.
    pub counts: Counts,
}

/// Roll-up of a verdict stream. Apart from `tested` and `inconclusive`,
/// every breakdown counts vulnerable items only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub verdicts: usize,
    pub tested: Counts,
    pub inconclusive: Counts,
    pub vulnerable: Counts,
    pub unauth_exploitable: Counts,
    pub by_technique: BTreeMap<PathConfusionTechnique, StatusSplit>,
    pub by_technique_total: BTreeMap<PathConfusionTechnique, Counts>,
    pub by_status: BTreeMap<u16, Counts>,
    pub by_cache_header: BTreeMap<String, Counts>,
    pub by_cdn: BTreeMap<String, Counts>,
    pub by_leak: BTreeMap<LeakKind, Counts>,
    pub uniqueness: Vec<UniquenessCell>,
    pub vulnerable_sites: Vec<String>,
    pub quarantined: Vec<Quarantined>,
}

impl AggregateStats {
    pub fn uniqueness_cell(&self, row: PathConfusionTechnique, col: PathConfusionTechnique) -> Counts {
        self.uniqueness.iter().find(|c| c.row == row && c.col == col).map(|c| c.counts).unwrap_or_default()
    }
}

pub const NO_CACHE_HEADERS: &str = "(none)";
pub const UNLABELED_CDN: &str = "(unlabeled)";

/// Fold verdicts into pages/domains/sites counts. Verdicts whose domain the
/// site map cannot resolve are quarantined and excluded from every count.
pub fn aggregate(verdicts: &[ScanVerdict], site_map: &SiteMap) -> AggregateStats {
    let mut stats = AggregateStats { verdicts: verdicts.len(), ..Default::default() };
    let mut tested = Bucket::default();
    let mut inconclusive = Bucket::default();
    let mut vulnerable = Bucket::default();
    let mut unauth = Bucket::default();
    let mut by_tech: BTreeMap<PathConfusionTechnique, (Bucket, Bucket)> = BTreeMap::new();
    let mut by_status: BTreeMap<u16, Bucket> = BTreeMap::new();
    let mut by_header: BTreeMap<String, Bucket> = BTreeMap::new();
    let mut by_cdn: BTreeMap<String, Bucket> = BTreeMap::new();
    let mut by_leak: BTreeMap<LeakKind, Bucket> = BTreeMap::new();

    let mut quarantined = Vec::new();
    for v in verdicts {
        let Some(site) = site_map.site_of(&v.domain) else {
            quarantined.push(Quarantined {
                page: v.page.clone(),
                domain: v.domain.clone(),
                reason: "domain not in site map".into(),
            });
            continue;
        };
        let item = Item { page: v.page.clone(), domain: v.domain.to_ascii_lowercase(), site };
        if v.is_inconclusive() {
            inconclusive.add(&item);
            continue;
        }
        tested.add(&item);
        if !v.vulnerable {
            continue;
        }
        vulnerable.add(&item);
        if v.unauth_exploitable {
            unauth.add(&item);
        }
        let (ok, not_ok) = by_tech.entry(v.technique).or_default();
        if v.victim_status == 200 { ok.add(&item) } else { not_ok.add(&item) }
        by_status.entry(v.victim_status).or_default().add(&item);
        if v.cache_headers.is_empty() {
            by_header.entry(NO_CACHE_HEADERS.to_string()).or_default().add(&item);
        }
        for h in &v.cache_headers {
            by_header.entry(h.clone()).or_default().add(&item);
        }
        if v.cdn_labels.is_empty() {
            by_cdn.entry(UNLABELED_CDN.to_string()).or_default().add(&item);
        }
        for l in &v.cdn_labels {
            by_cdn.entry(l.clone()).or_default().add(&item);
        }
        if let Some(kind) = v.leak_kind() {
            by_leak.entry(kind).or_default().add(&item);
        }
    }
    quarantined.sort_by(|a: &Quarantined, b| (&a.domain, &a.page).cmp(&(&b.domain, &b.page)));
    quarantined.dedup();

    let mut per_tech: BTreeMap<PathConfusionTechnique, Bucket> = BTreeMap::new();
    for (t, (ok, not_ok)) in &by_tech {
        let mut all = Bucket::default();
        for b in [ok, not_ok] {
            all.pages.extend(b.pages.iter().cloned());
            all.domains.extend(b.domains.iter().cloned());
            all.sites.extend(b.sites.iter().cloned());
        }
        per_tech.insert(*t, all);
        stats.by_technique.insert(*t, StatusSplit { ok: ok.counts(), not_ok: not_ok.counts() });
    }
    let empty = Bucket::default();
    for row in PathConfusionTechnique::ALL {
        for col in PathConfusionTechnique::ALL {
            let counts = if row == col {
                Counts::default()
            } else {
                per_tech.get(&row).unwrap_or(&empty).minus(per_tech.get(&col).unwrap_or(&empty))
            };
            stats.uniqueness.push(UniquenessCell { row, col, counts });
        }
    }
    stats.by_technique_total = per_tech.iter().map(|(t, b)| (*t, b.counts())).collect();
    stats.tested = tested.counts();
    stats.inconclusive = inconclusive.counts();
    stats.vulnerable = vulnerable.counts();
    stats.unauth_exploitable = unauth.counts();
    stats.by_status = by_status.iter().map(|(k, b)| (*k, b.counts())).collect();
    stats.by_cache_header = by_header.iter().map(|(k, b)| (k.clone(), b.counts())).collect();
    stats.by_cdn = by_cdn.iter().map(|(k, b)| (k.clone(), b.counts())).collect();
    stats.by_leak = by_leak.iter().map(|(k, b)| (*k, b.counts())).collect();
    stats.vulnerable_sites = vulnerable.sites.into_iter().collect();
    stats.quarantined = quarantined;
    stats
}
