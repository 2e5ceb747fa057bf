use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{AggregateStats, Counts};
use crate::detector::ScanVerdict;
use crate::urls::{registrable_domain, PathConfusionTechnique};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ReportFormat {
    #[default]
    Table,
    Records,
}

/// Replaces site and domain names with stable pseudonyms.
#[derive(Debug, Clone, Default)]
pub struct Redactor {
    names: BTreeMap<String, String>,
}

impl Redactor {
    /// Pseudonyms are numbered in sorted order of `sites`, so the mapping
    /// does not depend on verdict order.
    pub fn for_sites<I: IntoIterator<Item = S>, S: AsRef<str>>(sites: I) -> Self {
        let mut sorted: Vec<String> = sites.into_iter().map(|s| s.as_ref().to_ascii_lowercase()).collect();
        sorted.sort();
        sorted.dedup();
        let names = sorted.into_iter().enumerate().map(|(i, s)| (s, format!("site-{}", i + 1))).collect();
        Redactor { names }
    }

    pub fn site(&self, site: &str) -> String {
        self.names.get(&site.to_ascii_lowercase()).cloned().unwrap_or_else(|| "site-?".to_string())
    }

    /// `www.shop.test` becomes `www.site-3.redacted`.
    pub fn host(&self, host: &str) -> String {
        let site = registrable_domain(host);
        let prefix = host.len().checked_sub(site.len()).map_or("", |n| &host[..n]);
        format!("{prefix}{}.redacted", self.site(&site))
    }

    pub fn verdict(&self, v: &ScanVerdict) -> ScanVerdict {
        let host = v.domain.to_ascii_lowercase();
        let masked = self.host(&host);
        let swap = |s: &str| s.replace(&host, &masked);
        ScanVerdict {
            page: swap(&v.page),
            domain: masked.clone(),
            attack_url: swap(&v.attack_url),
            ..v.clone()
        }
    }
}

fn cell(c: Counts) -> String {
    format!("{}/{}/{}", c.pages, c.domains, c.sites)
}

fn section(out: &mut String, title: &str, rows: &[(String, Counts)]) {
    if rows.is_empty() {
        return;
    }
    let _ = writeln!(out, "\n{title}");
    let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0).max(8);
    let _ = writeln!(out, "  {:<w$}  {:>7}  {:>7}  {:>5}", "", "Pages", "Domains", "Sites");
    for (k, c) in rows {
        let _ = writeln!(out, "  {k:<w$}  {:>7}  {:>7}  {:>5}", c.pages, c.domains, c.sites);
    }
}

/// Human-readable report. Counts are pages/domains/sites.
pub fn render_table(stats: &AggregateStats, redact: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Verdicts: {}", stats.verdicts);
    section(
        &mut out,
        "Summary",
        &[
            ("Tested".to_string(), stats.tested),
            ("Inconclusive".to_string(), stats.inconclusive),
            ("Vulnerable".to_string(), stats.vulnerable),
            ("Unauthenticated".to_string(), stats.unauth_exploitable),
        ],
    );

    let _ = writeln!(out, "\nVulnerable targets per path confusion technique");
    let _ = writeln!(
        out,
        "  {:<16}  {:>6} {:>6}  {:>6} {:>6}  {:>6} {:>6}",
        "Technique", "P:200", "P:!200", "D:200", "D:!200", "S:200", "S:!200"
    );
    for t in PathConfusionTechnique::ALL {
        let s = stats.by_technique.get(&t).copied().unwrap_or_default();
        let _ = writeln!(
            out,
            "  {:<16}  {:>6} {:>6}  {:>6} {:>6}  {:>6} {:>6}",
            t.label(),
            s.ok.pages,
            s.not_ok.pages,
            s.ok.domains,
            s.not_ok.domains,
            s.ok.sites,
            s.not_ok.sites
        );
    }

    let _ = writeln!(out, "\nExploitable by row technique but not by column (pages/domains/sites)");
    let _ = write!(out, "  {:<16}", "");
    for col in PathConfusionTechnique::ALL {
        let _ = write!(out, "  {:>16}", col.label());
    }
    let _ = writeln!(out);
    for row in PathConfusionTechnique::ALL {
        let _ = write!(out, "  {:<16}", row.label());
        for col in PathConfusionTechnique::ALL {
            let text = if row == col { "-".to_string() } else { cell(stats.uniqueness_cell(row, col)) };
            let _ = write!(out, "  {text:>16}");
        }
        let _ = writeln!(out);
    }

    let rows = |m: Vec<(String, Counts)>| m;
    section(&mut out, "Response codes", &rows(stats.by_status.iter().map(|(k, c)| (k.to_string(), *c)).collect()));
    section(&mut out, "Cache headers", &rows(stats.by_cache_header.iter().map(|(k, c)| (k.clone(), *c)).collect()));
    section(&mut out, "CDN", &rows(stats.by_cdn.iter().map(|(k, c)| (k.clone(), *c)).collect()));
    section(&mut out, "Leak type", &rows(stats.by_leak.iter().map(|(k, c)| (format!("{k:?}"), *c)).collect()));

    if !stats.vulnerable_sites.is_empty() {
        let _ = writeln!(out, "\nVulnerable sites");
        let redactor = Redactor::for_sites(&stats.vulnerable_sites);
        for s in &stats.vulnerable_sites {
            let _ = writeln!(out, "  {}", if redact { redactor.site(s) } else { s.clone() });
        }
    }
    if !stats.quarantined.is_empty() {
        let _ = writeln!(out, "\nQuarantined verdicts (unmapped domain): {}", stats.quarantined.len());
    }
    out
}

#[derive(Serialize)]
struct Record<'a> {
    dimension: &'a str,
    key: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    col: Option<String>,
    pages: usize,
    domains: usize,
    sites: usize,
}

/// One JSON object per line and per table cell.
pub fn render_records(stats: &AggregateStats, redact: bool) -> String {
    let mut lines = Vec::new();
    let mut push = |dimension: &str, key: String, col: Option<String>, c: Counts| {
        let r = Record { dimension, key, col, pages: c.pages, domains: c.domains, sites: c.sites };
        lines.push(serde_json::to_string(&r).expect("plain record"));
    };
    push("summary", "tested".into(), None, stats.tested);
    push("summary", "inconclusive".into(), None, stats.inconclusive);
    push("summary", "vulnerable".into(), None, stats.vulnerable);
    push("summary", "unauth_exploitable".into(), None, stats.unauth_exploitable);
    for t in PathConfusionTechnique::ALL {
        let s = stats.by_technique.get(&t).copied().unwrap_or_default();
        push("technique", t.to_string(), Some("200".into()), s.ok);
        push("technique", t.to_string(), Some("!200".into()), s.not_ok);
    }
    for c in &stats.uniqueness {
        if c.row != c.col {
            push("uniqueness", c.row.to_string(), Some(c.col.to_string()), c.counts);
        }
    }
    for (k, c) in &stats.by_status {
        push("status", k.to_string(), None, *c);
    }
    for (k, c) in &stats.by_cache_header {
        push("cache_header", k.clone(), None, *c);
    }
    for (k, c) in &stats.by_cdn {
        push("cdn", k.clone(), None, *c);
    }
    for (k, c) in &stats.by_leak {
        push("leak", serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(), None, *c);
    }
    let redactor = Redactor::for_sites(&stats.vulnerable_sites);
    for s in &stats.vulnerable_sites {
        let name = if redact { redactor.site(s) } else { s.clone() };
        push("vulnerable_site", name, None, Counts { pages: 0, domains: 0, sites: 1 });
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

pub fn render(stats: &AggregateStats, format: ReportFormat, redact: bool) -> String {
    match format {
        ReportFormat::Table => render_table(stats, redact),
        ReportFormat::Records => render_records(stats, redact),
    }
}
