//! Reporting: roll-ups over verdict streams, CDN labelling from response
//! headers, the 2x2 χ² incidence test, and table / record rendering.
//!
//! A "site" is the registrable domain of a host under the public suffix
//! list, unless the caller supplies an explicit [`SiteMap`].

mod aggregate;
mod fingerprint;
mod render;
mod stats;

pub use aggregate::{
    aggregate, AggregateStats, Counts, Quarantined, SiteMap, StatusSplit, UniquenessCell, NO_CACHE_HEADERS,
    UNLABELED_CDN,
};
pub use fingerprint::{
    cdn_label, default_fingerprints, label_headers, load_fingerprints, parse_fingerprints, CdnFingerprint,
    FingerprintError, HeaderPattern, OTHER_VENDOR,
};
pub use render::{render, render_records, render_table, Redactor, ReportFormat};
pub use stats::{chi_square_2x2, chi_square_sf_df1, erfc, StatsError};

use std::io::{BufRead, Write};

use crate::detector::ScanVerdict;

/// Read a line-delimited verdict stream. Blank lines are skipped.
pub fn read_verdicts<R: BufRead>(reader: R) -> Result<Vec<ScanVerdict>, String> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

pub fn write_verdict<W: Write>(mut w: W, verdict: &ScanVerdict) -> std::io::Result<()> {
    serde_json::to_writer(&mut w, verdict)?;
    w.write_all(b"\n")
}
