//! End-to-end runs: crawl and test a seed pool, or check the scanner
//! against the lab oracle.

mod scan;
mod selfcheck;

pub use scan::{scan, scan_site, targets_from_pool, ScanOptions, ScanSummary, ScanTarget};
pub use selfcheck::{
    lab_engine, lab_targets, OriginFn, oracle_table, render_selfcheck, selfcheck, selfcheck_lab, Comparison, LabMode,
    SelfcheckOptions, SelfcheckReport,
};
