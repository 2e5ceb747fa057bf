//! Seed ingestion and attack-surface discovery.
//!
//! Only `<a href>` links are followed; forms are not submitted and scripts
//! are not run.

mod crawl;
mod journal;
mod seeds;

pub use crawl::{crawl_domain, fill_victim_bodies, filter_marked_pages, AttackSurface, CrawlOptions, RAW_CAP_FACTOR};
pub use journal::{load_journal, CrawlJournal, CrawlRecord};
pub use seeds::{ingest_domains, probe, SeedPool, SeedSite};
