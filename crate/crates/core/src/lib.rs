//! Web cache deception (WCD) scanning toolkit.
//!
//! The crate is organised around the three stages of a WCD measurement and a
//! simulator used to check every verdict against ground truth:
//!
//! - [`urls`]: URL parsing, structural grouping and path-confusion payloads.
//! - [`policy`]: `Cache-Control` parsing and CDN cacheability rules.
//! - [`client`]: victim / attacker / unauthenticated HTTP identities, cookie
//!   jars, session upkeep and per-host pacing.
//! - [`crawler`]: seed ingestion and attack-surface discovery.
//! - [`detector`]: the four-step WCD test, marker and secret extraction.
//! - [`lab`]: a deterministic origin + caching proxy simulator and oracle.
//! - [`report`]: aggregation, CDN labelling and the χ² incidence test.
//! - [`pipeline`]: end-to-end scan orchestration and the lab self-check.
//!
//! The `wcd` binary is a thin wrapper over [`cli::run`]. Runnable examples for
//! each capability live under `examples/`.

pub mod cli;
pub mod client;
pub mod config;
pub mod crawler;
pub mod detector;
pub mod lab;
pub mod pipeline;
pub mod policy;
pub mod report;
pub mod urls;
