//! Crawl the 1,200-page lab sitemap and print the representative pages.
//!
//!     cargo run --example crawl_sitemap [-- BUDGET [SEED]]

use std::sync::Arc;

use wcd::client::{HttpEngine, Identity, RateLimiter};
use wcd::crawler::{crawl_domain, CrawlOptions};
use wcd::lab::{sitemap_site, Lab, LabTransport};
use wcd::urls::parse_url;

fn main() {
    let mut args = std::env::args().skip(1);
    let budget = args.next().and_then(|a| a.parse().ok()).unwrap_or(500);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    let lab = Arc::new(Lab::new(vec![sitemap_site()]));
    let engine = HttpEngine::new(Arc::new(LabTransport::new(lab.clone())), Arc::new(RateLimiter::unlimited()));
    let start = parse_url(&format!("http://{}/", lab.hosts()[0])).unwrap();
    let surface = crawl_domain(&engine, &mut Identity::victim(None), &start, &CrawlOptions::new(budget, seed));
    println!(
        "{} pages fetched, {} representatives{}",
        surface.pages_seen,
        surface.pages.len(),
        if surface.truncated { " (budget reached)" } else { "" }
    );
    for p in &surface.pages {
        println!("  {p}");
    }
}
