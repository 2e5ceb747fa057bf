//! Serve a couple of simulated sites over HTTP and show a cache hit
//! leaking a victim page.
//!
//!     cargo run --example lab_server

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use wcd::client::{HttpEngine, Identity, RateLimiter, UreqTransport};
use wcd::lab::{demo_site, sitemap_site, Lab, LabServer};
use wcd::pipeline::lab_targets;

fn main() {
    let lab = Arc::new(Lab::new(vec![demo_site(), sitemap_site()]));
    let server = LabServer::start(lab.clone(), SocketAddr::from(([127, 0, 0, 1], 0))).expect("bind");
    println!("lab listening on {}", server.addr());
    let port = server.addr().port();
    let transport = UreqTransport::direct(server.overrides(&lab), Duration::from_secs(5));
    let engine = HttpEngine::new(Arc::new(transport), Arc::new(RateLimiter::new(10.0)));

    let target = lab_targets(&lab, |h| format!("http://{h}:{port}")).into_iter().find(|t| t.site == "demo").unwrap();
    let mut victim = Identity::victim(target.victim);
    engine.login(&mut victim).expect("login");
    let url = format!("http://www.demo.test:{port}/account.php/logo.css");
    let v = engine.fetch(&mut victim, &url).unwrap();
    let mut nobody = Identity::unauthenticated_from(&victim);
    let a = engine.fetch(&mut nobody, &url).unwrap();
    println!("victim   {} {:?}", v.status, v.header("x-cache"));
    println!("nobody   {} {:?}", a.status, a.header("x-cache"));
    let leaked: Vec<_> = target.markers.values().filter(|m| a.body_text().contains(m)).collect();
    println!("leaked markers: {leaked:?}");
}
