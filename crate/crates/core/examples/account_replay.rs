//! Run web cache deception tests against the demo lab site: a
//! path-parameter origin behind an extension-list cache.
//!
//!     cargo run --example account_replay

use std::sync::Arc;

use wcd::client::{HttpEngine, Identity, RateLimiter};
use wcd::detector::{run_wcd_test, DetectorConfig, MarkerSet};
use wcd::lab::{demo_site, Lab, LabDelay, LabTransport};
use wcd::pipeline::lab_targets;
use wcd::urls::{parse_url, PathConfusionTechnique};

fn main() {
    let lab = Arc::new(Lab::new(vec![demo_site()]));
    let engine = HttpEngine::new(Arc::new(LabTransport::new(lab.clone())), Arc::new(RateLimiter::unlimited()));
    let target = lab_targets(&lab, |h| format!("http://{h}")).remove(0);
    let mut victim = Identity::victim(target.victim);
    let mut attacker = Identity::attacker(target.attacker);
    engine.login(&mut victim).expect("victim login");
    engine.login(&mut attacker).expect("attacker login");

    let markers: MarkerSet = target.markers;
    let config = DetectorConfig { delay: Arc::new(LabDelay::new(lab.clone())), ..DetectorConfig::default() };
    let page = parse_url(&format!("http://{}/account.php", lab.hosts()[0])).unwrap();
    for t in [PathConfusionTechnique::PathParameter, PathConfusionTechnique::EncodedNewline] {
        let v = run_wcd_test(&engine, &page, t, &mut victim, &mut attacker, &markers, "nonexistent", &config);
        println!("{}", serde_json::to_string_pretty(&v).unwrap());
    }
    println!("\nrequests seen by the lab:");
    for r in lab.log() {
        println!("  {:<5} {:<40} {:?}", r.method, r.target, r.event);
    }
}
