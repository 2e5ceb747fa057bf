//! Aggregate a verdict stream, label CDNs from headers and run the 2x2
//! incidence test.
//!
//!     cargo run --example report [-- verdicts.jsonl]

use std::io::BufReader;

use wcd::report::{aggregate, chi_square_2x2, default_fingerprints, label_headers, read_verdicts, render_table, SiteMap};

fn main() {
    if let Some(path) = std::env::args().nth(1) {
        let f = std::fs::File::open(&path).expect("readable verdict file");
        let verdicts = read_verdicts(BufReader::new(f)).expect("valid verdicts");
        print!("{}", render_table(&aggregate(&verdicts, &SiteMap::registrable()), false));
    }

    let fp = default_fingerprints();
    for headers in [
        vec![("Server", "AkamaiGHost")],
        vec![("CF-Cache-Status", "HIT"), ("Server", "cloudflare")],
        vec![("X-Amz-Cf-Id", "abc"), ("Via", "1.1 x.cloudfront.net (CloudFront)")],
        vec![("X-Served-By", "cache-fra1234-FRA"), ("X-Cache", "MISS")],
        vec![("Server", "nginx")],
    ] {
        let h: Vec<(String, String)> = headers.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        println!("{:<70} {:?}", format!("{headers:?}"), label_headers(&h, &fp));
    }

    // Vulnerable vs not, for sites with and without a given property.
    let (stat, p) = chi_square_2x2(20, 275, 5, 40).unwrap();
    println!("\nchi2 = {stat:.2}, p = {p:.2}");
}
