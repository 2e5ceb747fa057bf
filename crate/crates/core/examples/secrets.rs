//! Marker matching and secret extraction on a response body.
//!
//!     cargo run --example secrets

use wcd::detector::{extract_markers, extract_secrets, randomness_score, MarkerSet, RandomnessConfig};

const BODY: &str = r#"<html><body>
<p>Hello Name Q3xv9TmL2pWk</p>
<form><input type="hidden" name="csrf_token" value="c0ffee">
<input type="hidden" name="step" value="checkout"></form>
<a href="/orders?session=9f86d081884c7d65&amp;sort=date">Orders</a>
<script src="/static/7d6c5b4a3f2e1d0c.js"></script>
<script>var apiKey = "AKb1c93lPz7QwY0e"; var theme = "dark";</script>
</body></html>"#;

fn main() {
    let markers = MarkerSet::from_pairs(&[("name", "Name Q3xv9TmL2pWk"), ("email", "u8Rt2Lw0xQ@mail.test")]).unwrap();
    println!("markers found: {:?}", extract_markers(BODY.as_bytes(), &markers));

    let cfg = RandomnessConfig::default();
    for s in extract_secrets(BODY.as_bytes(), &cfg) {
        println!(
            "{:<14} {:<20} {:<18} {:?} residual={} entropy={:.2}",
            format!("{:?}", s.source),
            s.name,
            s.value,
            s.trigger,
            s.residual_length,
            s.entropy_bits_per_char
        );
    }
    for v in ["thecatsatonthemat", "passwordreset", "9f86d081884c7d65", "tokenx7qz"] {
        let (n, h) = randomness_score(v, &cfg);
        println!("{v:<20} residual {n:>2}  {h:.2} bits/char  random={}", cfg.passes(n, h));
    }
}
