//! Ask each built-in CDN profile whether it would store a response.
//!
//!     cargo run --example cache_policy

use wcd::policy::{builtin_profiles, decide, parse_cache_control};

fn main() {
    let cases = [
        ("/account.php", 200, ""),
        ("/account.php/x.css", 200, ""),
        ("/account.php/x.css", 200, "no-store"),
        ("/account.php/x.css", 200, "private, max-age=0"),
        ("/account.php", 200, "public, max-age=600"),
        ("/missing.css", 404, ""),
        ("/boom.css", 500, ""),
    ];
    for profile in builtin_profiles() {
        println!("{}", profile.name);
        for (path, status, header) in cases {
            let d = decide(&profile, path, status, &parse_cache_control(header));
            let verdict = if d.store { format!("store {}s", d.ttl) } else { "pass".to_string() };
            println!("  {path:<22} {status} {header:<22} {verdict:<12} {:?}", d.reason);
        }
    }
}
