//! Parse crawled URLs, group them by structure and build the five
//! path-confusion payloads for each representative.
//!
//!     cargo run --example attack_urls

use wcd::urls::{group_key, make_attack_url, parse_url, select_representatives, NonceGenerator, PathConfusionTechnique};

fn main() {
    let crawled = [
        "https://www.shop.example/account.php",
        "https://www.shop.example/item/28",
        "https://www.shop.example/item/29",
        "https://www.shop.example/item/30?ref=home",
        "https://www.shop.example/search?q=shoes&page=2",
        "https://www.shop.example/search?page=3&q=socks",
    ];
    let urls: Vec<_> = crawled.iter().map(|u| parse_url(u).expect("valid url")).collect();
    for u in &urls {
        let k = group_key(u);
        println!("{:<50} -> {}{} {:?}", u.to_string(), k.host, k.abstract_path, k.param_names);
    }

    let reps = select_representatives(&urls, 7);
    println!("\n{} representatives", reps.len());
    let mut names = NonceGenerator::new(7);
    for page in &reps {
        println!("\n{page}");
        for t in PathConfusionTechnique::ALL {
            let a = make_attack_url(page, t, &names.next_name(), "css");
            println!("  {:<18} {}", t.as_str(), a.rendered);
        }
    }
}
