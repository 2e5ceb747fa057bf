//! Print the built-in evaluation catalog as a scenario file, with the
//! ground-truth row for each site as a comment.
//!
//!     cargo run --example scenario_catalog > scenarios/catalog.toml

use wcd::lab::{catalog_scenario, oracle_row, OracleQuery};
use wcd::urls::PathConfusionTechnique;

fn main() {
    let scenario = catalog_scenario();
    let sites = scenario.build().expect("catalog builds");
    println!("# Built-in lab catalog. Regenerate with `cargo run --example scenario_catalog`.");
    println!("#");
    println!("# Ground truth per site (pp nl sc pd qm):");
    let base = OracleQuery::new(PathConfusionTechnique::PathParameter);
    for site in &sites {
        let row: String = oracle_row(site, &base).iter().map(|(_, v)| if *v { " x " } else { " . " }).collect();
        println!("#   {:<28}{row}", site.name);
    }
    println!();
    print!("{}", scenario.to_toml());
}
