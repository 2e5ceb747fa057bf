//! Scan the built-in lab catalog and compare every verdict with the oracle.
//!
//!     cargo run --release --example selfcheck [-- in-process]

use wcd::lab::catalog;
use wcd::pipeline::{render_selfcheck, selfcheck, LabMode, SelfcheckOptions};

fn main() {
    let mut opts = SelfcheckOptions::default();
    if std::env::args().nth(1).as_deref() == Some("in-process") {
        opts.mode = LabMode::InProcess;
    }
    let report = selfcheck(catalog(), &opts).expect("lab starts");
    print!("{}", render_selfcheck(&report));
    std::process::exit(if report.is_clean() { 0 } else { 1 });
}
