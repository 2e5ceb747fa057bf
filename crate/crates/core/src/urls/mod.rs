//! URL handling for the scanner: structural parsing that keeps the raw path
//! byte-exact, structural grouping of crawled pages, and construction of
//! path-confusion attack URLs.

mod attack;
mod group;
mod parse;
mod site;

pub use attack::{make_attack_url, AttackUrl, NonceGenerator, PathConfusionTechnique, DEFAULT_EXTENSION};
pub use group::{group_key, select_representatives, UrlGroupKey, NUMERIC_PLACEHOLDER};
pub use parse::{parse_url, percent_decode, resolve_reference, ParsedUrl, UrlError};
pub use site::{registrable_domain, same_site};
