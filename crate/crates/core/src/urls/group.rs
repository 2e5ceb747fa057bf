use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ParsedUrl;

/// Replaces every all-digit path segment in [`UrlGroupKey::abstract_path`].
pub const NUMERIC_PLACEHOLDER: &str = "{num}";

/// Structural identity of a page: host, path with numeric segments abstracted
/// away, and the sorted set of query parameter names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UrlGroupKey {
    pub host: String,
    pub abstract_path: String,
    pub param_names: Vec<String>,
}

fn is_numeric_segment(segment: &str) -> bool {
    !segment.is_empty() && segment.bytes().all(|b| b.is_ascii_digit())
}

pub fn group_key(url: &ParsedUrl) -> UrlGroupKey {
    let trimmed = url.raw_path.strip_prefix('/').unwrap_or(&url.raw_path);
    let mut abstract_path = String::with_capacity(url.raw_path.len() + 1);
    if !trimmed.is_empty() {
        for segment in trimmed.split('/') {
            abstract_path.push('/');
            abstract_path.push_str(if is_numeric_segment(segment) { NUMERIC_PLACEHOLDER } else { segment });
        }
    } else {
        abstract_path.push('/');
    }

    let mut param_names: Vec<String> = url.query_params.iter().map(|(k, _)| k.clone()).collect();
    param_names.sort();
    param_names.dedup();

    UrlGroupKey { host: url.host.clone(), abstract_path, param_names }
}

/// Pick one URL per group key. Groups are emitted in order of first
/// appearance and the member chosen within each group depends only on
/// `urls` and `seed`.
pub fn select_representatives(urls: &[ParsedUrl], seed: u64) -> Vec<ParsedUrl> {
    let mut order: Vec<UrlGroupKey> = Vec::new();
    let mut groups: HashMap<UrlGroupKey, Vec<&ParsedUrl>> = HashMap::new();
    for url in urls {
        let key = group_key(url);
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(url);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order
        .iter()
        .map(|key| {
            let members = &groups[key];
            members[rng.random_range(0..members.len())].clone()
        })
        .collect()
}
