//! The WCD test itself and the evidence extractors it relies on.
//!
//! Leakage is proven by exact marker matches in the attacker's response.
//! When the victim and attacker bodies are identical, the attacker body is
//! also searched for secret-looking values (CSRF tokens, session state,
//! random identifiers) that the victim session would have embedded.

mod compare;
mod markers;
mod randomness;
mod secrets;
mod verdict;

pub use compare::{bodies_identical, normalize_body, responses_identical};
pub use markers::{extract_markers, Marker, MarkerError, MarkerSet, MIN_MARKER_ENTROPY, MIN_MARKER_LENGTH};
pub use randomness::{
    randomness_score, shannon_entropy, Dictionary, RandomnessConfig, DEFAULT_ENTROPY_THRESHOLD, DEFAULT_KEYWORDS,
    DEFAULT_MIN_RESIDUAL, MIN_WORD_LENGTH,
};
pub(crate) use secrets::anchor_hrefs;
pub use secrets::{extract_secrets, SecretCandidate, SecretSource, SecretTrigger};
pub use verdict::{classify, run_wcd_test, AttackerDelay, DetectorConfig, LeakKind, ScanVerdict, SleepDelay};
