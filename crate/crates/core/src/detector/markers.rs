use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::shannon_entropy;

pub const MIN_MARKER_LENGTH: usize = 12;
pub const MIN_MARKER_ENTROPY: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub label: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarkerError {
    #[error("marker `{label}` is shorter than {MIN_MARKER_LENGTH} characters")]
    TooShort { label: String },
    #[error("marker `{label}` has entropy {entropy:.2} bits/char, below {MIN_MARKER_ENTROPY}")]
    LowEntropy { label: String, entropy: f64 },
    #[error("marker `{label}` repeats the value of another marker")]
    Duplicate { label: String },
}

/// Values planted in the victim account so leaks can be proven by exact
/// match.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Marker>", into = "Vec<Marker>")]
pub struct MarkerSet {
    markers: Vec<Marker>,
}

impl MarkerSet {
    pub fn new(markers: Vec<Marker>) -> Result<Self, MarkerError> {
        let mut seen = HashSet::new();
        for m in &markers {
            if m.value.chars().count() < MIN_MARKER_LENGTH {
                return Err(MarkerError::TooShort { label: m.label.clone() });
            }
            let entropy = shannon_entropy(&m.value);
            if entropy < MIN_MARKER_ENTROPY {
                return Err(MarkerError::LowEntropy { label: m.label.clone(), entropy });
            }
            if !seen.insert(m.value.as_str()) {
                return Err(MarkerError::Duplicate { label: m.label.clone() });
            }
        }
        Ok(MarkerSet { markers })
    }

    pub fn from_pairs<L: AsRef<str>, V: AsRef<str>>(pairs: &[(L, V)]) -> Result<Self, MarkerError> {
        Self::new(
            pairs.iter().map(|(l, v)| Marker { label: l.as_ref().to_string(), value: v.as_ref().to_string() }).collect(),
        )
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Marker> {
        self.markers.iter()
    }

    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.markers.iter().map(|m| m.value.as_str())
    }
}

impl TryFrom<Vec<Marker>> for MarkerSet {
    type Error = MarkerError;
    fn try_from(v: Vec<Marker>) -> Result<Self, MarkerError> {
        MarkerSet::new(v)
    }
}

impl From<MarkerSet> for Vec<Marker> {
    fn from(s: MarkerSet) -> Self {
        s.markers
    }
}

pub(crate) fn contains_bytes(haystack: &[u8], needle: &[u8]) -> bool {
    needle.is_empty() || haystack.windows(needle.len()).any(|w| w == needle)
}

/// Labels of the markers whose value occurs verbatim in `body`.
pub fn extract_markers(body: &[u8], markers: &MarkerSet) -> Vec<String> {
    markers.iter().filter(|m| contains_bytes(body, m.value.as_bytes())).map(|m| m.label.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> MarkerSet {
        MarkerSet::from_pairs(&[("email", "q7Xv2Lp9Rk4Zt1Wm@mail.test"), ("name", "Hn3Kd8Vs0Pj5Ya2C")]).unwrap()
    }

    #[test]
    fn exact_hits() {
        let m = set();
        assert_eq!(extract_markers(b"<td>q7Xv2Lp9Rk4Zt1Wm@mail.test</td>", &m), vec!["email"]);
        assert!(extract_markers(b"", &m).is_empty());
        assert_eq!(extract_markers(b"Hn3Kd8Vs0Pj5Ya2C Hn3Kd8Vs0Pj5Ya2C", &m), vec!["name"]);
    }

    #[test]
    fn entity_encoded_marker_is_missed() {
        let m = set();
        assert!(extract_markers(b"q7Xv2Lp9Rk4Zt1Wm&#64;mail.test", &m).is_empty());
    }

    #[test]
    fn validation() {
        assert!(matches!(MarkerSet::from_pairs(&[("a", "short")]), Err(MarkerError::TooShort { .. })));
        assert!(matches!(MarkerSet::from_pairs(&[("a", "aaaaaaaaaaaaaaaa")]), Err(MarkerError::LowEntropy { .. })));
        assert!(matches!(
            MarkerSet::from_pairs(&[("a", "Hn3Kd8Vs0Pj5Ya2C"), ("b", "Hn3Kd8Vs0Pj5Ya2C")]),
            Err(MarkerError::Duplicate { .. })
        ));
    }
}
