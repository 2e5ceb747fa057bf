use std::collections::{HashMap, HashSet};
use std::sync::{Arc, OnceLock};

pub const MIN_WORD_LENGTH: usize = 3;
pub const DEFAULT_MIN_RESIDUAL: usize = 8;
pub const DEFAULT_ENTROPY_THRESHOLD: f64 = 3.0;
pub const DEFAULT_KEYWORDS: [&str; 5] = ["csrf", "xsrf", "token", "state", "client_id"];

const COMMON_WORDS: &str = include_str!("../../data/common_words.txt");

/// A word list used to strip natural-language parts from candidate values.
/// Words shorter than [`MIN_WORD_LENGTH`] are ignored.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    words: HashSet<String>,
    max_len: usize,
}

impl Dictionary {
    pub fn new<S: AsRef<str>, I: IntoIterator<Item = S>>(words: I) -> Self {
        let words: HashSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| w.chars().count() >= MIN_WORD_LENGTH)
            .collect();
        let max_len = words.iter().map(|w| w.chars().count()).max().unwrap_or(0);
        Dictionary { words, max_len }
    }

    /// The bundled list of 10,000 common English words.
    pub fn common_english() -> Arc<Dictionary> {
        static DICT: OnceLock<Arc<Dictionary>> = OnceLock::new();
        DICT.get_or_init(|| Arc::new(Dictionary::new(COMMON_WORDS.lines()))).clone()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    /// Remove dictionary words scanning left to right, taking the longest
    /// match at each position. Unmatched characters are kept as-is.
    pub fn strip(&self, value: &str) -> String {
        let chars: Vec<char> = value.chars().collect();
        let lower: Vec<String> = chars.iter().map(|c| c.to_lowercase().collect()).collect();
        let mut out = String::new();
        let mut i = 0;
        while i < chars.len() {
            let longest = (MIN_WORD_LENGTH..=self.max_len.min(chars.len() - i))
                .rev()
                .find(|&n| self.words.contains(&lower[i..i + n].concat()));
            match longest {
                Some(n) => i += n,
                None => {
                    out.push(chars[i]);
                    i += 1;
                }
            }
        }
        out
    }
}

/// Shannon entropy in bits per character over the character distribution
/// of `s`. Empty input yields 0.
pub fn shannon_entropy(s: &str) -> f64 {
    let mut counts: HashMap<char, usize> = HashMap::new();
    let mut total = 0usize;
    for c in s.chars() {
        *counts.entry(c).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts.values().map(|&k| {
        let p = k as f64 / n;
        -p * p.log2()
    }).sum();
    h.max(0.0)
}

#[derive(Debug, Clone)]
pub struct RandomnessConfig {
    pub dictionary: Arc<Dictionary>,
    pub min_residual_length: usize,
    pub entropy_threshold_bits_per_char: f64,
    pub keywords: Vec<String>,
}

impl Default for RandomnessConfig {
    fn default() -> Self {
        RandomnessConfig {
            dictionary: Dictionary::common_english(),
            min_residual_length: DEFAULT_MIN_RESIDUAL,
            entropy_threshold_bits_per_char: DEFAULT_ENTROPY_THRESHOLD,
            keywords: DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RandomnessConfig {
    /// Both thresholds must be strictly positive.
    pub fn validate(&self) -> Result<(), String> {
        if self.min_residual_length == 0 {
            return Err("min_residual_length must be positive".into());
        }
        if self.entropy_threshold_bits_per_char.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err("entropy threshold must be positive".into());
        }
        Ok(())
    }

    pub fn passes(&self, residual_length: usize, entropy: f64) -> bool {
        residual_length >= self.min_residual_length && entropy >= self.entropy_threshold_bits_per_char
    }

    pub fn keyword_in(&self, name: &str) -> bool {
        let name = name.to_lowercase();
        self.keywords.iter().any(|k| !k.is_empty() && name.contains(&k.to_lowercase()))
    }
}

/// `(residual_length, entropy_bits_per_char)` of `value` after dictionary
/// stripping.
pub fn randomness_score(value: &str, config: &RandomnessConfig) -> (usize, f64) {
    let residual = config.dictionary.strip(value);
    let len = residual.chars().count();
    if len == 0 {
        return (0, 0.0);
    }
    (len, shannon_entropy(&residual))
}
