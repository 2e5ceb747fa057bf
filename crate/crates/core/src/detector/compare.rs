use std::borrow::Cow;
use std::sync::OnceLock;

use regex::bytes::Regex;

use crate::client::HttpExchange;

fn rfc1123() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?:Mon|Tue|Wed|Thu|Fri|Sat|Sun), \d{2} (?:Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) \d{4} \d{2}:\d{2}:\d{2} GMT",
        )
        .unwrap()
    })
}

/// Body with RFC 1123 dates and occurrences of `nonce` removed.
pub fn normalize_body<'a>(body: &'a [u8], nonce: Option<&str>) -> Cow<'a, [u8]> {
    let mut out: Cow<'a, [u8]> = match rfc1123().replace_all(body, &b""[..]) {
        Cow::Borrowed(_) => Cow::Borrowed(body),
        Cow::Owned(v) => Cow::Owned(v),
    };
    if let Some(n) = nonce.filter(|n| !n.is_empty()) {
        let needle = regex::escape(n);
        let re = Regex::new(&needle).expect("escaped literal");
        if re.is_match(&out) {
            out = Cow::Owned(re.replace_all(&out, &b""[..]).into_owned());
        }
    }
    out
}

pub fn bodies_identical(a: &[u8], b: &[u8], nonce: Option<&str>) -> bool {
    normalize_body(a, nonce) == normalize_body(b, nonce)
}

/// Whether two exchanges carry the same body, ignoring headers, dates and
/// the test nonce.
pub fn responses_identical(a: &HttpExchange, b: &HttpExchange, nonce: Option<&str>) -> bool {
    bodies_identical(&a.body, &b.body, nonce)
}
