use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{randomness_score, RandomnessConfig};
use crate::urls::percent_decode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecretSource {
    HiddenFormField,
    AnchorQueryString,
    InlineScriptVariable,
    ScriptFileName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecretTrigger {
    KeywordMatch,
    EntropyMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecretCandidate {
    pub name: String,
    pub value: String,
    pub source: SecretSource,
    pub trigger: SecretTrigger,
    pub entropy_bits_per_char: f64,
    pub residual_length: usize,
}

struct Patterns {
    input: Regex,
    attr: Regex,
    anchor: Regex,
    script: Regex,
    js_assign: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        input: Regex::new(r"(?is)<input\b([^>]*)>").unwrap(),
        attr: Regex::new(r#"(?is)([a-z_:][-a-z0-9_:.]*)\s*(?:=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'>]+)))?"#).unwrap(),
        anchor: Regex::new(r"(?is)<a\b([^>]*)>").unwrap(),
        script: Regex::new(r"(?is)<script\b([^>]*)>(.*?)</script\s*>").unwrap(),
        js_assign: Regex::new(
            r#"(?:\b(?:var|let|const)\s+)?([A-Za-z_$][\w$]*)["']?\s*[:=]\s*(?:"([^"\\\n]*)"|'([^'\\\n]*)')"#,
        )
        .unwrap(),
    })
}

fn attributes(tag_body: &str) -> Vec<(String, String)> {
    patterns()
        .attr
        .captures_iter(tag_body)
        .map(|c| {
            let name = c[1].to_ascii_lowercase();
            let value = c.get(2).or(c.get(3)).or(c.get(4)).map_or("", |m| m.as_str());
            (name, decode_entities(value))
        })
        .collect()
}

fn attr<'a>(attrs: &'a [(String, String)], name: &str) -> Option<&'a str> {
    attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
}

fn decode_entities(s: &str) -> String {
    s.replace("&amp;", "&").replace("&quot;", "\"").replace("&#39;", "'").replace("&lt;", "<").replace("&gt;", ">")
}

/// `href` values of every anchor, entity-decoded, in document order.
pub(crate) fn anchor_hrefs(body: &[u8]) -> Vec<String> {
    let text = String::from_utf8_lossy(body);
    patterns()
        .anchor
        .captures_iter(&text)
        .filter_map(|cap| attr(&attributes(&cap[1]), "href").map(str::to_string))
        .collect()
}

/// Candidate secrets in an HTML page or script text: hidden form fields,
/// anchor query parameters, inline script string assignments and script
/// file names. Each raw candidate is kept when its name contains a keyword
/// or its value passes the randomness test.
///
/// Extraction is a tag-level regular-expression scan, not a DOM parse;
/// malformed markup degrades to whatever the patterns still recognise.
pub fn extract_secrets(body: &[u8], config: &RandomnessConfig) -> Vec<SecretCandidate> {
    let text = String::from_utf8_lossy(body);
    let p = patterns();
    let mut raw: Vec<(SecretSource, String, String)> = Vec::new();

    for cap in p.input.captures_iter(&text) {
        let attrs = attributes(&cap[1]);
        if attr(&attrs, "type").is_some_and(|t| t.eq_ignore_ascii_case("hidden")) {
            let name = attr(&attrs, "name").or(attr(&attrs, "id")).unwrap_or("");
            raw.push((SecretSource::HiddenFormField, name.to_string(), attr(&attrs, "value").unwrap_or("").to_string()));
        }
    }

    for cap in p.anchor.captures_iter(&text) {
        let attrs = attributes(&cap[1]);
        let Some(href) = attr(&attrs, "href") else { continue };
        let href = href.split('#').next().unwrap_or("");
        let Some((_, query)) = href.split_once('?') else { continue };
        for pair in query.split('&').filter(|s| !s.is_empty()) {
            let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
            raw.push((
                SecretSource::AnchorQueryString,
                percent_decode(&k.replace('+', " ")),
                percent_decode(&v.replace('+', " ")),
            ));
        }
    }

    let mut saw_script_tag = false;
    for cap in p.script.captures_iter(&text) {
        saw_script_tag = true;
        let attrs = attributes(&cap[1]);
        match attr(&attrs, "src") {
            Some(src) => {
                let path = src.split(['?', '#']).next().unwrap_or("");
                let file = path.rsplit('/').next().unwrap_or("");
                let stem = file.split('.').next().unwrap_or("");
                if !stem.is_empty() {
                    raw.push((SecretSource::ScriptFileName, file.to_string(), stem.to_string()));
                }
            }
            None => script_vars(&cap[2], &mut raw),
        }
    }
    if !saw_script_tag && !text.contains('<') {
        script_vars(&text, &mut raw);
    }

    let mut seen = HashSet::new();
    raw.into_iter()
        .filter(|(_, _, v)| !v.is_empty())
        .filter(|c| seen.insert(c.clone()))
        .filter_map(|(source, name, value)| {
            let (residual_length, entropy) = randomness_score(&value, config);
            let trigger = if config.keyword_in(&name) {
                SecretTrigger::KeywordMatch
            } else if config.passes(residual_length, entropy) {
                SecretTrigger::EntropyMatch
            } else {
                return None;
            };
            Some(SecretCandidate { name, value, source, trigger, entropy_bits_per_char: entropy, residual_length })
        })
        .collect()
}

fn script_vars(script: &str, out: &mut Vec<(SecretSource, String, String)>) {
    for c in patterns().js_assign.captures_iter(script) {
        let value = c.get(2).or(c.get(3)).map_or("", |m| m.as_str());
        out.push((SecretSource::InlineScriptVariable, c[1].to_string(), value.to_string()));
    }
}
