use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{extract_markers, extract_secrets, responses_identical, MarkerSet, RandomnessConfig, SecretCandidate};
use crate::client::{EngineError, HttpEngine, HttpExchange, Identity};
use crate::policy::ResponseCacheHeaders;
use crate::report::{cdn_label, default_fingerprints, CdnFingerprint};
use crate::urls::{make_attack_url, ParsedUrl, PathConfusionTechnique, DEFAULT_EXTENSION};

/// Outcome of the four-step test for one page and one technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanVerdict {
    pub page: String,
    pub domain: String,
    pub technique: PathConfusionTechnique,
    pub attack_url: String,
    /// 0 when the step was not completed.
    pub victim_status: u16,
    pub attacker_status: u16,
    pub unauth_status: u16,
    pub markers_leaked: Vec<String>,
    pub secrets: Vec<SecretCandidate>,
    pub responses_identical: bool,
    pub unauth_exploitable: bool,
    pub vulnerable: bool,
    /// Set when a step failed; such verdicts are untested, not clean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inconclusive: Option<String>,
    /// Cache-related response header labels seen on the victim response.
    #[serde(default)]
    pub cache_headers: Vec<String>,
    /// `Age` / `X-Cache`-style headers on the attacker response. Recorded
    /// only; never used to decide vulnerability.
    #[serde(default)]
    pub cache_evidence: Vec<(String, String)>,
    #[serde(default)]
    pub cdn_labels: Vec<String>,
}

impl ScanVerdict {
    pub fn is_inconclusive(&self) -> bool {
        self.inconclusive.is_some()
    }

    pub fn leak_kind(&self) -> Option<LeakKind> {
        if !self.vulnerable {
            return None;
        }
        let has_secrets = self.responses_identical && !self.secrets.is_empty();
        Some(match (self.markers_leaked.is_empty(), has_secrets) {
            (false, true) => LeakKind::Both,
            (false, false) => LeakKind::Markers,
            _ => LeakKind::Secrets,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakKind {
    Markers,
    Secrets,
    Both,
}

/// Waits between the victim and attacker steps. `target` is the attack URL
/// about to be requested by the attacker.
pub trait AttackerDelay: Send + Sync {
    fn wait(&self, seconds: u64, target: &str);
}

/// Wall-clock sleep.
#[derive(Debug, Default)]
pub struct SleepDelay;

impl AttackerDelay for SleepDelay {
    fn wait(&self, seconds: u64, _target: &str) {
        if seconds > 0 {
            std::thread::sleep(Duration::from_secs(seconds));
        }
    }
}

#[derive(Clone)]
pub struct DetectorConfig {
    pub randomness: RandomnessConfig,
    pub extension: String,
    /// `name=val` for the embedded-parameter form of the question-mark
    /// payload; `None` uses the bare form.
    pub embedded_param: Option<String>,
    pub fingerprints: Vec<CdnFingerprint>,
    pub delay_secs: u64,
    pub delay: Arc<dyn AttackerDelay>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            randomness: RandomnessConfig::default(),
            extension: DEFAULT_EXTENSION.to_string(),
            embedded_param: None,
            fingerprints: default_fingerprints(),
            delay_secs: 0,
            delay: Arc::new(SleepDelay),
        }
    }
}

impl std::fmt::Debug for DetectorConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DetectorConfig")
            .field("extension", &self.extension)
            .field("embedded_param", &self.embedded_param)
            .field("delay_secs", &self.delay_secs)
            .finish_non_exhaustive()
    }
}

const EVIDENCE_HEADERS: [&str; 6] = ["age", "x-cache", "cf-cache-status", "x-cache-status", "x-served-by", "via"];

/// Run the WCD test: the victim requests the attack URL, then (after the
/// configured delay) the attacker, then a cookie-less client. `nonce` must
/// be fresh for every call.
#[allow(clippy::too_many_arguments)]
pub fn run_wcd_test(
    engine: &HttpEngine,
    page: &ParsedUrl,
    technique: PathConfusionTechnique,
    victim: &mut Identity,
    attacker: &mut Identity,
    markers: &MarkerSet,
    nonce: &str,
    config: &DetectorConfig,
) -> ScanVerdict {
    let mut attack = make_attack_url(page, technique, nonce, &config.extension);
    if let Some(p) = &config.embedded_param {
        attack = attack.with_embedded_param(p);
    }
    let mut verdict = ScanVerdict {
        page: page.to_string(),
        domain: page.host.clone(),
        technique,
        attack_url: attack.rendered.clone(),
        victim_status: 0,
        attacker_status: 0,
        unauth_status: 0,
        markers_leaked: Vec::new(),
        secrets: Vec::new(),
        responses_identical: false,
        unauth_exploitable: false,
        vulnerable: false,
        inconclusive: None,
        cache_headers: Vec::new(),
        cache_evidence: Vec::new(),
        cdn_labels: Vec::new(),
    };
    let fail = |mut v: ScanVerdict, step: &str, e: EngineError| {
        v.inconclusive = Some(format!("{step} step failed: {e}"));
        v
    };

    let victim_ex = match engine.fetch(victim, &attack.rendered) {
        Ok(e) => e,
        Err(e) => return fail(verdict, "victim", e),
    };
    verdict.victim_status = victim_ex.status;
    verdict.cache_headers =
        ResponseCacheHeaders::from_headers(victim_ex.response_headers.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .labels();
    verdict.cdn_labels = cdn_label(&victim_ex, &config.fingerprints);

    config.delay.wait(config.delay_secs, &attack.rendered);

    let attacker_ex = match engine.fetch(attacker, &attack.rendered) {
        Ok(e) => e,
        Err(e) => return fail(verdict, "attacker", e),
    };
    verdict.attacker_status = attacker_ex.status;
    verdict.cache_evidence = evidence(&attacker_ex);

    let mut unauth = Identity::unauthenticated_from(attacker);
    let unauth_ex = match engine.fetch(&mut unauth, &attack.rendered) {
        Ok(e) => e,
        Err(e) => return fail(verdict, "unauthenticated", e),
    };
    verdict.unauth_status = unauth_ex.status;

    classify(&mut verdict, &victim_ex, &attacker_ex, &unauth_ex, markers, nonce, &config.randomness);
    verdict
}

/// Fill the leak fields from the three responses.
pub fn classify(
    verdict: &mut ScanVerdict,
    victim: &HttpExchange,
    attacker: &HttpExchange,
    unauth: &HttpExchange,
    markers: &MarkerSet,
    nonce: &str,
    randomness: &RandomnessConfig,
) {
    verdict.markers_leaked = extract_markers(&attacker.body, markers);
    verdict.responses_identical = responses_identical(victim, attacker, Some(nonce));
    verdict.secrets = if verdict.responses_identical || !verdict.markers_leaked.is_empty() {
        extract_secrets(&attacker.body, randomness)
    } else {
        Vec::new()
    };
    verdict.vulnerable =
        !verdict.markers_leaked.is_empty() || (verdict.responses_identical && !verdict.secrets.is_empty());

    let unauth_markers = !extract_markers(&unauth.body, markers).is_empty();
    let unauth_secrets = responses_identical(victim, unauth, Some(nonce)) && !verdict.secrets.is_empty();
    verdict.unauth_exploitable = verdict.vulnerable && (unauth_markers || unauth_secrets);
}

fn evidence(ex: &HttpExchange) -> Vec<(String, String)> {
    ex.response_headers
        .iter()
        .filter(|(k, _)| EVIDENCE_HEADERS.iter().any(|e| k.eq_ignore_ascii_case(e)))
        .map(|(k, v)| (k.to_ascii_lowercase(), v.clone()))
        .collect()
}
