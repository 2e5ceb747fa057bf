use std::sync::Arc;

use super::{LabRequest, SimSite, SiteRuntime};
use crate::detector::extract_markers;
use crate::urls::{make_attack_url, parse_url, PathConfusionTechnique, DEFAULT_EXTENSION};

const ORACLE_NONCE: &str = "0racle0n0nce0000";

/// Parameters of one ground-truth simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleQuery {
    pub technique: PathConfusionTechnique,
    pub extension: String,
    pub embedded_param: Option<String>,
    /// Simulated seconds between the victim and the attacker request.
    pub delay_secs: u64,
}

impl OracleQuery {
    pub fn new(technique: PathConfusionTechnique) -> Self {
        OracleQuery { technique, extension: DEFAULT_EXTENSION.to_string(), embedded_param: None, delay_secs: 0 }
    }

    pub fn extension(mut self, ext: &str) -> Self {
        self.extension = ext.to_string();
        self
    }

    pub fn delay(mut self, secs: u64) -> Self {
        self.delay_secs = secs;
        self
    }

    pub fn embedded_param(mut self, p: Option<String>) -> Self {
        self.embedded_param = p;
        self
    }
}

/// Ground truth for `site` under `technique` with default settings.
pub fn oracle_vulnerable(site: &SimSite, technique: PathConfusionTechnique) -> bool {
    oracle_query(site, &OracleQuery::new(technique))
}

/// For each protected, marker-bearing page: on a fresh runtime, log the
/// victim and the attacker in through the login form, send the victim's
/// request for the attack URL, wait, send the attacker's, and check the
/// attacker's body for a victim marker.
pub fn oracle_query(site: &SimSite, q: &OracleQuery) -> bool {
    let site = Arc::new(site.clone());
    let markers = site.victim_markers();
    site.protected_marker_paths().iter().any(|path| {
        let mut rt = SiteRuntime::new(site.clone());
        let Some(victim_cookie) = login(&mut rt, 0) else { return false };
        let Some(attacker_cookie) = login(&mut rt, 1) else { return false };
        let base = parse_url(&format!("{}{path}", site.origin_url())).expect("resource paths are valid");
        let mut attack = make_attack_url(&base, q.technique, ORACLE_NONCE, &q.extension);
        if let Some(p) = &q.embedded_param {
            attack = attack.with_embedded_param(p);
        }
        let target = attack.path().to_string();
        rt.proxy_handle(&LabRequest::get(&target).with_header("Cookie", &victim_cookie));
        rt.advance_clock(q.delay_secs);
        let (resp, _) = rt.proxy_handle(&LabRequest::get(&target).with_header("Cookie", &attacker_cookie));
        !extract_markers(&resp.body, &markers).is_empty()
    })
}

fn login(rt: &mut SiteRuntime, account: usize) -> Option<String> {
    let site = rt.site.clone();
    let acct = site.auth.accounts.get(account)?;
    let body = url::form_urlencoded::Serializer::new(String::new())
        .append_pair("username", &acct.username)
        .append_pair("password", &acct.password)
        .finish();
    let req = LabRequest {
        method: "POST".into(),
        target: site.auth.login_path.clone(),
        headers: vec![("Content-Type".into(), "application/x-www-form-urlencoded".into())],
        body: body.into_bytes(),
    };
    let (resp, _) = rt.proxy_handle(&req);
    let set = resp.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case("set-cookie"))?;
    set.1.split(';').next().map(str::to_string)
}

/// Oracle verdicts for every technique.
pub fn oracle_row(site: &SimSite, base: &OracleQuery) -> Vec<(PathConfusionTechnique, bool)> {
    PathConfusionTechnique::ALL
        .into_iter()
        .map(|t| (t, oracle_query(site, &OracleQuery { technique: t, ..base.clone() })))
        .collect()
}
