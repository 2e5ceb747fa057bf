use std::collections::{BTreeSet, HashSet};
use std::sync::{Arc, Mutex};

use proptest::prelude::*;

use wcd::client::{
    HttpEngine, HttpExchange, HttpRequest, HttpResponse, Identity, RateLimiter, Role, Transport, TransportError,
};
use wcd::crawler::SeedPool;
use wcd::detector::{
    classify, extract_markers, extract_secrets, Marker, MarkerSet, RandomnessConfig, ScanVerdict, SecretTrigger,
    MIN_MARKER_ENTROPY,
};
use wcd::lab::{proxy_view, route_path, OriginSemantics, OriginVariant};
use wcd::policy::{decide, parse_cache_control, path_extension, CdnProfile, CacheControlDirectives, HonoredHeaders};
use wcd::report::{aggregate, chi_square_2x2, Counts, SiteMap};
use wcd::urls::{
    group_key, make_attack_url, parse_url, select_representatives, NonceGenerator, PathConfusionTechnique as T,
};

fn technique() -> impl Strategy<Value = T> {
    prop::sample::select(T::ALL.to_vec())
}

fn origin_for(t: T) -> OriginVariant {
    match t {
        T::PathParameter => OriginVariant::PathParameterFallback,
        T::EncodedNewline => OriginVariant::TruncateAtNewline,
        T::EncodedSemicolon => OriginVariant::SemicolonParams,
        T::EncodedPound => OriginVariant::TruncateAtFragment,
        T::EncodedQuestion => OriginVariant::TruncateAtQuestion,
    }
}

fn base_path() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z0-9][a-z0-9._-]{0,8}", 1..4).prop_map(|s| format!("/{}", s.join("/")))
}

fn page_url() -> impl Strategy<Value = String> {
    let seg = prop_oneof!["[a-c]{1,2}", "[0-9]{1,3}", "x[0-9]"];
    (
        prop::sample::select(vec!["a.test", "www.a.test", "b.test"]),
        prop::collection::vec(seg, 0..4),
        prop::collection::vec(("[pqr]", "[a-z0-9]{0,3}"), 0..3),
    )
        .prop_map(|(host, segs, params)| {
            let mut u = format!("http://{host}/{}", segs.join("/"));
            if !params.is_empty() {
                let q: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                u.push('?');
                u.push_str(&q.join("&"));
            }
            u
        })
}

proptest! {
    // The origin routes the attack URL to the page; the cache, reading the
    // path opaquely, sees a .css file.
    #[test]
    fn attack_urls_are_read_two_ways(base in base_path(), t in technique(), name in "[a-z0-9]{16}") {
        let page = parse_url(&format!("https://www.site.test{base}")).unwrap();
        let attack = make_attack_url(&page, t, &name, "css");
        let origin = OriginSemantics::new(&[origin_for(t)], true);
        let routed = route_path(&origin, attack.path(), |p| p == base);
        prop_assert_eq!(routed.as_deref(), Some(base.as_str()));
        let cache_view = proxy_view(attack.path(), false);
        prop_assert_eq!(path_extension(&cache_view), Some("css".to_string()));
        let suffix = format!("{}.css", name);
        prop_assert!(attack.rendered.ends_with(&suffix));
    }

    #[test]
    fn group_key_is_stable_under_abstraction(u in page_url()) {
        let key = group_key(&parse_url(&u).unwrap());
        let mut abstracted = format!("http://{}{}", key.host, key.abstract_path);
        if !key.param_names.is_empty() {
            let q: Vec<String> = key.param_names.iter().map(|k| format!("{k}=")).collect();
            abstracted.push('?');
            abstracted.push_str(&q.join("&"));
        }
        prop_assert_eq!(group_key(&parse_url(&abstracted).unwrap()), key);
    }

    #[test]
    fn representatives_one_per_group(urls in prop::collection::vec(page_url(), 0..40), seed in any::<u64>()) {
        let parsed: Vec<_> = urls.iter().map(|u| parse_url(u).unwrap()).collect();
        let reps = select_representatives(&parsed, seed);
        prop_assert_eq!(&reps, &select_representatives(&parsed, seed));
        let keys: BTreeSet<_> = parsed.iter().map(group_key).collect();
        let rep_keys: BTreeSet<_> = reps.iter().map(group_key).collect();
        prop_assert_eq!(reps.len(), keys.len());
        prop_assert_eq!(rep_keys, keys);
        for r in &reps {
            prop_assert!(parsed.contains(r));
        }
    }

    #[test]
    fn nonces_are_fresh(seed in any::<u64>()) {
        let mut g = NonceGenerator::new(seed);
        let names: HashSet<String> = (0..500).map(|_| g.next_name()).collect();
        prop_assert_eq!(names.len(), 500);
        prop_assert!(names.iter().all(|n| n.len() == 16 && n.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())));
    }
}

fn directives() -> impl Strategy<Value = CacheControlDirectives> {
    (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>(), prop::option::of(0u64..100_000)).prop_map(
        |(no_store, no_cache, private, public, max_age)| CacheControlDirectives {
            no_store,
            no_cache,
            private,
            public,
            max_age,
            ..Default::default()
        },
    )
}

fn profile() -> impl Strategy<Value = CdnProfile> {
    prop::sample::select(vec![
        CdnProfile::akamai_default(),
        CdnProfile::cloudflare_default(),
        CdnProfile::cloudfront_default(),
        CdnProfile::fastly_default(),
    ])
}

fn request_path() -> impl Strategy<Value = String> {
    ("/[a-z/]{0,12}", prop::option::of(prop::sample::select(vec!["css", "js", "php", "jpg", "html", "CSS"])))
        .prop_map(|(p, e)| match e {
            Some(e) => format!("{p}x.{e}"),
            None => p,
        })
}

proptest! {
    #[test]
    fn honoured_no_store_is_never_stored(
        p in profile(), path in request_path(), status in prop::sample::select(vec![200u16, 404, 302, 500]),
        mut d in directives(),
    ) {
        d.no_store = true;
        let mut p = p;
        p.honored = HonoredHeaders { no_store: true, ..p.honored };
        prop_assert!(!decide(&p, &path, status, &d).store);
    }

    #[test]
    fn decide_is_pure(p in profile(), path in request_path(), status in 100u16..600, d in directives()) {
        prop_assert_eq!(decide(&p, &path, status, &d), decide(&p, &path, status, &d));
    }

    #[test]
    fn akamai_caches_css_despite_headers(d in directives(), name in "[a-z]{1,8}") {
        let mut d = d;
        d.no_store = true;
        let decision = decide(&CdnProfile::akamai_default(), &format!("/account.php/{name}.css"), 200, &d);
        prop_assert!(decision.store);
    }

    #[test]
    fn cache_control_round_trips(d in directives()) {
        let rendered = d.to_string();
        prop_assert_eq!(parse_cache_control(&rendered), d);
    }
}

fn marker_value() -> impl Strategy<Value = String> {
    "[A-Za-z0-9]{16,24}"
}

proptest! {
    #[test]
    fn marker_sets_enforce_distinct_high_entropy_values(values in prop::collection::vec("[a-d]{12,16}|[A-Za-z0-9]{12,20}", 1..5)) {
        let markers: Vec<Marker> = values
            .iter()
            .enumerate()
            .map(|(i, v)| Marker { label: format!("m{i}"), value: v.clone() })
            .collect();
        if let Ok(set) = MarkerSet::new(markers) {
            let vals: Vec<&str> = set.values().collect();
            let distinct: HashSet<&&str> = vals.iter().collect();
            prop_assert_eq!(distinct.len(), vals.len());
            for v in vals {
                prop_assert!(wcd::detector::shannon_entropy(v) >= MIN_MARKER_ENTROPY);
            }
        }
    }

    #[test]
    fn marker_matching_is_exact(value in marker_value(), before in "[ -~]{0,40}", after in "[ -~]{0,40}") {
        let set = match MarkerSet::from_pairs(&[("m", value.as_str())]) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let with = format!("{before}{value}{after}");
        prop_assert_eq!(extract_markers(with.as_bytes(), &set), vec!["m".to_string()]);
        let without = format!("{before}{after}");
        let expect = without.contains(&value);
        prop_assert_eq!(!extract_markers(without.as_bytes(), &set).is_empty(), expect);
    }

    #[test]
    fn entropy_matches_meet_thresholds(tokens in prop::collection::vec("[a-z0-9]{4,20}", 1..6)) {
        let body: String = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| format!("<input type=\"hidden\" name=\"f{i}\" value=\"{t}\">"))
            .collect();
        let cfg = RandomnessConfig::default();
        for s in extract_secrets(body.as_bytes(), &cfg) {
            if s.trigger == SecretTrigger::EntropyMatch {
                prop_assert!(s.residual_length >= cfg.min_residual_length);
                prop_assert!(s.entropy_bits_per_char >= cfg.entropy_threshold_bits_per_char);
            }
        }
    }

    #[test]
    fn thresholds_must_be_positive(len in 0usize..3, h in -1.0f64..1.0) {
        let cfg = RandomnessConfig { min_residual_length: len, entropy_threshold_bits_per_char: h, ..Default::default() };
        prop_assert_eq!(cfg.validate().is_ok(), len > 0 && h > 0.0);
    }

    // Secrets are only looked for when the attacker got the victim's page.
    #[test]
    fn secrets_need_identical_responses(token in "[a-f0-9]{24}", other in "[a-z]{3,10}") {
        let victim_body = format!("<input type=\"hidden\" name=\"csrf\" value=\"{token}\"><p>{other}</p>");
        let attacker_body = format!("<input type=\"hidden\" name=\"csrf\" value=\"{token}\"><p>{other}!</p>");
        let markers = MarkerSet::from_pairs(&[("m", "Zq8Lw3Nv7Tx1Pk5R")]).unwrap();
        let mut v = verdict("http://a.test/p", T::PathParameter, false);
        classify(
            &mut v,
            &exchange(&victim_body, Role::Victim),
            &exchange(&attacker_body, Role::Attacker),
            &exchange("", Role::Unauthenticated),
            &markers,
            "nonce",
            &RandomnessConfig::default(),
        );
        prop_assert!(!v.responses_identical);
        prop_assert!(v.secrets.is_empty());
        prop_assert!(!v.vulnerable);
    }
}

fn exchange(body: &str, role: Role) -> HttpExchange {
    HttpExchange {
        url: "http://a.test/p".into(),
        method: "GET".into(),
        request_headers: Vec::new(),
        status: 200,
        response_headers: Vec::new(),
        body: body.as_bytes().to_vec(),
        timing_ms: 0,
        identity_role: role,
        final_url: "http://a.test/p".into(),
        hops: Vec::new(),
    }
}

fn verdict(page: &str, t: T, vulnerable: bool) -> ScanVerdict {
    let domain = parse_url(page).unwrap().host;
    ScanVerdict {
        page: page.to_string(),
        domain,
        technique: t,
        attack_url: format!("{page}/x.css"),
        victim_status: 200,
        attacker_status: 200,
        unauth_status: 302,
        markers_leaked: if vulnerable { vec!["name".into()] } else { Vec::new() },
        secrets: Vec::new(),
        responses_identical: vulnerable,
        unauth_exploitable: false,
        vulnerable,
        inconclusive: None,
        cache_headers: Vec::new(),
        cache_evidence: Vec::new(),
        cdn_labels: Vec::new(),
    }
}

fn verdicts() -> impl Strategy<Value = Vec<ScanVerdict>> {
    prop::collection::vec(
        (
            prop::sample::select(vec!["a.test", "www.a.test", "shop.a.test", "b.test", "www.c.co.uk", "d.c.co.uk"]),
            "[a-c]{1,2}",
            technique(),
            any::<bool>(),
            prop::sample::select(vec![200u16, 404, 500]),
        )
            .prop_map(|(host, path, t, vuln, status)| {
                let mut v = verdict(&format!("http://{host}/{path}"), t, vuln);
                v.victim_status = status;
                v
            }),
        0..30,
    )
}

fn ordered(c: &Counts) -> bool {
    c.sites <= c.domains && c.domains <= c.pages
}

proptest! {
    #[test]
    fn aggregate_ignores_order(vs in verdicts(), rot in any::<prop::sample::Index>()) {
        let mut shuffled = vs.clone();
        shuffled.reverse();
        if !shuffled.is_empty() {
            let k = rot.index(shuffled.len());
            shuffled.rotate_left(k);
        }
        prop_assert_eq!(aggregate(&vs, &SiteMap::registrable()), aggregate(&shuffled, &SiteMap::registrable()));
    }

    #[test]
    fn counts_nest(vs in verdicts()) {
        let s = aggregate(&vs, &SiteMap::registrable());
        prop_assert!(ordered(&s.tested) && ordered(&s.vulnerable) && ordered(&s.unauth_exploitable));
        for split in s.by_technique.values() {
            prop_assert!(ordered(&split.ok) && ordered(&split.not_ok));
        }
        for c in s.by_technique_total.values().chain(s.by_status.values()).chain(s.by_cdn.values()) {
            prop_assert!(ordered(c));
        }
        for cell in &s.uniqueness {
            prop_assert!(ordered(&cell.counts));
            if cell.row == cell.col {
                prop_assert_eq!(cell.counts, Counts::default());
            }
        }
    }

    #[test]
    fn chi_square_symmetry(a in 1u64..500, b in 1u64..500, c in 1u64..500, d in 1u64..500) {
        let (x, p) = chi_square_2x2(a, b, c, d).unwrap();
        let (y, q) = chi_square_2x2(d, c, b, a).unwrap();
        prop_assert!((x - y).abs() <= 1e-9 * x.max(1.0));
        prop_assert!((p - q).abs() <= 1e-12);
    }

    #[test]
    fn seed_primaries_are_unique(hosts in prop::collection::vec(
        prop::sample::select(vec!["a.test", "www.a.test", "api.a.test", "b.test", "www.b.test", "c.test"]), 1..12)
    ) {
        let text: String = hosts.iter().map(|h| format!("https://{h}\n")).collect();
        let pool = SeedPool::parse(&text, std::path::Path::new("."), "seeds").unwrap();
        let primaries: HashSet<&String> = pool.sites.iter().map(|s| &s.primary).collect();
        prop_assert_eq!(primaries.len(), pool.sites.len());
        let names: HashSet<String> = pool.sites.iter().map(|s| s.site_name()).collect();
        prop_assert_eq!(names.len(), pool.sites.len());
        let all: HashSet<&String> = pool.sites.iter().flat_map(|s| s.hosts()).collect();
        let distinct: HashSet<&&str> = hosts.iter().collect();
        prop_assert_eq!(all.len(), distinct.len());
    }
}

/// Replies to everything with a fresh cookie and records what was sent.
#[derive(Default)]
struct CookieSpray {
    seen: Mutex<Vec<HttpRequest>>,
}

impl Transport for CookieSpray {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut seen = self.seen.lock().unwrap();
        seen.push(request.clone());
        let n = seen.len();
        let mut headers = vec![("Set-Cookie".to_string(), format!("sid=s{n}; Path=/"))];
        if n.is_multiple_of(3) {
            headers.push(("Location".to_string(), "/next".to_string()));
            return Ok(HttpResponse { status: 302, headers, body: Vec::new() });
        }
        headers.push(("Content-Type".to_string(), "text/html".to_string()));
        Ok(HttpResponse { status: 200, headers, body: b"<p>hi</p>".to_vec() })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn unauthenticated_requests_carry_no_cookie(paths in prop::collection::vec("/[a-z]{0,6}", 2..8)) {
        let transport = Arc::new(CookieSpray::default());
        let engine = HttpEngine::new(transport.clone(), Arc::new(RateLimiter::unlimited()));
        let mut victim = Identity::victim(None);
        let mut unauth = Identity::unauthenticated_from(&victim);
        for p in &paths {
            let _ = engine.fetch(&mut victim, &format!("http://a.test{p}?who=v"));
            let _ = engine.fetch(&mut unauth, &format!("http://a.test{p}?who=u"));
        }
        let seen = transport.seen.lock().unwrap();
        let cookie = |r: &HttpRequest| r.header("cookie").is_some_and(|c| !c.is_empty());
        prop_assert!(seen.iter().filter(|r| r.url.ends_with("who=v")).skip(1).all(cookie));
        for r in seen.iter().filter(|r| r.url.ends_with("who=u")) {
            prop_assert!(!cookie(r), "cookie sent: {:?}", r);
        }
    }
}
