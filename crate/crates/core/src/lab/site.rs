use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::OriginSemantics;
use crate::client::{LoginDescriptor, Role};
use crate::detector::{Marker, MarkerSet};
use crate::policy::CdnProfile;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnauthBehavior {
    /// 302 to the login page.
    #[default]
    Redirect,
    Forbidden,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    #[default]
    Page,
    /// GET shows the form, POST checks credentials and starts a session.
    Login,
    /// Ends the session and redirects home.
    Logout,
}

/// A routable origin resource. Bodies are templates; see [`render`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    #[serde(default = "ok")]
    pub status: u16,
    #[serde(default)]
    pub headers: Vec<(String, String)>,
    pub body: String,
    #[serde(default)]
    pub protected: bool,
    #[serde(default)]
    pub kind: ResourceKind,
}

fn ok() -> u16 {
    200
}

impl Resource {
    pub fn public(body: impl Into<String>) -> Self {
        Resource { status: 200, headers: Vec::new(), body: body.into(), protected: false, kind: ResourceKind::Page }
    }

    pub fn protected(body: impl Into<String>, headers: Vec<(String, String)>) -> Self {
        Resource { status: 200, headers, body: body.into(), protected: true, kind: ResourceKind::Page }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub username: String,
    pub password: String,
    /// Marker fields, rendered through `{{m:<label>}}`.
    pub markers: Vec<Marker>,
    /// Per-account secret rendered through `{{api_key}}`.
    pub api_key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthConfig {
    pub login_path: String,
    pub session_cookie: String,
    #[serde(default)]
    pub unauthenticated: UnauthBehavior,
    /// `accounts[0]` is the victim, `accounts[1]` the attacker.
    pub accounts: Vec<Account>,
}

/// A simulated site: an origin with its URL semantics and resources,
/// fronted by a caching proxy running `cache_profile`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSite {
    pub name: String,
    pub host: String,
    pub origin: OriginSemantics,
    pub cache_profile: CdnProfile,
    /// The cache decodes percent-escapes (and then ends the path at a
    /// newline, `;`, `#` or `?`) before keying and rule matching.
    pub proxy_decodes_percent: bool,
    pub resources: BTreeMap<String, Resource>,
    pub auth: AuthConfig,
    /// Replaces the TTL chosen by the profile for every stored entry.
    pub ttl_override: Option<u64>,
    /// A miss in the client's region is served from any other region that
    /// holds a fresh entry.
    pub tiered_retry: bool,
    pub seed: u64,
}

pub const MARKER_LABELS: [&str; 3] = ["name", "email", "address"];

fn alnum(rng: &mut ChaCha8Rng, n: usize) -> String {
    const A: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    (0..n).map(|_| A[rng.random_range(0..A.len())] as char).collect()
}

fn account(seed: u64, username: &str) -> Account {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let markers = vec![
        Marker { label: "name".into(), value: format!("Name {}", alnum(&mut rng, 16)) },
        Marker { label: "email".into(), value: format!("{}@mail.test", alnum(&mut rng, 16).to_lowercase()) },
        Marker { label: "address".into(), value: format!("{} Main St", alnum(&mut rng, 16)) },
    ];
    Account { username: username.to_string(), password: alnum(&mut rng, 12), markers, api_key: alnum(&mut rng, 24) }
}

fn page(title: &str, content: &str) -> String {
    format!(
        "<!doctype html>\n<html><head><title>{title}</title></head>\n<body>\n{content}\n</body></html>\n"
    )
}

const NAV: &str = r#"<p><a href="/">Home</a> | <a href="/logout">Log out</a></p>"#;

impl SimSite {
    /// Pages: `/`, `/about`, `/item/1..3`, `/login`, `/logout`, and two
    /// protected pages carrying the account's markers: `/account.php` and
    /// `/settings`. With `protected_no_store` the protected pages are sent
    /// with `Cache-Control: no-store`.
    pub fn standard(
        name: &str,
        host: &str,
        origin: OriginSemantics,
        cache_profile: CdnProfile,
        protected_no_store: bool,
        seed: u64,
    ) -> Self {
        let mut r = BTreeMap::new();
        r.insert(
            "/".to_string(),
            Resource::public(page(
                "Home",
                r#"<h1>Welcome</h1>
<ul>
<li><a href="/about">About us</a></li>
<li><a href="/account.php">My account</a></li>
<li><a href="/settings">Settings</a></li>
<li><a href="/item/1">First item</a></li>
<li><a href="/item/2">Second item</a></li>
<li><a href="/item/3">Third item</a></li>
<li><a href="/login">Log in</a></li>
<li><a href="/logout">Log out</a></li>
</ul>"#,
            )),
        );
        r.insert(
            "/about".to_string(),
            Resource::public(page("About", &format!("<h1>About</h1>\n<p>A small shop selling things.</p>\n{NAV}"))),
        );
        for i in 1..=3 {
            r.insert(
                format!("/item/{i}"),
                Resource::public(page(
                    "Item",
                    &format!("<h1>Item {i}</h1>\n<p>A fine product.</p>\n<a href=\"/item/{}\">Next</a>\n{NAV}", i % 3 + 1),
                )),
            );
        }
        let protected_headers = if protected_no_store {
            vec![("Cache-Control".to_string(), "no-store".to_string())]
        } else {
            Vec::new()
        };
        r.insert(
            "/account.php".to_string(),
            Resource::protected(
                page(
                    "Account",
                    r#"<h1>Your account</h1>
<table>
<tr><th>Name</th><td>{{m:name}}</td></tr>
<tr><th>Email</th><td>{{m:email}}</td></tr>
<tr><th>Address</th><td>{{m:address}}</td></tr>
</table>
<form method="post" action="/account.php">
<input type="hidden" name="csrf_token" value="{{csrf}}">
<input type="text" name="nickname">
</form>
<script>var apiKey = "{{api_key}}";</script>
<p>Rendered {{date}}</p>
<p><a href="/">Home</a> | <a href="/settings">Settings</a> | <a href="/logout">Log out</a></p>"#,
                ),
                protected_headers.clone(),
            ),
        );
        r.insert(
            "/settings".to_string(),
            Resource::protected(
                page(
                    "Settings",
                    r#"<h1>Settings for {{m:name}}</h1>
<form method="post" action="/settings">
<input type="hidden" name="csrf_token" value="{{csrf}}">
<input type="email" name="email" value="{{m:email}}">
</form>
<p><a href="/">Home</a> | <a href="/logout">Log out</a></p>"#,
                ),
                protected_headers,
            ),
        );
        insert_auth_pages(&mut r);
        SimSite {
            name: name.to_string(),
            host: host.to_ascii_lowercase(),
            origin,
            cache_profile,
            proxy_decodes_percent: false,
            resources: r,
            auth: default_auth(seed),
            ttl_override: None,
            tiered_retry: false,
            seed,
        }
    }

    /// Public site of 1,200 linked pages in 7 structural groups: `/`,
    /// `/item/<n>` (400), `/blog/<n>` (300), `/tag/<n>` (200),
    /// `/docs/<n>/page` (150), `/search?q=..&page=<n>` (100) and
    /// `/list?sort=..&page=<n>` (49).
    pub fn sitemap(name: &str, host: &str, cache_profile: CdnProfile, seed: u64) -> Self {
        let mut r = BTreeMap::new();
        let numbered: [(&str, &str, usize); 4] =
            [("/item/", "", 400), ("/blog/", "", 300), ("/tag/", "", 200), ("/docs/", "/page", 150)];
        let mut root_links = String::new();
        for (prefix, suffix, count) in numbered {
            root_links.push_str(&format!("<li><a href=\"{prefix}1{suffix}\">{prefix}</a></li>\n"));
            for n in 1..=count {
                let mut links = String::new();
                for k in 1..=3 {
                    if n + k <= count {
                        links.push_str(&format!("<a href=\"{prefix}{}{suffix}\">more</a>\n", n + k));
                    }
                }
                r.insert(
                    format!("{prefix}{n}{suffix}"),
                    Resource::public(page("Page", &format!("<h1>{prefix}{n}</h1>\n{links}<a href=\"/\">Home</a>"))),
                );
            }
        }
        let words = ["apple", "river", "stone", "cloud", "green"];
        let search_links: String = (1..=100)
            .map(|n| format!("<a href=\"/search?q={}&amp;page={n}\">result page {n}</a>\n", words[n % words.len()]))
            .collect();
        r.insert("/search".to_string(), Resource::public(page("Search", &format!("<h1>Search</h1>\n{search_links}"))));
        let sorts = ["name", "price", "date"];
        let list_links: String = (1..=49)
            .map(|n| format!("<a href=\"/list?sort={}&amp;page={n}\">list page {n}</a>\n", sorts[n % sorts.len()]))
            .collect();
        r.insert("/list".to_string(), Resource::public(page("List", &format!("<h1>List</h1>\n{list_links}"))));
        root_links.push_str("<li><a href=\"/search?q=apple&amp;page=1\">Search</a></li>\n");
        root_links.push_str("<li><a href=\"/list?sort=name&amp;page=1\">List</a></li>\n");
        root_links.push_str("<li><a href=\"/logout\">Log out</a></li>\n");
        r.insert("/".to_string(), Resource::public(page("Home", &format!("<ul>\n{root_links}</ul>"))));
        insert_auth_pages(&mut r);
        SimSite {
            name: name.to_string(),
            host: host.to_ascii_lowercase(),
            origin: OriginSemantics::exact(),
            cache_profile,
            proxy_decodes_percent: false,
            resources: r,
            auth: default_auth(seed),
            ttl_override: None,
            tiered_retry: false,
            seed,
        }
    }

    pub fn victim(&self) -> &Account {
        &self.auth.accounts[0]
    }

    pub fn attacker(&self) -> &Account {
        &self.auth.accounts[1]
    }

    pub fn account(&self, role: Role) -> Option<&Account> {
        match role {
            Role::Victim => self.auth.accounts.first(),
            Role::Attacker => self.auth.accounts.get(1),
            Role::Unauthenticated => None,
        }
    }

    pub fn victim_markers(&self) -> MarkerSet {
        MarkerSet::new(self.victim().markers.clone()).expect("generated markers are valid")
    }

    pub fn origin_url(&self) -> String {
        format!("http://{}", self.host)
    }

    /// Form login for `role` against this site.
    pub fn login_descriptor(&self, role: Role) -> Option<LoginDescriptor> {
        let acct = self.account(role)?;
        Some(LoginDescriptor::form_post(
            &format!("{}{}", self.origin_url(), self.auth.login_path),
            &[("username", &acct.username), ("password", &acct.password)],
            &self.auth.session_cookie,
        ))
    }

    /// Protected page paths whose template references a marker.
    pub fn protected_marker_paths(&self) -> Vec<String> {
        self.resources
            .iter()
            .filter(|(_, r)| r.protected && r.kind == ResourceKind::Page && r.body.contains("{{m:"))
            .map(|(p, _)| p.clone())
            .collect()
    }
}

fn insert_auth_pages(r: &mut BTreeMap<String, Resource>) {
    r.insert(
        "/login".to_string(),
        Resource {
            kind: ResourceKind::Login,
            ..Resource::public(page(
                "Log in",
                r#"<h1>Log in</h1>
<form method="post" action="/login">
<input type="text" name="username">
<input type="password" name="password">
<button>Log in</button>
</form>"#,
            ))
        },
    );
    r.insert("/logout".to_string(), Resource { kind: ResourceKind::Logout, ..Resource::public("") });
}

fn default_auth(seed: u64) -> AuthConfig {
    AuthConfig {
        login_path: "/login".into(),
        session_cookie: "sid".into(),
        unauthenticated: UnauthBehavior::Redirect,
        accounts: vec![account(seed.wrapping_mul(2).wrapping_add(1), "victim"), account(seed.wrapping_mul(2).wrapping_add(2), "attacker")],
    }
}

/// Values substituted into resource templates.
pub struct RenderContext<'a> {
    pub account: Option<&'a Account>,
    pub csrf: &'a str,
    pub date: &'a str,
    pub path: &'a str,
}

/// Expand `{{m:<label>}}`, `{{api_key}}`, `{{csrf}}`, `{{date}}` and
/// `{{path}}`. `{{path}}` is HTML-escaped.
pub fn render(template: &str, ctx: &RenderContext) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let Some(end) = rest[start..].find("}}") else {
            out.push_str(&rest[start..]);
            return out;
        };
        let key = &rest[start + 2..start + end];
        let value = match key {
            "api_key" => ctx.account.map(|a| a.api_key.clone()).unwrap_or_default(),
            "csrf" => ctx.csrf.to_string(),
            "date" => ctx.date.to_string(),
            "path" => html_escape(ctx.path),
            k => match k.strip_prefix("m:") {
                Some(label) => ctx
                    .account
                    .and_then(|a| a.markers.iter().find(|m| m.label == label))
                    .map(|m| m.value.clone())
                    .unwrap_or_default(),
                None => format!("{{{{{k}}}}}"),
            },
        };
        out.push_str(&value);
        rest = &rest[start + end + 2..];
    }
    out.push_str(rest);
    out
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
