//! cache-lab: simulated origin servers behind simulated caching proxies.
//!
//! Each [`SimSite`] pairs an origin with URL-interpretation quirks
//! ([`OriginSemantics`]) and a cache running a [`CdnProfile`]. Time is
//! simulated ([`SimClock`]) so TTL behaviour is exact. [`oracle_vulnerable`]
//! replays the victim/attacker sequence directly against a fresh runtime
//! and is the ground truth the scanner is checked against.
//!
//! Sites are reachable in-process through [`LabTransport`] or over real
//! sockets through [`LabServer`].
//!
//! The tiered-retry flag models one possible explanation for cross-region
//! cache hits: a miss in the client's region is answered from another
//! region's entry. It is a model, not a description of any vendor.
//!
//! [`CdnProfile`]: crate::policy::CdnProfile

mod catalog;
mod oracle;
mod origin;
mod proxy;
mod server;
mod site;

pub use catalog::{
    catalog, catalog_scenario, demo_site, demo_spec, semantics_subsets, sitemap_site, sitemap_spec, Layout, Scenario,
    ScenarioError, SiteSpec,
};
pub use oracle::{oracle_query, oracle_row, oracle_vulnerable, OracleQuery};
pub use origin::{route_path, OriginSemantics, OriginVariant};
pub use proxy::{
    advance_clock, origin_resolve, proxy_handle, proxy_view, CacheEntry, CacheEvent, LabRequest, LabResponse,
    OriginResponse, SimClock, SiteRuntime, DEFAULT_REGION, REGION_HEADER, SIM_EPOCH,
};
pub use server::{Lab, LabDelay, LabServer, LabTransport, RequestRecord};
pub use site::{
    render, Account, AuthConfig, RenderContext, Resource, ResourceKind, SimSite, UnauthBehavior, MARKER_LABELS,
};
