//! HTTP cache header parsing and cacheability decisions under configurable
//! CDN rules engines.
//!
//! Profiles for Akamai, Cloudflare, CloudFront and Fastly reproduce their
//! default behaviour. For Akamai only the static-extension list decides
//! cacheability; objects outside the list are never stored, even when they
//! carry explicit caching headers. That last point is an assumption: the
//! vendor default is only documented for static extensions.

mod directives;
mod profile;

pub use directives::{parse_cache_control, CacheControlDirectives, ResponseCacheHeaders};
pub use profile::{
    builtin_profiles, decide, load_profiles, parse_profiles, path_extension, CacheDecision, CacheRule, CdnProfile,
    DecisionReason, DefaultCached, HonoredHeaders, PolicyError, ProfileSpec, RuleMatch, RuleSpec,
    DEFAULT_STATIC_EXTENSIONS, DEFAULT_TTL_SECS,
};
