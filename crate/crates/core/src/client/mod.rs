//! HTTP identities and the request engine every scan stage goes through.
//!
//! Requests pass through a [`RateLimiter`] shared by all workers (two per
//! second per host by default). `robots.txt` is not consulted unless a site
//! config opts in.

mod cookies;
mod engine;
mod identity;
mod limiter;
mod logout;
mod transport;

pub use cookies::{unix_now, Cookie, CookieJar};
pub use engine::{EngineError, HttpEngine, HttpExchange, RedirectHop, DEFAULT_MAX_REDIRECTS, DEFAULT_MAX_RETRIES};
pub use identity::{Identity, LoginDescriptor, LoginMethod, LoginStep, Role, SuccessPredicate, DEFAULT_USER_AGENT};
pub use limiter::{Clock, ManualClock, RateLimiter, SystemClock, DEFAULT_RATE};
pub use logout::{is_logout_link, LogoutBlacklist, DEFAULT_LOGOUT_PATTERNS};
pub use transport::{HostOverrides, HttpRequest, HttpResponse, Transport, TransportError, UreqTransport};
