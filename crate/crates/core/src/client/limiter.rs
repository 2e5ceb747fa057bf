use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Time source for the limiter. Tests substitute [`ManualClock`].
pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary origin.
    fn now(&self) -> Duration;
    fn sleep_until(&self, deadline: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep_until(&self, deadline: Duration) {
        let now = self.now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        }
    }
}

/// A clock that only moves when slept on or advanced explicitly.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
}

impl ManualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().unwrap() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep_until(&self, deadline: Duration) {
        let mut now = self.now.lock().unwrap();
        if deadline > *now {
            *now = deadline;
        }
    }
}

/// Per-host request pacing shared by all workers.
///
/// For a rate `r >= 1` at most `floor(r)` requests start in any window of one
/// second; for `r < 1` one request per `1/r` seconds. Each grant reserves a
/// slot in order of arrival, so concurrent callers queue fairly. A small
/// guard is added to each window to absorb scheduling jitter between the
/// grant and the request actually reaching the server.
pub struct RateLimiter {
    permits: usize,
    window: Duration,
    clock: Arc<dyn Clock>,
    slots: Mutex<HashMap<String, VecDeque<Duration>>>,
}

pub const DEFAULT_RATE: f64 = 2.0;
const GUARD: Duration = Duration::from_millis(40);

impl RateLimiter {
    pub fn new(rate: f64) -> Self {
        Self::with_clock(rate, Arc::new(SystemClock::new()), GUARD)
    }

    /// `rate` in requests per second per host; non-positive or non-finite
    /// rates disable pacing.
    pub fn with_clock(rate: f64, clock: Arc<dyn Clock>, guard: Duration) -> Self {
        let (permits, window) = if !rate.is_finite() || rate <= 0.0 {
            (usize::MAX, Duration::ZERO)
        } else if rate >= 1.0 {
            (rate.floor() as usize, Duration::from_secs(1) + guard)
        } else {
            (1, Duration::from_secs_f64(1.0 / rate) + guard)
        };
        RateLimiter { permits, window, clock, slots: Mutex::new(HashMap::new()) }
    }

    pub fn unlimited() -> Self {
        Self::with_clock(0.0, Arc::new(SystemClock::new()), Duration::ZERO)
    }

    pub fn is_unlimited(&self) -> bool {
        self.permits == usize::MAX
    }

    /// Reserve the next slot for `host` without waiting. Returns the time at
    /// which the request may start.
    pub fn reserve(&self, host: &str) -> Duration {
        let now = self.clock.now();
        if self.is_unlimited() {
            return now;
        }
        let mut slots = self.slots.lock().unwrap();
        let q = slots.entry(host.to_ascii_lowercase()).or_default();
        while q.front().is_some_and(|t| *t + self.window <= now) {
            q.pop_front();
        }
        let at = if q.len() >= self.permits { (q[q.len() - self.permits] + self.window).max(now) } else { now };
        q.push_back(at);
        at
    }

    /// Block until a request to `host` may start.
    pub fn acquire(&self, host: &str) {
        let at = self.reserve(host);
        self.clock.sleep_until(at);
    }
}

impl std::fmt::Debug for RateLimiter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RateLimiter").field("permits", &self.permits).field("window", &self.window).finish()
    }
}
