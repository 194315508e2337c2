//! Monotonic millisecond clocks.
//!
//! The hub itself never reads a clock (callers pass `now`), but the rephrase
//! engine sleeps between retries and measures provider latency. Simulations
//! use [`ManualClock`] so that retries and timeouts cost virtual time only.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Milliseconds on a monotonic timeline.
pub type Millis = u64;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> Millis;
    fn sleep_ms(&self, ms: Millis);
}

/// Wall-clock implementation anchored at construction time.
#[derive(Debug, Clone)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> Millis {
        self.origin.elapsed().as_millis() as Millis
    }

    fn sleep_ms(&self, ms: Millis) {
        std::thread::sleep(Duration::from_millis(ms));
    }
}

/// Virtual clock: `sleep_ms` advances time instantly. Clones share the same
/// timeline.
#[derive(Debug, Clone, Default)]
pub struct ManualClock {
    now: Arc<AtomicU64>,
}

impl ManualClock {
    pub fn starting_at(now: Millis) -> Self {
        Self {
            now: Arc::new(AtomicU64::new(now)),
        }
    }

    pub fn advance(&self, ms: Millis) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }

    /// Moves time forward to `at`; never moves backwards.
    pub fn advance_to(&self, at: Millis) {
        self.now.fetch_max(at, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> Millis {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep_ms(&self, ms: Millis) {
        self.advance(ms);
    }
}
