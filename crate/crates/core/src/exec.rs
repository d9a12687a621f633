//! Hooks through which the host environment supplies parallelism and time.
//!
//! The core never spawns threads or reads a clock itself. Algorithms that
//! fan out over contingencies take an [`Executor`]; algorithms with a
//! wall-clock budget take a [`Clock`]. [`Sequential`] and [`NoClock`] are the
//! in-core defaults.

use alloc::vec::Vec;

/// Runs `n` independent jobs and returns their results in index order,
/// regardless of the order in which they complete.
pub trait Executor: Sync {
    fn map_indexed<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(job).collect()
    }
}

/// Monotonic milliseconds since some fixed origin.
pub trait Clock: Sync {
    fn now_ms(&self) -> u64;
}

/// A clock that never advances; budgets measured against it never expire.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> u64 {
        0
    }
}

/// A wall-clock allowance measured from the moment it was started.
#[derive(Clone, Copy)]
pub struct Budget<'c> {
    clock: &'c dyn Clock,
    start_ms: u64,
    limit_ms: Option<u64>,
}

impl<'c> Budget<'c> {
    pub fn start(clock: &'c dyn Clock, limit_ms: Option<u64>) -> Self {
        Self { clock, start_ms: clock.now_ms(), limit_ms }
    }

    pub fn unlimited(clock: &'c dyn Clock) -> Self {
        Self::start(clock, None)
    }

    pub fn elapsed_ms(&self) -> u64 {
        self.clock.now_ms().saturating_sub(self.start_ms)
    }

    /// A zero allowance is expired from the start.
    pub fn expired(&self) -> bool {
        match self.limit_ms {
            None => false,
            Some(0) => true,
            Some(limit) => self.elapsed_ms() >= limit,
        }
    }

    pub fn clock(&self) -> &'c dyn Clock {
        self.clock
    }
}

impl core::fmt::Debug for Budget<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Budget")
            .field("start_ms", &self.start_ms)
            .field("limit_ms", &self.limit_ms)
            .finish()
    }
}
