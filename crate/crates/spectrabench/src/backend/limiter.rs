//! Shared rate limiting: a hard bound on in-flight requests plus an
//! optional requests-per-minute ceiling over a sliding window.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

pub struct RateLimiter {
    max_in_flight: usize,
    requests_per_minute: Option<u32>,
    state: Mutex<LimiterState>,
    cond: Condvar,
}

struct LimiterState {
    in_flight: usize,
    window: VecDeque<Instant>,
}

impl RateLimiter {
    pub fn new(max_in_flight: usize, requests_per_minute: Option<u32>) -> Arc<Self> {
        assert!(max_in_flight > 0, "need at least one in-flight slot");
        Arc::new(Self {
            max_in_flight,
            requests_per_minute,
            state: Mutex::new(LimiterState {
                in_flight: 0,
                window: VecDeque::new(),
            }),
            cond: Condvar::new(),
        })
    }

    /// Blocks until an in-flight slot is free. The permit releases the slot
    /// on drop.
    pub fn acquire(self: &Arc<Self>) -> InFlightPermit {
        let mut state = self.state.lock().unwrap();
        while state.in_flight >= self.max_in_flight {
            state = self.cond.wait(state).unwrap();
        }
        state.in_flight += 1;
        InFlightPermit {
            limiter: Arc::clone(self),
        }
    }

    /// Blocks until the sliding one-minute window has room, then records one
    /// request. Called once per transport attempt.
    pub fn pace(&self) {
        let Some(rpm) = self.requests_per_minute else {
            return;
        };
        let rpm = rpm.max(1) as usize;
        let mut state = self.state.lock().unwrap();
        loop {
            let now = Instant::now();
            while let Some(front) = state.window.front() {
                if now.duration_since(*front) >= Duration::from_secs(60) {
                    state.window.pop_front();
                } else {
                    break;
                }
            }
            if state.window.len() < rpm {
                state.window.push_back(now);
                return;
            }
            let oldest = *state.window.front().expect("window is full");
            let wait = Duration::from_secs(60).saturating_sub(now.duration_since(oldest));
            let (next, _) = self
                .cond
                .wait_timeout(state, wait.max(Duration::from_millis(1)))
                .unwrap();
            state = next;
        }
    }

    #[cfg(test)]
    fn in_flight(&self) -> usize {
        self.state.lock().unwrap().in_flight
    }
}

pub struct InFlightPermit {
    limiter: Arc<RateLimiter>,
}

impl Drop for InFlightPermit {
    fn drop(&mut self) {
        let mut state = self.limiter.state.lock().unwrap();
        state.in_flight -= 1;
        drop(state);
        self.limiter.cond.notify_all();
    }
}
