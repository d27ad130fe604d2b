use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::error::Result;
use crate::model::{Simulator, Transition, ValueRange};
use crate::scalar::Real;

#[derive(Debug, Default)]
struct Counters {
    steps: AtomicU64,
    nanos: AtomicU64,
}

/// Simulator wrapper that counts steps and accumulates time spent inside
/// `step`. Clones share the same counters.
#[derive(Debug, Clone)]
pub struct Instrumented<S> {
    inner: S,
    counters: Arc<Counters>,
    timed: bool,
}

impl<S> Instrumented<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            counters: Arc::default(),
            timed: true,
        }
    }

    /// Counts steps without reading the clock.
    pub fn counting_only(inner: S) -> Self {
        Self {
            timed: false,
            ..Self::new(inner)
        }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn steps(&self) -> u64 {
        self.counters.steps.load(Ordering::Relaxed)
    }

    pub fn step_time(&self) -> Duration {
        Duration::from_nanos(self.counters.nanos.load(Ordering::Relaxed))
    }

    pub fn reset(&self) {
        self.counters.steps.store(0, Ordering::Relaxed);
        self.counters.nanos.store(0, Ordering::Relaxed);
    }
}

impl<F: Real, S: Simulator<F>> Simulator<F> for Instrumented<S> {
    fn num_agents(&self) -> usize {
        self.inner.num_agents()
    }

    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    fn num_actions(&self, agent: usize) -> usize {
        self.inner.num_actions(agent)
    }

    fn num_observations(&self, agent: usize) -> usize {
        self.inner.num_observations(agent)
    }

    fn value_range(&self, horizon: usize) -> ValueRange<F> {
        self.inner.value_range(horizon)
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.inner.sample_initial(rng)
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: usize,
        actions: &[usize],
        rng: &mut R,
        observations: &mut [usize],
    ) -> Result<Transition<F>> {
        self.counters.steps.fetch_add(1, Ordering::Relaxed);
        if self.timed {
            let start = Instant::now();
            let out = self.inner.step(state, actions, rng, observations);
            self.counters
                .nanos
                .fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
            out
        } else {
            self.inner.step(state, actions, rng, observations)
        }
    }
}
