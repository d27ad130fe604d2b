//! Monte-Carlo policy evaluation and Hoeffding accuracy bounds.
//!
//! A rollout from layer `t` follows the joint policy from a start node tuple
//! until the horizon, summing undiscounted rewards. `K` trajectories are
//! averaged. Trajectory `k` draws from its own stream derived from a base seed,
//! so estimates are identical with or without the rayon pool and two
//! evaluations that share a base seed use common random numbers.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{check_arity, check_index, Error, Result};
use crate::model::{Belief, Simulator, ValueRange};
use crate::policy::JointPolicy;
use crate::scalar::Real;
use crate::streams::{stream, PARALLEL_MIN_STEPS};

/// Average of `K` sampled returns.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutEstimate<F> {
    pub mean: F,
    pub samples: usize,
    pub per_sample: Option<Vec<F>>,
    /// Simulator steps spent producing the estimate.
    pub steps: u64,
}

impl<F: Real> RolloutEstimate<F> {
    /// Two-sided accuracy of the mean at confidence `1 - delta`.
    pub fn epsilon(&self, delta: f64, range: ValueRange<F>) -> Result<F> {
        hoeffding_epsilon(self.samples, delta, range.width())
    }
}

/// Where each trajectory starts.
#[derive(Debug, Clone, Copy)]
pub enum Start<'a, F> {
    State(usize),
    Belief(&'a Belief<F>),
    /// A fresh `sample_initial` draw per trajectory.
    Initial,
}

/// Reusable per-trajectory buffers.
#[derive(Debug, Clone)]
pub struct Scratch {
    nodes: Vec<usize>,
    next_nodes: Vec<usize>,
    actions: Vec<usize>,
    observations: Vec<usize>,
}

impl Scratch {
    pub fn new(agents: usize) -> Self {
        Self {
            nodes: vec![0; agents],
            next_nodes: vec![0; agents],
            actions: vec![0; agents],
            observations: vec![0; agents],
        }
    }
}

/// Simulates one trajectory from `layer` to the horizon and returns its
/// return together with the number of simulator steps taken (`T - layer`).
pub fn simulate_trajectory<F, S, R>(
    sim: &S,
    policy: &JointPolicy<F>,
    layer: usize,
    mut state: usize,
    nodes: &[usize],
    rng: &mut R,
    scratch: &mut Scratch,
) -> Result<(F, u64)>
where
    F: Real,
    S: Simulator<F>,
    R: Rng + ?Sized,
{
    let horizon = policy.horizon();
    scratch.nodes.copy_from_slice(nodes);
    let mut total = F::zero();
    let mut steps = 0;
    for t in layer..horizon {
        policy.joint_action(t, &scratch.nodes, &mut scratch.actions);
        let tr = sim.step(state, &scratch.actions, rng, &mut scratch.observations)?;
        total += tr.reward;
        steps += 1;
        if t + 1 < horizon {
            policy.sample_next_nodes(
                t,
                &scratch.nodes,
                &scratch.observations,
                rng,
                &mut scratch.next_nodes,
            )?;
            std::mem::swap(&mut scratch.nodes, &mut scratch.next_nodes);
        }
        state = tr.next;
    }
    Ok((total, steps))
}

/// Rollout evaluator bound to a simulator and a sample size.
#[derive(Debug, Clone)]
pub struct Rollouts<'a, S> {
    pub sim: &'a S,
    pub trajectories: usize,
    pub parallel: bool,
    pub keep_samples: bool,
}

impl<'a, S> Rollouts<'a, S> {
    pub fn new(sim: &'a S, trajectories: usize) -> Self {
        Self {
            sim,
            trajectories,
            parallel: false,
            keep_samples: false,
        }
    }

    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn keep_samples(mut self, on: bool) -> Self {
        self.keep_samples = on;
        self
    }

    /// Estimates the value of `policy` from `layer` with every trajectory's
    /// randomness derived from `seed`.
    pub fn estimate<F: Real>(
        &self,
        policy: &JointPolicy<F>,
        layer: usize,
        start: Start<'_, F>,
        nodes: &[usize],
        seed: u64,
    ) -> Result<RolloutEstimate<F>>
    where
        S: Simulator<F>,
    {
        let k = self.trajectories;
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "trajectories",
                reason: "must be at least 1".into(),
            });
        }
        check_index("layer", layer, policy.horizon())?;
        check_arity(nodes.len(), policy.num_agents())?;
        for &n in nodes {
            check_index("node", n, policy.nodes())?;
        }
        let m = policy.num_agents();
        let run = |idx: usize, scratch: &mut Scratch| -> Result<(F, u64)> {
            let mut rng = stream(seed, idx as u64);
            let s = match start {
                Start::State(s) => s,
                Start::Belief(b) => b.sample(&mut rng),
                Start::Initial => self.sim.sample_initial(&mut rng),
            };
            simulate_trajectory(self.sim, policy, layer, s, nodes, &mut rng, scratch)
        };
        let work = k * (policy.horizon() - layer);
        let results: Vec<(F, u64)> = if self.parallel && work >= PARALLEL_MIN_STEPS {
            (0..k)
                .into_par_iter()
                .map_init(|| Scratch::new(m), |scratch, idx| run(idx, scratch))
                .collect::<Result<_>>()?
        } else {
            let mut scratch = Scratch::new(m);
            (0..k)
                .map(|idx| run(idx, &mut scratch))
                .collect::<Result<_>>()?
        };
        let mut sum = F::zero();
        let mut steps = 0;
        for &(v, s) in &results {
            sum += v;
            steps += s;
        }
        Ok(RolloutEstimate {
            mean: sum / F::from_count(k),
            samples: k,
            per_sample: self
                .keep_samples
                .then(|| results.iter().map(|&(v, _)| v).collect()),
            steps,
        })
    }
}

/// Rollout estimate of `V(s, q⃗)` from `layer`.
#[allow(clippy::too_many_arguments)]
pub fn rollout<F, S, R>(
    sim: &S,
    policy: &JointPolicy<F>,
    layer: usize,
    state: usize,
    nodes: &[usize],
    trajectories: usize,
    rng: &mut R,
) -> Result<RolloutEstimate<F>>
where
    F: Real,
    S: Simulator<F>,
    R: Rng + ?Sized,
{
    check_index("state", state, sim.num_states())?;
    Rollouts::new(sim, trajectories)
        .keep_samples(true)
        .estimate(policy, layer, Start::State(state), nodes, rng.gen())
}

/// Rollout estimate of `V(b, q⃗)`; each trajectory draws its own start state.
#[allow(clippy::too_many_arguments)]
pub fn rollout_from_belief<F, S, R>(
    sim: &S,
    policy: &JointPolicy<F>,
    layer: usize,
    belief: &Belief<F>,
    nodes: &[usize],
    trajectories: usize,
    rng: &mut R,
) -> Result<RolloutEstimate<F>>
where
    F: Real,
    S: Simulator<F>,
    R: Rng + ?Sized,
{
    Rollouts::new(sim, trajectories)
        .keep_samples(true)
        .estimate(policy, layer, Start::Belief(belief), nodes, rng.gen())
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must lie in (0, 1), got {delta}"),
        })
    }
}

/// `ε = sqrt(V_Δ² ln(1/δ) / (2K))`.
pub fn hoeffding_epsilon<F: Real>(samples: usize, delta: f64, width: F) -> Result<F> {
    if samples == 0 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "must be at least 1".into(),
        });
    }
    check_delta(delta)?;
    if width < F::zero() || !width.is_finite() {
        return Err(Error::InvalidParameter {
            name: "value range",
            reason: format!("width {width} must be finite and nonnegative"),
        });
    }
    let ln = F::lit((1.0 / delta).ln());
    Ok((width * width * ln / (F::lit(2.0) * F::from_count(samples))).sqrt())
}

/// Smallest `K` with `hoeffding_epsilon(K, δ, V_Δ) <= ε`, i.e.
/// `⌈V_Δ² ln(1/δ) / (2ε²)⌉` (at least 1).
pub fn hoeffding_samples<F: Real>(epsilon: F, delta: f64, width: F) -> Result<usize> {
    if !(epsilon > F::zero()) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be positive, got {epsilon}"),
        });
    }
    check_delta(delta)?;
    if width < F::zero() || !width.is_finite() {
        return Err(Error::InvalidParameter {
            name: "value range",
            reason: format!("width {width} must be finite and nonnegative"),
        });
    }
    let w = width.as_f64();
    let e = epsilon.as_f64();
    let raw = (w * w * (1.0 / delta).ln() / (2.0 * e * e)).ceil();
    if raw > usize::MAX as f64 / 2.0 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: "required sample size overflows".into(),
        });
    }
    let mut k = (raw as usize).max(1);
    // float rounding in the closed form can land one short
    while hoeffding_epsilon(k, delta, width)? > epsilon {
        k += 1;
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn epsilon_reference_value() {
        let e: f64 = hoeffding_epsilon(20, 0.05, 1.0).unwrap();
        let expected = (20f64.ln() / 40.0).sqrt();
        assert!((e - expected).abs() < 1e-15);
        assert!((e - 0.27365).abs() < 1e-4);
    }

    #[test]
    fn quadrupling_samples_halves_epsilon() {
        let a: f64 = hoeffding_epsilon(100, 0.1, 3.0).unwrap();
        let b: f64 = hoeffding_epsilon(400, 0.1, 3.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_width_means_zero_epsilon() {
        assert_eq!(hoeffding_epsilon(10, 0.5, 0.0f64).unwrap(), 0.0);
    }

    #[test]
    fn sample_size_reference_value() {
        assert_eq!(hoeffding_samples(0.1f64, 0.05, 1.0).unwrap(), 150);
    }

    #[test]
    fn domain_errors() {
        assert!(hoeffding_epsilon(0, 0.05, 1.0f64).is_err());
        assert!(hoeffding_epsilon(10, 0.0, 1.0f64).is_err());
        assert!(hoeffding_epsilon(10, 1.0, 1.0f64).is_err());
        assert!(hoeffding_epsilon(10, 0.5, -1.0f64).is_err());
        assert!(hoeffding_samples(0.0f64, 0.05, 1.0).is_err());
        assert!(hoeffding_samples(0.1f64, 1.5, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn sample_size_inverts_epsilon(eps in 0.01f64..2.0, delta in 0.001f64..0.999, width in 0.0f64..20.0) {
            let k = hoeffding_samples(eps, delta, width).unwrap();
            prop_assert!(hoeffding_epsilon(k, delta, width).unwrap() <= eps);
            if k > 1 {
                prop_assert!(hoeffding_epsilon(k - 1, delta, width).unwrap() > eps);
            }
        }

        #[test]
        fn halving_epsilon_quadruples_samples(eps in 0.05f64..1.0, delta in 0.01f64..0.5, width in 1.0f64..10.0) {
            let k1 = hoeffding_samples(eps, delta, width).unwrap() as f64;
            let k2 = hoeffding_samples(eps / 2.0, delta, width).unwrap() as f64;
            prop_assert!(k2 >= 4.0 * (k1 - 1.0) && k2 <= 4.0 * k1);
        }
    }
}
