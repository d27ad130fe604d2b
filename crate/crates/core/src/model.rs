//! DEC-POMDP data model: joint index spaces, the generative simulator
//! contract, explicit tabular models, beliefs and particle sets.
//!
//! States, actions, observations and policy nodes are dense integer indices.
//! Joint actions and joint observations are encoded in mixed radix with
//! agent 0 as the most significant digit, so `(a0, a1)` with two actions
//! each maps to `2 * a0 + a1`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::error::{check_index, Error, Result};
use crate::scalar::{unit, Real};

/// Beliefs over at most this many states keep a dense probability vector.
pub const DENSE_STATE_LIMIT: usize = 10_000;

/// Cartesian product of per-agent index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSpace {
    sizes: Vec<usize>,
    total: usize,
}

impl JointSpace {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidModel("joint space with no agents".into()));
        }
        let mut total: usize = 1;
        for (i, &n) in sizes.iter().enumerate() {
            if n == 0 {
                return Err(Error::InvalidModel(format!(
                    "agent {i} has an empty index set"
                )));
            }
            total = total
                .checked_mul(n)
                .ok_or_else(|| Error::InvalidModel("joint space size overflows usize".into()))?;
        }
        Ok(Self { sizes, total })
    }

    pub fn agents(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, agent: usize) -> usize {
        self.sizes[agent]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn encode(&self, parts: &[usize]) -> Result<usize> {
        if parts.len() != self.sizes.len() {
            return Err(Error::OutOfRange {
                what: "joint tuple length",
                index: parts.len(),
                size: self.sizes.len(),
            });
        }
        let mut idx = 0;
        for (&p, &n) in parts.iter().zip(&self.sizes) {
            check_index("agent component", p, n)?;
            idx = idx * n + p;
        }
        Ok(idx)
    }

    pub fn decode(&self, mut idx: usize, out: &mut [usize]) {
        for (slot, &n) in out.iter_mut().zip(&self.sizes).rev() {
            *slot = idx % n;
            idx /= n;
        }
    }

    pub fn decode_vec(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        self.decode(idx, &mut out);
        out
    }
}

/// Bounds on the total reward of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRange<F> {
    pub min: F,
    pub max: F,
}

impl<F: Real> ValueRange<F> {
    pub fn new(min: F, max: F) -> Self {
        Self { min, max }
    }

    /// `V_max - V_min`.
    pub fn width(&self) -> F {
        self.max - self.min
    }

    /// Episode bounds from per-step reward bounds. Zero is always included so
    /// that shorter suffixes of an episode stay inside the range.
    pub fn from_step_bounds(step_min: F, step_max: F, horizon: usize) -> Self {
        let t = F::from_count(horizon);
        Self {
            min: step_min.min(F::zero()) * t,
            max: step_max.max(F::zero()) * t,
        }
    }

    pub fn contains(&self, v: F) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Outcome of one simulator step. The joint observation is written into the
/// caller's buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<F> {
    pub next: usize,
    pub reward: F,
}

/// Black-box access to a domain: reset and step.
///
/// `step` must be a pure function of its arguments and the random draws it
/// makes, so replaying the same random stream reproduces a trajectory.
pub trait Simulator<F: Real>: Clone + Send + Sync {
    fn num_agents(&self) -> usize;
    fn num_states(&self) -> usize;
    fn num_actions(&self, agent: usize) -> usize;
    fn num_observations(&self, agent: usize) -> usize;

    /// Bounds on the return of any `horizon`-step episode.
    fn value_range(&self, horizon: usize) -> ValueRange<F>;

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize;

    fn step<R: Rng + ?Sized>(
        &self,
        state: usize,
        actions: &[usize],
        rng: &mut R,
        observations: &mut [usize],
    ) -> Result<Transition<F>>;

    fn action_counts(&self) -> Vec<usize> {
        (0..self.num_agents())
            .map(|i| self.num_actions(i))
            .collect()
    }

    fn observation_counts(&self) -> Vec<usize> {
        (0..self.num_agents())
            .map(|i| self.num_observations(i))
            .collect()
    }
}

/// A probability distribution over state indices.
///
/// The support is stored sorted with a cumulative table for sampling; a dense
/// copy is kept as well when the state space is at most
/// [`DENSE_STATE_LIMIT`].
#[derive(Debug, Clone, PartialEq)]
pub struct Belief<F> {
    num_states: usize,
    support: Vec<usize>,
    probs: Vec<F>,
    cdf: Vec<F>,
    dense: Option<Vec<F>>,
}

impl<F: Real> Belief<F> {
    /// Builds a belief from `(state, probability)` pairs. Duplicate states are
    /// merged and zero entries dropped.
    pub fn from_sparse<I>(num_states: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, F)>,
    {
        let mut merged: BTreeMap<usize, F> = BTreeMap::new();
        for (s, p) in entries {
            check_index("state", s, num_states)?;
            if !p.is_finite() || p < F::zero() {
                return Err(Error::InvalidDistribution {
                    context: "belief".into(),
                    reason: format!("entry {p} for state {s}"),
                });
            }
            *merged.entry(s).or_insert_with(F::zero) += p;
        }
        let (support, probs): (Vec<_>, Vec<_>) =
            merged.into_iter().filter(|&(_, p)| p > F::zero()).unzip();
        Self::assemble(num_states, support, probs)
    }

    pub fn from_dense(probs: Vec<F>) -> Result<Self> {
        let n = probs.len();
        Self::from_sparse(n, probs.into_iter().enumerate())
    }

    pub fn point(num_states: usize, state: usize) -> Result<Self> {
        Self::from_sparse(num_states, [(state, F::one())])
    }

    pub fn uniform(num_states: usize) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::InvalidDistribution {
                context: "belief".into(),
                reason: "empty state space".into(),
            });
        }
        let p = F::one() / F::from_count(num_states);
        Self::from_sparse(num_states, (0..num_states).map(|s| (s, p)))
    }

    fn assemble(num_states: usize, support: Vec<usize>, probs: Vec<F>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution {
                context: "belief".into(),
                reason: "no positive mass".into(),
            });
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = F::zero();
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        if (acc - F::one()).abs().as_f64() > F::SIMPLEX_TOL {
            return Err(Error::InvalidDistribution {
                context: "belief".into(),
                reason: format!("sums to {acc}"),
            });
        }
        let dense = (num_states <= DENSE_STATE_LIMIT).then(|| {
            let mut d = vec![F::zero(); num_states];
            for (&s, &p) in support.iter().zip(&probs) {
                d[s] = p;
            }
            d
        });
        Ok(Self {
            num_states,
            support,
            probs,
            cdf,
            dense,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn prob(&self, state: usize) -> F {
        match &self.dense {
            Some(d) => d.get(state).copied().unwrap_or_else(F::zero),
            None => self
                .support
                .binary_search(&state)
                .map(|i| self.probs[i])
                .unwrap_or_else(|_| F::zero()),
        }
    }

    /// Positive-probability states in increasing index order.
    pub fn support(&self) -> impl Iterator<Item = (usize, F)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<F> {
        let mut d = vec![F::zero(); self.num_states];
        for (s, p) in self.support() {
            d[s] = p;
        }
        d
    }

    /// Draws a state; zero-probability states are never returned.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = unit::<F, R>(rng) * *self.cdf.last().expect("nonempty support");
        let i = self.cdf.partition_point(|&c| c <= u);
        self.support[i.min(self.support.len() - 1)]
    }

    /// Returns the probability mass that sums to one within tolerance. Always
    /// true for a constructed belief; kept for property tests.
    pub fn total_mass(&self) -> F {
        self.probs.iter().copied().sum()
    }
}

/// `K` sampled states with multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticleSet {
    num_states: usize,
    particles: Vec<usize>,
}

impl ParticleSet {
    pub fn new(num_states: usize, particles: Vec<usize>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::NoParticles);
        }
        for &s in &particles {
            check_index("particle state", s, num_states)?;
        }
        Ok(Self {
            num_states,
            particles,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[usize] {
        &self.particles
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }
}

/// Empirical distribution of a particle set: `b(s) = count(s) / K`.
pub fn belief_from_particles<F: Real>(particles: &ParticleSet) -> Result<Belief<F>> {
    if particles.is_empty() {
        return Err(Error::NoParticles);
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &s in particles.particles() {
        *counts.entry(s).or_default() += 1;
    }
    let k = F::from_count(particles.len());
    Belief::from_sparse(
        particles.num_states(),
        counts.into_iter().map(|(s, c)| (s, F::from_count(c) / k)),
    )
}

pub fn sample_state<F: Real, R: Rng + ?Sized>(belief: &Belief<F>, rng: &mut R) -> usize {
    belief.sample(rng)
}

/// One joint outcome `(s', ō)` of a step together with `P(s'|s,ā) O(ō|s',ā)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome<F> {
    pub next: usize,
    pub obs: usize,
    pub prob: F,
}

/// Full tabular DEC-POMDP.
///
/// Tables are dense: transition indexed `[s][ā][s']`, observation
/// `[ā][s'][ō]`, reward `[s][ā]`. The nonzero `(s', ō)` outcomes of every
/// `(s, ā)` are cached at construction for the exact evaluators.
#[derive(Debug, Clone)]
pub struct ExplicitModel<F> {
    num_states: usize,
    actions: JointSpace,
    observations: JointSpace,
    transition: Vec<F>,
    observation: Vec<F>,
    reward: Vec<F>,
    initial: Belief<F>,
    horizon: usize,
    outcomes: Vec<Vec<Outcome<F>>>,
}

/// Largest number of dense table cells an explicit model may allocate.
pub const EXPLICIT_TABLE_BUDGET: u128 = 50_000_000;

impl<F: Real> ExplicitModel<F> {
    /// Builds a model from per-row generators. `transition(s, ā)` and
    /// `observation(ā, s')` return sparse distributions; `ā` is passed both
    /// as its joint index and decoded per agent.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fns<T, O, R>(
        num_states: usize,
        action_counts: Vec<usize>,
        observation_counts: Vec<usize>,
        initial: Belief<F>,
        horizon: usize,
        mut transition: T,
        mut observation: O,
        mut reward: R,
    ) -> Result<Self>
    where
        T: FnMut(usize, &[usize]) -> Vec<(usize, F)>,
        O: FnMut(&[usize], usize) -> Vec<(Vec<usize>, F)>,
        R: FnMut(usize, &[usize]) -> F,
    {
        let actions = JointSpace::new(action_counts)?;
        let observations = JointSpace::new(observation_counts)?;
        let na = actions.total();
        let no = observations.total();
        let cells = (num_states as u128) * (na as u128) * (num_states.max(no) as u128);
        if cells > EXPLICIT_TABLE_BUDGET {
            return Err(Error::BudgetExceeded {
                needed: cells,
                budget: EXPLICIT_TABLE_BUDGET,
            });
        }
        let mut p = vec![F::zero(); num_states * na * num_states];
        let mut o = vec![F::zero(); na * num_states * no];
        let mut r = vec![F::zero(); num_states * na];
        let mut parts = vec![0; actions.agents()];
        for ja in 0..na {
            actions.decode(ja, &mut parts);
            for s in 0..num_states {
                for (s2, pr) in transition(s, &parts) {
                    check_index("next state", s2, num_states)?;
                    p[(s * na + ja) * num_states + s2] += pr;
                }
                r[s * na + ja] = reward(s, &parts);
            }
            for s2 in 0..num_states {
                for (obs, pr) in observation(&parts, s2) {
                    let jo = observations.encode(&obs)?;
                    o[(ja * num_states + s2) * no + jo] += pr;
                }
            }
        }
        Self::from_tables(actions, observations, p, o, r, initial, horizon)
    }

    pub fn from_tables(
        actions: JointSpace,
        observations: JointSpace,
        transition: Vec<F>,
        observation: Vec<F>,
        reward: Vec<F>,
        initial: Belief<F>,
        horizon: usize,
    ) -> Result<Self> {
        let ns = initial.num_states();
        let na = actions.total();
        let no = observations.total();
        if actions.agents() != observations.agents() {
            return Err(Error::InvalidModel(
                "action and observation agent counts differ".into(),
            ));
        }
        if horizon == 0 {
            return Err(Error::InvalidModel("horizon must be at least 1".into()));
        }
        if transition.len() != ns * na * ns
            || observation.len() != na * ns * no
            || reward.len() != ns * na
        {
            return Err(Error::InvalidModel("table dimensions do not match".into()));
        }
        let tol = F::SIMPLEX_TOL;
        let check_row = |row: &[F], context: String| -> Result<()> {
            let mut sum = F::zero();
            for &x in row {
                if !x.is_finite() || x < F::zero() || x > F::one() + F::lit(tol) {
                    return Err(Error::InvalidDistribution {
                        context,
                        reason: format!("entry {x} outside [0, 1]"),
                    });
                }
                sum += x;
            }
            if (sum - F::one()).abs().as_f64() > tol {
                return Err(Error::InvalidDistribution {
                    context,
                    reason: format!("sums to {sum}"),
                });
            }
            Ok(())
        };
        for s in 0..ns {
            for ja in 0..na {
                let base = (s * na + ja) * ns;
                check_row(&transition[base..base + ns], format!("P(.|s={s}, a={ja})"))?;
            }
        }
        for ja in 0..na {
            for s2 in 0..ns {
                let base = (ja * ns + s2) * no;
                check_row(
                    &observation[base..base + no],
                    format!("O(.|s'={s2}, a={ja})"),
                )?;
            }
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidModel("non-finite reward".into()));
        }

        let mut outcomes = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for ja in 0..na {
                let mut list = Vec::new();
                for s2 in 0..ns {
                    let pt = transition[(s * na + ja) * ns + s2];
                    if pt <= F::zero() {
                        continue;
                    }
                    let obase = (ja * ns + s2) * no;
                    for jo in 0..no {
                        let po = observation[obase + jo];
                        if po > F::zero() {
                            list.push(Outcome {
                                next: s2,
                                obs: jo,
                                prob: pt * po,
                            });
                        }
                    }
                }
                outcomes.push(list);
            }
        }

        Ok(Self {
            num_states: ns,
            actions,
            observations,
            transition,
            observation,
            reward,
            initial,
            horizon,
            outcomes,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.actions.agents()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn actions(&self) -> &JointSpace {
        &self.actions
    }

    pub fn observations(&self) -> &JointSpace {
        &self.observations
    }

    pub fn initial_belief(&self) -> &Belief<F> {
        &self.initial
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Same model with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        let mut m = self.clone();
        m.horizon = horizon.max(1);
        m
    }

    pub fn transition_prob(&self, s: usize, joint_action: usize, next: usize) -> F {
        let na = self.actions.total();
        self.transition[(s * na + joint_action) * self.num_states + next]
    }

    pub fn observation_prob(&self, joint_action: usize, next: usize, joint_obs: usize) -> F {
        let no = self.observations.total();
        self.observation[(joint_action * self.num_states + next) * no + joint_obs]
    }

    pub fn reward(&self, s: usize, joint_action: usize) -> F {
        self.reward[s * self.actions.total() + joint_action]
    }

    /// Nonzero `(s', ō)` outcomes of `(s, ā)`.
    pub fn outcomes(&self, s: usize, joint_action: usize) -> &[Outcome<F>] {
        &self.outcomes[s * self.actions.total() + joint_action]
    }

    /// Smallest and largest single-step reward in the table.
    pub fn reward_bounds(&self) -> (F, F) {
        self.reward
            .iter()
            .fold((F::infinity(), F::neg_infinity()), |(lo, hi), &r| {
                (lo.min(r), hi.max(r))
            })
    }
}

/// Exact distribution of `(s', ō)` after acting `ā` in belief `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStepDistribution<F> {
    num_states: usize,
    /// Sorted by `(next, obs)`.
    pub entries: Vec<Outcome<F>>,
}

impl<F: Real> JointStepDistribution<F> {
    pub fn prob(&self, next: usize, obs: usize) -> F {
        self.entries
            .binary_search_by(|e| (e.next, e.obs).cmp(&(next, obs)))
            .map(|i| self.entries[i].prob)
            .unwrap_or_else(|_| F::zero())
    }

    pub fn total(&self) -> F {
        self.entries.iter().map(|e| e.prob).sum()
    }

    /// Marginal over next states.
    pub fn next_state_marginal(&self) -> Vec<F> {
        let mut m = vec![F::zero(); self.num_states];
        for e in &self.entries {
            m[e.next] += e.prob;
        }
        m
    }
}

/// `Pr(s', ō | b, ā) = Σ_s b(s) P(s'|s,ā) O(ō|s',ā)`.
pub fn exact_joint_step_distribution<F: Real>(
    model: &ExplicitModel<F>,
    belief: &Belief<F>,
    actions: &[usize],
) -> Result<JointStepDistribution<F>> {
    let ja = model.actions().encode(actions)?;
    let mut acc: BTreeMap<(usize, usize), F> = BTreeMap::new();
    for (s, bs) in belief.support() {
        check_index("belief state", s, model.num_states())?;
        for o in model.outcomes(s, ja) {
            *acc.entry((o.next, o.obs)).or_insert_with(F::zero) += bs * o.prob;
        }
    }
    Ok(JointStepDistribution {
        num_states: model.num_states(),
        entries: acc
            .into_iter()
            .map(|((next, obs), prob)| Outcome { next, obs, prob })
            .collect(),
    })
}

/// `R(b, ā) = Σ_s b(s) R(s, ā)`.
pub fn expected_reward<F: Real>(
    model: &ExplicitModel<F>,
    belief: &Belief<F>,
    actions: &[usize],
) -> Result<F> {
    let ja = model.actions().encode(actions)?;
    let mut total = F::zero();
    for (s, p) in belief.support() {
        check_index("belief state", s, model.num_states())?;
        total += p * model.reward(s, ja);
    }
    Ok(total)
}

/// Generative simulator that samples directly from an explicit model's tables.
#[derive(Debug, Clone)]
pub struct TableSimulator<F> {
    model: Arc<ExplicitModel<F>>,
}

impl<F: Real> TableSimulator<F> {
    pub fn new(model: Arc<ExplicitModel<F>>) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &Arc<ExplicitModel<F>> {
        &self.model
    }
}

impl<F: Real> Simulator<F> for TableSimulator<F> {
    fn num_agents(&self) -> usize {
        self.model.num_agents()
    }

    fn num_states(&self) -> usize {
        self.model.num_states()
    }

    fn num_actions(&self, agent: usize) -> usize {
        self.model.actions().size(agent)
    }

    fn num_observations(&self, agent: usize) -> usize {
        self.model.observations().size(agent)
    }

    fn value_range(&self, horizon: usize) -> ValueRange<F> {
        let (lo, hi) = self.model.reward_bounds();
        ValueRange::from_step_bounds(lo, hi, horizon)
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.model.initial_belief().sample(rng)
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: usize,
        actions: &[usize],
        rng: &mut R,
        observations: &mut [usize],
    ) -> Result<Transition<F>> {
        check_index("state", state, self.model.num_states())?;
        let ja = self.model.actions().encode(actions)?;
        let outcomes = self.model.outcomes(state, ja);
        let u = unit::<F, R>(rng);
        let mut acc = F::zero();
        let mut pick = outcomes[outcomes.len() - 1];
        for o in outcomes {
            acc += o.prob;
            if u < acc {
                pick = *o;
                break;
            }
        }
        self.model.observations().decode(pick.obs, observations);
        Ok(Transition {
            next: pick.next,
            reward: self.model.reward(state, ja),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn particles(states: &[usize], n: usize) -> ParticleSet {
        ParticleSet::new(n, states.to_vec()).unwrap()
    }

    #[test]
    fn joint_space_round_trip() {
        let js = JointSpace::new(vec![2, 3, 4]).unwrap();
        assert_eq!(js.total(), 24);
        for idx in 0..24 {
            let parts = js.decode_vec(idx);
            assert_eq!(js.encode(&parts).unwrap(), idx);
        }
        assert_eq!(js.encode(&[1, 0, 0]).unwrap(), 12);
        assert!(js.encode(&[0, 3, 0]).is_err());
    }

    #[test]
    fn belief_from_counts() {
        let b: Belief<f64> = belief_from_particles(&particles(&[0, 0, 1], 4)).unwrap();
        assert_eq!(b.prob(0), 2.0 / 3.0);
        assert_eq!(b.prob(1), 1.0 / 3.0);
        assert_eq!(b.prob(2), 0.0);

        let b: Belief<f64> = belief_from_particles(&particles(&[3], 4)).unwrap();
        assert_eq!(b.prob(3), 1.0);

        let b: Belief<f64> = belief_from_particles(&particles(&[1; 20], 4)).unwrap();
        assert_eq!(b.prob(1), 1.0);
        assert_eq!(b.support().count(), 1);
    }

    #[test]
    fn empty_particle_set_is_rejected() {
        assert_eq!(ParticleSet::new(3, vec![]), Err(Error::NoParticles));
    }

    #[test]
    fn point_mass_sampling() {
        let b = Belief::<f64>::point(5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| b.sample(&mut rng) == 2));
    }

    #[test]
    fn uniform_sampling_frequency() {
        let b = Belief::<f64>::from_dense(vec![0.5, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let zeros = (0..n).filter(|_| b.sample(&mut rng) == 0).count();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn zero_mass_state_never_sampled() {
        let b = Belief::<f64>::from_dense(vec![0.0, 0.3, 0.7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!((0..50_000).all(|_| b.sample(&mut rng) != 0));
    }

    #[test]
    fn invalid_beliefs_rejected() {
        assert!(Belief::<f64>::from_dense(vec![0.5, 0.4]).is_err());
        assert!(Belief::<f64>::from_dense(vec![1.5, -0.5]).is_err());
        assert!(Belief::<f64>::from_dense(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn large_beliefs_are_sparse() {
        let b = Belief::<f64>::point(DENSE_STATE_LIMIT + 1, 7).unwrap();
        assert!(!b.is_dense());
        assert_eq!(b.prob(7), 1.0);
        assert_eq!(b.prob(8), 0.0);
        let b = Belief::<f64>::point(DENSE_STATE_LIMIT, 7).unwrap();
        assert!(b.is_dense());
    }

    #[test]
    fn works_in_single_precision() {
        let b: Belief<f32> = belief_from_particles(&particles(&[0, 1, 1], 2)).unwrap();
        assert!((b.prob(1) - 2.0 / 3.0).abs() < 1e-6);
    }
}
