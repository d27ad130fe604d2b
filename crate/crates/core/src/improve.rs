//! Policy improvement: Φ estimation, the per-observation selection LP and the
//! backward alternating-maximization loop.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{check_arity, check_index, Error, Result};
use crate::exact::{exact_phi, exact_policy_value};
use crate::model::{Belief, ExplicitModel, Simulator};
use crate::policy::{random_policy, JointPolicy, PolicyNode};
use crate::rollout::{simulate_trajectory, Rollouts, Scratch, Start};
use crate::sampling::{sample_beliefs, BeliefTable, Portfolio};
use crate::scalar::{sample_index, unit, Real};
use crate::streams::{stream, PARALLEL_MIN_STEPS};

/// `Φ_i(o_i, q'_i)` with a flag per observation row telling whether the row
/// was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMatrix<F> {
    rows: usize,
    cols: usize,
    entries: Vec<F>,
    reached: Vec<bool>,
}

impl<F: Real> PhiMatrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![F::zero(); rows * cols],
            reached: vec![false; rows],
        }
    }

    /// Fully reached matrix from row vectors.
    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Malformed(
                "Φ rows must be nonempty and of equal length".into(),
            ));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("Φ entries must be finite".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            entries: rows.concat(),
            reached: vec![true; rows.len()],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, obs: usize, node: usize) -> F {
        self.entries[obs * self.cols + node]
    }

    pub fn set(&mut self, obs: usize, node: usize, value: F) {
        self.entries[obs * self.cols + node] = value;
    }

    pub fn add(&mut self, obs: usize, node: usize, value: F) {
        self.entries[obs * self.cols + node] += value;
    }

    pub fn row(&self, obs: usize) -> &[F] {
        &self.entries[obs * self.cols..(obs + 1) * self.cols]
    }

    pub fn mark_reached(&mut self, obs: usize) {
        self.reached[obs] = true;
    }

    pub fn is_reached(&self, obs: usize) -> bool {
        self.reached[obs]
    }

    /// Multiplies one row by `factor`.
    pub fn scale_row(&mut self, obs: usize, factor: F) {
        for v in &mut self.entries[obs * self.cols..(obs + 1) * self.cols] {
            *v *= factor;
        }
    }
}

/// Empirical one-step outcome distribution `ω_{o_i}(s', ō)` per own observation.
#[derive(Debug, Clone)]
pub struct OneStepSample<F> {
    /// Per own observation: `(next state, joint observation, weight)`.
    rows: Vec<Vec<(usize, Vec<usize>, F)>>,
    cdfs: Vec<Vec<F>>,
}

impl<F: Real> OneStepSample<F> {
    fn from_counts(counts: Vec<BTreeMap<(usize, Vec<usize>), usize>>) -> Self {
        let mut rows = Vec::with_capacity(counts.len());
        let mut cdfs = Vec::with_capacity(counts.len());
        for row in counts {
            let total: usize = row.values().sum();
            let entries: Vec<(usize, Vec<usize>, F)> = row
                .into_iter()
                .map(|((s, o), c)| (s, o, F::from_count(c) / F::from_count(total)))
                .collect();
            let mut acc = F::zero();
            let cdf = entries
                .iter()
                .map(|e| {
                    acc += e.2;
                    acc
                })
                .collect();
            rows.push(entries);
            cdfs.push(cdf);
        }
        Self { rows, cdfs }
    }

    pub fn row(&self, obs: usize) -> &[(usize, Vec<usize>, F)] {
        &self.rows[obs]
    }

    pub fn is_reached(&self, obs: usize) -> bool {
        !self.rows[obs].is_empty()
    }

    fn sample<R: Rng + ?Sized>(&self, obs: usize, rng: &mut R) -> &(usize, Vec<usize>, F) {
        let cdf = &self.cdfs[obs];
        let u = unit::<F, R>(rng) * cdf[cdf.len() - 1];
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        &self.rows[obs][idx]
    }
}

/// Output of [`estimate_phi`].
#[derive(Debug, Clone)]
pub struct PhiEstimate<F> {
    pub phi: PhiMatrix<F>,
    pub sample: OneStepSample<F>,
    /// One-step simulations spent building `ω`.
    pub sample_steps: u64,
    /// Continuation trajectories (started at `layer + 1`) and their steps.
    pub trajectories: u64,
    pub trajectory_steps: u64,
}

/// Two-stage sampled estimate of agent `agent`'s Φ for `action`, with the
/// other agents at `nodes`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_phi<F, S>(
    sim: &S,
    policy: &JointPolicy<F>,
    layer: usize,
    belief: &Belief<F>,
    agent: usize,
    action: usize,
    nodes: &[usize],
    trials: usize,
    seed: u64,
    parallel: bool,
) -> Result<PhiEstimate<F>>
where
    F: Real,
    S: Simulator<F>,
{
    let m = policy.num_agents();
    check_arity(nodes.len(), m)?;
    check_index("agent", agent, m)?;
    check_index("action", action, sim.num_actions(agent))?;
    if layer + 1 >= policy.horizon() {
        return Err(Error::NoSuccessorLayer { layer });
    }
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be at least 1".into(),
        });
    }
    let num_obs = sim.num_observations(agent);
    let width = policy.nodes();
    let mut seeder = stream(seed, 0);
    let first: u64 = seeder.gen();
    let second: u64 = seeder.gen();

    let mut actions = vec![0; m];
    policy.joint_action(layer, nodes, &mut actions);
    actions[agent] = action;
    let mut counts: Vec<BTreeMap<(usize, Vec<usize>), usize>> = vec![BTreeMap::new(); num_obs];
    let mut obs = vec![0; m];
    for k in 0..trials {
        let mut rng = stream(first, k as u64);
        let s = belief.sample(&mut rng);
        let tr = sim.step(s, &actions, &mut rng, &mut obs)?;
        *counts[obs[agent]]
            .entry((tr.next, obs.clone()))
            .or_insert(0) += 1;
    }
    let sample = OneStepSample::from_counts(counts);

    let cells: Vec<(usize, usize)> = (0..num_obs)
        .filter(|&o| sample.is_reached(o))
        .flat_map(|o| (0..width).map(move |q| (o, q)))
        .collect();
    let remaining = policy.horizon() - layer - 1;
    let run = |cell: usize, scratch: &mut Scratch| -> Result<(F, u64)> {
        let (o, q) = cells[cell];
        let mut rng = stream(second, cell as u64);
        let mut next = vec![0; m];
        let mut sum = F::zero();
        let mut steps = 0;
        for _ in 0..trials {
            let (s2, joint_obs, _) = sample.sample(o, &mut rng);
            for k in 0..m {
                next[k] = if k == agent {
                    q
                } else {
                    sample_index(policy.node(k, layer, nodes[k]).row(joint_obs[k]), &mut rng)
                };
            }
            let (v, n) =
                simulate_trajectory(sim, policy, layer + 1, *s2, &next, &mut rng, scratch)?;
            sum += v;
            steps += n;
        }
        Ok((sum / F::from_count(trials), steps))
    };
    let results: Vec<(F, u64)> =
        if parallel && cells.len() * trials * remaining >= PARALLEL_MIN_STEPS {
            (0..cells.len())
                .into_par_iter()
                .map_init(|| Scratch::new(m), |scratch, c| run(c, scratch))
                .collect::<Result<_>>()?
        } else {
            let mut scratch = Scratch::new(m);
            (0..cells.len())
                .map(|c| run(c, &mut scratch))
                .collect::<Result<_>>()?
        };

    let mut phi = PhiMatrix::zeros(num_obs, width);
    let mut trajectory_steps = 0;
    for (&(o, q), &(v, n)) in cells.iter().zip(&results) {
        phi.mark_reached(o);
        phi.set(o, q, v);
        trajectory_steps += n;
    }
    Ok(PhiEstimate {
        phi,
        sample,
        sample_steps: trials as u64,
        trajectories: (cells.len() * trials) as u64,
        trajectory_steps,
    })
}

/// Optimal vertex of the selection LP: `x(o_i, ·)` as a flat row-major
/// `|Ω_i| × N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSolution<F> {
    pub x: Vec<F>,
    pub rows: usize,
    pub cols: usize,
    pub objective: F,
}

impl<F: Real> SelectionSolution<F> {
    pub fn row(&self, obs: usize) -> &[F] {
        &self.x[obs * self.cols..(obs + 1) * self.cols]
    }
}

/// Maximizes `Σ Φ(o,q) x(o,q)` over row-stochastic `x`. Each reached row puts
/// all mass on its largest entry (lowest index on ties); unreached rows are
/// uniform.
pub fn solve_selection_lp<F: Real>(phi: &PhiMatrix<F>) -> SelectionSolution<F> {
    let (rows, cols) = (phi.rows(), phi.cols());
    let mut x = vec![F::zero(); rows * cols];
    let mut objective = F::zero();
    let uniform = F::one() / F::from_count(cols);
    for o in 0..rows {
        let out = &mut x[o * cols..(o + 1) * cols];
        if !phi.is_reached(o) {
            out.fill(uniform);
            continue;
        }
        let row = phi.row(o);
        let mut best = 0;
        for q in 1..cols {
            if row[q] > row[best] {
                best = q;
            }
        }
        out[best] = F::one();
        objective += row[best];
    }
    SelectionSolution {
        x,
        rows,
        cols,
        objective,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImproveParams {
    pub min_improve: f64,
    pub max_rounds: usize,
    /// `K`: trajectories per rollout batch, per Φ cell and particles per belief.
    pub trials: usize,
    /// `N`: nodes per layer.
    pub nodes: usize,
    pub parallel: bool,
}

impl Default for ImproveParams {
    fn default() -> Self {
        Self {
            min_improve: 1e-4,
            max_rounds: 100,
            trials: 20,
            nodes: 3,
            parallel: false,
        }
    }
}

impl ImproveParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(self.min_improve > 0.0) || !self.min_improve.is_finite() {
            return bad("min_improve", "must be positive and finite");
        }
        if self.max_rounds == 0 {
            return bad("max_rounds", "must be at least 1");
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1");
        }
        if self.nodes == 0 {
            return bad("nodes", "must be at least 1");
        }
        Ok(())
    }
}

/// Work done at one layer, attributed to the layer each batch starts from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LayerStats {
    pub improve_calls: u64,
    /// Rollout batches (candidate, incumbent and start-node evaluations).
    pub eval_batches: u64,
    pub eval_trajectories: u64,
    pub eval_steps: u64,
    pub phi_calls: u64,
    pub phi_sample_steps: u64,
    pub phi_trajectories: u64,
    pub phi_steps: u64,
}

impl LayerStats {
    pub fn total_steps(&self) -> u64 {
        self.eval_steps + self.phi_sample_steps + self.phi_steps
    }
}

/// Value and Φ oracle driving the improvement loop.
pub trait Evaluator<F: Real> {
    fn value(
        &mut self,
        policy: &JointPolicy<F>,
        layer: usize,
        belief: &Belief<F>,
        nodes: &[usize],
        seed: u64,
    ) -> Result<F>;

    /// Value from the initial belief at layer 0.
    fn initial_value(&mut self, policy: &JointPolicy<F>, nodes: &[usize], seed: u64) -> Result<F>;

    #[allow(clippy::too_many_arguments)]
    fn phi(
        &mut self,
        policy: &JointPolicy<F>,
        layer: usize,
        belief: &Belief<F>,
        agent: usize,
        action: usize,
        nodes: &[usize],
        seed: u64,
    ) -> Result<PhiMatrix<F>>;

    fn note_improve_call(&mut self, _layer: usize) {}
}

/// Sampling evaluator: rollouts for values, [`estimate_phi`] for Φ.
#[derive(Debug, Clone)]
pub struct RolloutEvaluator<'a, S> {
    sim: &'a S,
    trials: usize,
    parallel: bool,
    stats: Vec<LayerStats>,
}

impl<'a, S> RolloutEvaluator<'a, S> {
    pub fn new(sim: &'a S, horizon: usize, trials: usize, parallel: bool) -> Self {
        Self {
            sim,
            trials,
            parallel,
            stats: vec![LayerStats::default(); horizon],
        }
    }

    /// Per-layer work, indexed by layer.
    pub fn stats(&self) -> &[LayerStats] {
        &self.stats
    }

    fn record_eval(&mut self, layer: usize, trajectories: usize, steps: u64) {
        let st = &mut self.stats[layer];
        st.eval_batches += 1;
        st.eval_trajectories += trajectories as u64;
        st.eval_steps += steps;
    }
}

impl<F: Real, S: Simulator<F>> Evaluator<F> for RolloutEvaluator<'_, S> {
    fn value(
        &mut self,
        policy: &JointPolicy<F>,
        layer: usize,
        belief: &Belief<F>,
        nodes: &[usize],
        seed: u64,
    ) -> Result<F> {
        let est = Rollouts::new(self.sim, self.trials)
            .parallel(self.parallel)
            .estimate(policy, layer, Start::Belief(belief), nodes, seed)?;
        self.record_eval(layer, est.samples, est.steps);
        Ok(est.mean)
    }

    fn initial_value(&mut self, policy: &JointPolicy<F>, nodes: &[usize], seed: u64) -> Result<F> {
        let est = Rollouts::new(self.sim, self.trials)
            .parallel(self.parallel)
            .estimate(policy, 0, Start::Initial, nodes, seed)?;
        self.record_eval(0, est.samples, est.steps);
        Ok(est.mean)
    }

    fn phi(
        &mut self,
        policy: &JointPolicy<F>,
        layer: usize,
        belief: &Belief<F>,
        agent: usize,
        action: usize,
        nodes: &[usize],
        seed: u64,
    ) -> Result<PhiMatrix<F>> {
        let est = estimate_phi(
            self.sim,
            policy,
            layer,
            belief,
            agent,
            action,
            nodes,
            self.trials,
            seed,
            self.parallel,
        )?;
        let st = &mut self.stats[layer];
        st.phi_calls += 1;
        st.phi_sample_steps += est.sample_steps;
        // continuation trajectories start one layer down
        let below = &mut self.stats[layer + 1];
        below.phi_trajectories += est.trajectories;
        below.phi_steps += est.trajectory_steps;
        Ok(est.phi)
    }

    fn note_improve_call(&mut self, layer: usize) {
        self.stats[layer].improve_calls += 1;
    }
}

/// Exact evaluator on an explicit model; seeds are ignored.
#[derive(Debug, Clone, Copy)]
pub struct ExactEvaluator<'a, F> {
    model: &'a ExplicitModel<F>,
}

impl<'a, F: Real> ExactEvaluator<'a, F> {
    pub fn new(model: &'a ExplicitModel<F>) -> Self {
        Self { model }
    }
}

impl<F: Real> Evaluator<F> for ExactEvaluator<'_, F> {
    fn value(
        &mut self,
        policy: &JointPolicy<F>,
        layer: usize,
        belief: &Belief<F>,
        nodes: &[usize],
        _seed: u64,
    ) -> Result<F> {
        exact_policy_value(self.model, belief, policy, layer, nodes)
    }

    fn initial_value(&mut self, policy: &JointPolicy<F>, nodes: &[usize], _seed: u64) -> Result<F> {
        exact_policy_value(self.model, self.model.initial_belief(), policy, 0, nodes)
    }

    fn phi(
        &mut self,
        policy: &JointPolicy<F>,
        layer: usize,
        belief: &Belief<F>,
        agent: usize,
        action: usize,
        nodes: &[usize],
        _seed: u64,
    ) -> Result<PhiMatrix<F>> {
        exact_phi(self.model, policy, layer, belief, agent, action, nodes)
    }
}

/// Result of one [`improve_agent_node`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeUpdate<F> {
    pub accepted: bool,
    /// Best candidate estimate minus incumbent estimate.
    pub gain: F,
    pub incumbent_value: F,
    pub best_value: F,
    pub best_action: usize,
}

impl<F: Real> NodeUpdate<F> {
    /// Estimated value of the node after the call.
    pub fn current_value(&self) -> F {
        if self.accepted {
            self.best_value
        } else {
            self.incumbent_value
        }
    }
}

/// Best response of `agent`'s node `node` at `layer` against belief `belief`,
/// with every other agent at its own `node`-th node. Returns the replaced node
/// when the update is accepted.
#[allow(clippy::too_many_arguments)]
pub fn improve_agent_node<F, E, R>(
    evaluator: &mut E,
    policy: &mut JointPolicy<F>,
    layer: usize,
    node: usize,
    belief: &Belief<F>,
    agent: usize,
    params: &ImproveParams,
    rng: &mut R,
) -> Result<(NodeUpdate<F>, Option<PolicyNode<F>>)>
where
    F: Real,
    E: Evaluator<F>,
    R: Rng + ?Sized,
{
    check_index("agent", agent, policy.num_agents())?;
    check_index("layer", layer, policy.horizon())?;
    check_index("node", node, policy.nodes())?;
    evaluator.note_improve_call(layer);
    let nodes = vec![node; policy.num_agents()];
    let eval_seed: u64 = rng.gen();
    let phi_seed: u64 = rng.gen();
    let terminal = layer + 1 == policy.horizon();
    let width = policy.nodes();

    let incumbent = evaluator.value(policy, layer, belief, &nodes, eval_seed)?;
    let mut best: Option<(F, PolicyNode<F>)> = None;
    for action in 0..policy.agent(agent).num_actions() {
        let mut candidate = if terminal {
            PolicyNode::terminal(action)
        } else {
            let phi = evaluator.phi(policy, layer, belief, agent, action, &nodes, phi_seed)?;
            PolicyNode::from_flat(action, solve_selection_lp(&phi).x, width)?
        };
        policy.swap_node(agent, layer, node, &mut candidate);
        let value = evaluator.value(policy, layer, belief, &nodes, eval_seed);
        policy.swap_node(agent, layer, node, &mut candidate);
        let value = value?;
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, candidate));
        }
    }
    let (best_value, mut best_node) =
        best.ok_or_else(|| Error::InvalidPolicy(format!("agent {agent} has no actions")))?;
    let gain = best_value - incumbent;
    let accepted = gain > F::lit(params.min_improve);
    let update = NodeUpdate {
        accepted,
        gain,
        incumbent_value: incumbent,
        best_value,
        best_action: best_node.action,
    };
    if accepted {
        policy.swap_node(agent, layer, node, &mut best_node);
        Ok((update, Some(best_node)))
    } else {
        Ok((update, None))
    }
}

/// Accepted update reported to the observer of [`decrspi_with`].
#[derive(Debug)]
pub struct UpdateEvent<'a, F> {
    pub layer: usize,
    pub node: usize,
    pub agent: usize,
    pub round: usize,
    pub update: &'a NodeUpdate<F>,
    /// Node that was replaced.
    pub previous: &'a PolicyNode<F>,
    /// Policy after the update.
    pub policy: &'a JointPolicy<F>,
    pub belief: &'a Belief<F>,
}

/// Outcome of the improvement loop for one `(layer, node)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord<F> {
    pub layer: usize,
    pub node: usize,
    pub rounds: usize,
    pub accepted: usize,
    /// True when the loop stopped at `max_rounds` with updates still accepted.
    pub hit_round_limit: bool,
    pub value: F,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome<F> {
    pub policy: JointPolicy<F>,
    pub beliefs: BeliefTable<F>,
    pub records: Vec<NodeRecord<F>>,
    /// Layer-0 node every agent starts execution from.
    pub start_node: usize,
    /// Estimated initial-belief value of each aligned layer-0 node tuple.
    pub start_values: Vec<F>,
}

impl<F: Real> SolveOutcome<F> {
    pub fn value_estimate(&self) -> F {
        self.start_values[self.start_node]
    }

    pub fn record(&self, layer: usize, node: usize) -> Option<&NodeRecord<F>> {
        self.records
            .iter()
            .find(|r| r.layer == layer && r.node == node)
    }
}

/// Solves with rollout evaluation.
pub fn decrspi<F, S, R>(
    sim: &S,
    portfolio: &Portfolio<F>,
    horizon: usize,
    params: &ImproveParams,
    rng: &mut R,
) -> Result<SolveOutcome<F>>
where
    F: Real,
    S: Simulator<F>,
    R: Rng + ?Sized,
{
    let mut evaluator = RolloutEvaluator::new(sim, horizon, params.trials, params.parallel);
    decrspi_with(sim, &mut evaluator, portfolio, horizon, params, rng, |_| {})
}

/// Random initialization, belief sampling, then a single backward pass of
/// alternating best responses per `(layer, node)`. `observer` sees every
/// accepted update.
pub fn decrspi_with<F, S, E, R, O>(
    sim: &S,
    evaluator: &mut E,
    portfolio: &Portfolio<F>,
    horizon: usize,
    params: &ImproveParams,
    rng: &mut R,
    mut observer: O,
) -> Result<SolveOutcome<F>>
where
    F: Real,
    S: Simulator<F>,
    E: Evaluator<F>,
    R: Rng + ?Sized,
    O: FnMut(&UpdateEvent<'_, F>),
{
    params.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: "must be at least 1".into(),
        });
    }
    let m = sim.num_agents();
    let mut policy = random_policy(
        &sim.action_counts(),
        &sim.observation_counts(),
        horizon,
        params.nodes,
        rng,
    )?;
    let beliefs = sample_beliefs(
        sim,
        portfolio,
        horizon,
        params.nodes,
        params.trials,
        rng,
        params.parallel,
    )?;
    let mut records = Vec::with_capacity(horizon * params.nodes);
    for layer in (0..horizon).rev() {
        for node in 0..params.nodes {
            let belief = beliefs.get(layer, node);
            let mut rounds = 0;
            let mut accepted_total = 0;
            let mut value = F::zero();
            let mut hit_round_limit = false;
            loop {
                rounds += 1;
                let mut accepted = 0;
                for agent in 0..m {
                    let (update, previous) = improve_agent_node(
                        evaluator,
                        &mut policy,
                        layer,
                        node,
                        belief,
                        agent,
                        params,
                        rng,
                    )?;
                    value = update.current_value();
                    if let Some(previous) = previous {
                        accepted += 1;
                        observer(&UpdateEvent {
                            layer,
                            node,
                            agent,
                            round: rounds,
                            update: &update,
                            previous: &previous,
                            policy: &policy,
                            belief,
                        });
                    }
                }
                accepted_total += accepted;
                if accepted == 0 {
                    break;
                }
                if rounds >= params.max_rounds {
                    hit_round_limit = true;
                    break;
                }
            }
            records.push(NodeRecord {
                layer,
                node,
                rounds,
                accepted: accepted_total,
                hit_round_limit,
                value,
            });
        }
    }

    let seed: u64 = rng.gen();
    let mut start_values = Vec::with_capacity(params.nodes);
    for node in 0..params.nodes {
        start_values.push(evaluator.initial_value(&policy, &vec![node; m], seed)?);
    }
    let mut start_node = 0;
    for (n, &v) in start_values.iter().enumerate() {
        if v > start_values[start_node] {
            start_node = n;
        }
    }
    Ok(SolveOutcome {
        policy,
        beliefs,
        records,
        start_node,
        start_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::SignalMatch;
    use crate::exact::brute_force_optimal;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lp_diagonal_example() {
        let phi = PhiMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let sol = solve_selection_lp(&phi);
        assert_eq!(sol.x, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(sol.objective, 3.0);
    }

    #[test]
    fn lp_ties_go_to_lowest_index() {
        let phi = PhiMatrix::from_rows(&[vec![0.5, 0.5, 0.5]]).unwrap();
        assert_eq!(solve_selection_lp(&phi).x, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn lp_unreached_rows_are_uniform() {
        let mut phi = PhiMatrix::<f64>::zeros(2, 4);
        phi.mark_reached(0);
        phi.set(0, 2, 1.0);
        let sol = solve_selection_lp(&phi);
        assert_eq!(sol.row(0), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(sol.row(1), &[0.25; 4]);
        assert_eq!(sol.objective, 1.0);
    }

    fn vertex_max(phi: &PhiMatrix<f64>) -> f64 {
        let (r, c) = (phi.rows(), phi.cols());
        (0..c.pow(r as u32))
            .map(|mut code| {
                let mut total = 0.0;
                for o in 0..r {
                    total += phi.get(o, code % c);
                    code /= c;
                }
                total
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    proptest! {
        #[test]
        fn lp_matches_vertex_enumeration(
            rows in 1usize..=4,
            cols in 1usize..=4,
            vals in proptest::collection::vec(-10.0f64..10.0, 16),
        ) {
            let data: Vec<Vec<f64>> = (0..rows).map(|o| vals[o * cols..(o + 1) * cols].to_vec()).collect();
            let phi = PhiMatrix::from_rows(&data).unwrap();
            let sol = solve_selection_lp(&phi);
            prop_assert!((sol.objective - vertex_max(&phi)).abs() < 1e-12);
            for o in 0..rows {
                prop_assert!((sol.row(o).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(sol.row(o).iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn row_scaling_keeps_argmax(
            vals in proptest::collection::vec(-5.0f64..5.0, 9),
            scale in 0.01f64..100.0,
            row in 0usize..3,
        ) {
            let data: Vec<Vec<f64>> = vals.chunks(3).map(<[f64]>::to_vec).collect();
            let phi = PhiMatrix::from_rows(&data).unwrap();
            let mut scaled = phi.clone();
            scaled.scale_row(row, scale);
            let a = solve_selection_lp(&phi);
            let b = solve_selection_lp(&scaled);
            prop_assert_eq!(a.x, b.x);
        }
    }

    #[test]
    fn params_validation() {
        assert!(ImproveParams::default().validate().is_ok());
        let p = ImproveParams {
            trials: 0,
            ..ImproveParams::default()
        };
        assert!(p.validate().is_err());
        let p = ImproveParams {
            min_improve: 0.0,
            ..ImproveParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn last_layer_picks_matching_action() {
        let model = SignalMatch.explicit_model::<f64>(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut policy = random_policy::<f64, _>(&[2, 2], &[2, 2], 1, 1, &mut rng).unwrap();
        policy
            .replace_node(1, 0, 0, PolicyNode::terminal(0))
            .unwrap();
        policy
            .replace_node(0, 0, 0, PolicyNode::terminal(1))
            .unwrap();
        let belief = Belief::point(2, 0).unwrap();
        let mut eval = ExactEvaluator::new(&model);
        let (update, prev) = improve_agent_node(
            &mut eval,
            &mut policy,
            0,
            0,
            &belief,
            0,
            &ImproveParams::default(),
            &mut rng,
        )
        .unwrap();
        assert!(update.accepted);
        assert_eq!(prev.unwrap().action, 1);
        assert_eq!(policy.node(0, 0, 0).action, 0);
        assert!((update.gain - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_single_step_matches_brute_force() {
        let model = SignalMatch.explicit_model::<f64>(1).unwrap();
        let (opt, _) = brute_force_optimal(&model, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut eval = ExactEvaluator::new(&model);
        let params = ImproveParams {
            nodes: 2,
            ..ImproveParams::default()
        };
        let out = decrspi_with(
            &SignalMatch,
            &mut eval,
            &Portfolio::random_only(),
            1,
            &params,
            &mut rng,
            |_| {},
        )
        .unwrap();
        let v = exact_policy_value(
            &model,
            model.initial_belief(),
            &out.policy,
            0,
            &[out.start_node; 2],
        )
        .unwrap();
        assert!((v - opt).abs() < 1e-12);
    }

    #[test]
    fn phi_has_one_column_per_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let policy = random_policy::<f64, _>(&[2, 2], &[2, 2], 3, 1, &mut rng).unwrap();
        let est = estimate_phi(
            &SignalMatch,
            &policy,
            0,
            &Belief::uniform(2).unwrap(),
            0,
            1,
            &[0, 0],
            50,
            7,
            false,
        )
        .unwrap();
        assert_eq!(est.phi.cols(), 1);
        assert_eq!(est.phi.rows(), 2);
        assert_eq!(est.sample_steps, 50);
        assert_eq!(est.trajectory_steps, est.trajectories * 2);
    }

    #[test]
    fn phi_rejects_last_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let policy = random_policy::<f64, _>(&[2, 2], &[2, 2], 2, 2, &mut rng).unwrap();
        let b = Belief::uniform(2).unwrap();
        assert!(estimate_phi(&SignalMatch, &policy, 1, &b, 0, 0, &[0, 0], 5, 0, false).is_err());
    }

    #[test]
    fn phi_is_parallel_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let policy = random_policy::<f64, _>(&[2, 2], &[2, 2], 6, 3, &mut rng).unwrap();
        let b = Belief::uniform(2).unwrap();
        let a = estimate_phi(&SignalMatch, &policy, 0, &b, 1, 0, &[1, 2], 400, 11, false).unwrap();
        let p = estimate_phi(&SignalMatch, &policy, 0, &b, 1, 0, &[1, 2], 400, 11, true).unwrap();
        assert_eq!(a.phi, p.phi);
    }
}
