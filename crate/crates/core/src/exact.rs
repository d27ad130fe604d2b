//! Exact evaluation on explicit models: stochastic-policy values, the Φ
//! matrix, deterministic policy trees and brute-force optimal search.
//!
//! These routines never approximate. When an instance is too large they
//! return [`Error::BudgetExceeded`] instead of truncating.

use crate::error::{check_arity, check_index, Error, Result};
use crate::improve::PhiMatrix;
use crate::model::{exact_joint_step_distribution, Belief, ExplicitModel};
use crate::policy::JointPolicy;
use crate::scalar::Real;

/// Default cap on `|S| * N^m * T` for value tables.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Default cap on the number of joint deterministic tree tuples.
pub const TREE_BUDGET: u128 = 1_000_000;

fn check_compatible<F: Real>(model: &ExplicitModel<F>, policy: &JointPolicy<F>) -> Result<()> {
    check_arity(policy.num_agents(), model.num_agents())?;
    for i in 0..model.num_agents() {
        if policy.agent(i).num_actions() != model.actions().size(i)
            || policy.agent(i).num_observations() != model.observations().size(i)
        {
            return Err(Error::InvalidPolicy(format!(
                "agent {i} action/observation counts do not match the model"
            )));
        }
    }
    Ok(())
}

fn tuple_count(nodes: usize, agents: usize) -> Result<usize> {
    nodes
        .checked_pow(agents as u32)
        .ok_or(Error::BudgetExceeded {
            needed: u128::MAX,
            budget: DEFAULT_BUDGET,
        })
}

fn decode_tuple(mut idx: usize, nodes: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % nodes;
        idx /= nodes;
    }
}

fn encode_tuple(parts: &[usize], nodes: usize) -> usize {
    parts.iter().fold(0, |acc, &p| acc * nodes + p)
}

/// Product distribution over next-layer node tuples, `Π_i π(q'_i | q_i, o_i)`.
/// `fixed` pins one agent's next node to a given index.
fn successor_distribution<F: Real>(
    policy: &JointPolicy<F>,
    layer: usize,
    nodes: &[usize],
    obs: &[usize],
    fixed: Option<(usize, usize)>,
    out: &mut Vec<F>,
) {
    let n = policy.nodes();
    out.clear();
    out.push(F::one());
    let mut next = Vec::with_capacity(out.capacity());
    for (i, (&q, &o)) in nodes.iter().zip(obs).enumerate() {
        next.clear();
        for &w in out.iter() {
            match fixed {
                Some((agent, target)) if agent == i => {
                    for j in 0..n {
                        next.push(if j == target { w } else { F::zero() });
                    }
                }
                _ => {
                    let row = policy.node(i, layer, q).row(o);
                    next.extend(row.iter().map(|&p| w * p));
                }
            }
        }
        std::mem::swap(out, &mut next);
    }
}

/// Exact values `V_t(s, q⃗)` for layers `from..T`.
#[derive(Debug, Clone)]
pub struct ValueTables<F> {
    from: usize,
    num_states: usize,
    tuples: usize,
    nodes: usize,
    tables: Vec<Vec<F>>,
}

impl<F: Real> ValueTables<F> {
    pub fn value(&self, layer: usize, state: usize, nodes: &[usize]) -> F {
        let tuple = encode_tuple(nodes, self.nodes);
        self.tables[layer - self.from][state * self.tuples + tuple]
    }

    fn row(&self, layer: usize, state: usize) -> &[F] {
        let base = state * self.tuples;
        &self.tables[layer - self.from][base..base + self.tuples]
    }

    pub fn at_belief(&self, layer: usize, belief: &Belief<F>, nodes: &[usize]) -> F {
        belief
            .support()
            .map(|(s, p)| p * self.value(layer, s, nodes))
            .sum()
    }
}

/// Backward recursion over `(state, node tuple)` from the last layer down to
/// `from`:
/// `V_T(s,q⃗) = R(s,ā)`,
/// `V_t(s,q⃗) = R(s,ā) + Σ_{s',ō} P O Σ_{q⃗'} Π_i π(q'_i|o_i) V_{t+1}(s',q⃗')`.
pub fn value_tables<F: Real>(
    model: &ExplicitModel<F>,
    policy: &JointPolicy<F>,
    from: usize,
    budget: u128,
) -> Result<ValueTables<F>> {
    check_compatible(model, policy)?;
    let horizon = policy.horizon();
    check_index("layer", from, horizon)?;
    let m = policy.num_agents();
    let n = policy.nodes();
    let tuples = tuple_count(n, m)?;
    let ns = model.num_states();
    let needed = (ns as u128) * (tuples as u128) * ((horizon - from) as u128);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }

    let no = model.observations().total();
    let mut tables: Vec<Vec<F>> = vec![Vec::new(); horizon - from];
    let mut parts = vec![0; m];
    let mut actions = vec![0; m];
    let mut obs = vec![0; m];
    let mut dist = Vec::with_capacity(tuples);
    for layer in (from..horizon).rev() {
        let mut table = vec![F::zero(); ns * tuples];
        let last = layer + 1 == horizon;
        for tuple in 0..tuples {
            decode_tuple(tuple, n, &mut parts);
            policy.joint_action(layer, &parts, &mut actions);
            let ja = model.actions().encode(&actions)?;
            // successor distribution per joint observation, shared by all states
            let successors: Vec<Vec<F>> = if last {
                Vec::new()
            } else {
                (0..no)
                    .map(|jo| {
                        model.observations().decode(jo, &mut obs);
                        successor_distribution(policy, layer, &parts, &obs, None, &mut dist);
                        dist.clone()
                    })
                    .collect()
            };
            for s in 0..ns {
                let mut v = model.reward(s, ja);
                if !last {
                    let next = &tables[layer + 1 - from];
                    for o in model.outcomes(s, ja) {
                        let base = o.next * tuples;
                        let cont: F = successors[o.obs]
                            .iter()
                            .zip(&next[base..base + tuples])
                            .filter(|(w, _)| **w > F::zero())
                            .map(|(&w, &x)| w * x)
                            .sum();
                        v += o.prob * cont;
                    }
                }
                table[s * tuples + tuple] = v;
            }
        }
        tables[layer - from] = table;
    }
    Ok(ValueTables {
        from,
        num_states: ns,
        tuples,
        nodes: n,
        tables,
    })
}

/// Exact value of the stochastic joint policy started in `nodes` at `layer`
/// from belief `b`: `Σ_s b(s) V_t(s, nodes)`.
pub fn exact_policy_value<F: Real>(
    model: &ExplicitModel<F>,
    belief: &Belief<F>,
    policy: &JointPolicy<F>,
    layer: usize,
    nodes: &[usize],
) -> Result<F> {
    exact_policy_value_with_budget(model, belief, policy, layer, nodes, DEFAULT_BUDGET)
}

pub fn exact_policy_value_with_budget<F: Real>(
    model: &ExplicitModel<F>,
    belief: &Belief<F>,
    policy: &JointPolicy<F>,
    layer: usize,
    nodes: &[usize],
    budget: u128,
) -> Result<F> {
    check_arity(nodes.len(), policy.num_agents())?;
    for &q in nodes {
        check_index("node", q, policy.nodes())?;
    }
    let tables = value_tables(model, policy, layer, budget)?;
    debug_assert_eq!(tables.num_states, model.num_states());
    Ok(tables.at_belief(layer, belief, nodes))
}

/// Exact `Φ_i(o_i, q'_i) = Σ_{s',o_{-i},q'_{-i}} Pr(s',ō|b,ā) π(q'_{-i}|o_{-i}) V(s',q⃗')`
/// where `ā` is `action` for `agent` and the other agents' node actions.
/// Rows of observations with zero probability are left unreached.
#[allow(clippy::too_many_arguments)]
pub fn exact_phi<F: Real>(
    model: &ExplicitModel<F>,
    policy: &JointPolicy<F>,
    layer: usize,
    belief: &Belief<F>,
    agent: usize,
    action: usize,
    nodes: &[usize],
) -> Result<PhiMatrix<F>> {
    exact_phi_with_budget(
        model,
        policy,
        layer,
        belief,
        agent,
        action,
        nodes,
        DEFAULT_BUDGET,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn exact_phi_with_budget<F: Real>(
    model: &ExplicitModel<F>,
    policy: &JointPolicy<F>,
    layer: usize,
    belief: &Belief<F>,
    agent: usize,
    action: usize,
    nodes: &[usize],
    budget: u128,
) -> Result<PhiMatrix<F>> {
    check_compatible(model, policy)?;
    check_index("agent", agent, policy.num_agents())?;
    check_index("action", action, model.actions().size(agent))?;
    check_arity(nodes.len(), policy.num_agents())?;
    if layer + 1 >= policy.horizon() {
        return Err(Error::NoSuccessorLayer { layer });
    }
    let tables = value_tables(model, policy, layer + 1, budget)?;
    let m = policy.num_agents();
    let n = policy.nodes();
    let mut actions = vec![0; m];
    policy.joint_action(layer, nodes, &mut actions);
    actions[agent] = action;
    let step = exact_joint_step_distribution(model, belief, &actions)?;

    let mut phi = PhiMatrix::zeros(model.observations().size(agent), n);
    let mut obs = vec![0; m];
    let mut dist = Vec::new();
    for e in &step.entries {
        if e.prob <= F::zero() {
            continue;
        }
        model.observations().decode(e.obs, &mut obs);
        let oi = obs[agent];
        phi.mark_reached(oi);
        let values = tables.row(layer + 1, e.next);
        for target in 0..n {
            successor_distribution(policy, layer, nodes, &obs, Some((agent, target)), &mut dist);
            let cont: F = dist
                .iter()
                .zip(values)
                .filter(|(w, _)| **w > F::zero())
                .map(|(&w, &v)| w * v)
                .sum();
            phi.add(oi, target, e.prob * cont);
        }
    }
    Ok(phi)
}

/// Deterministic policy tree: an action at the root and one subtree per own
/// observation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolicyTree {
    pub action: usize,
    pub children: Vec<PolicyTree>,
}

impl PolicyTree {
    pub fn leaf(action: usize) -> Self {
        Self {
            action,
            children: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children.first().map(PolicyTree::depth).unwrap_or(0)
    }

    /// Tree induced by a layered policy whose selection rows are all one-hot.
    pub fn from_policy<F: Real>(
        policy: &JointPolicy<F>,
        agent: usize,
        layer: usize,
        node: usize,
    ) -> Result<Self> {
        let n = policy.node(agent, layer, node);
        if layer + 1 == policy.horizon() {
            return Ok(Self::leaf(n.action));
        }
        let children = (0..n.num_rows())
            .map(|o| {
                let row = n.row(o);
                let next = row
                    .iter()
                    .position(|&p| p == F::one())
                    .filter(|_| row.iter().filter(|&&p| p != F::zero()).count() == 1)
                    .ok_or_else(|| {
                        Error::InvalidPolicy(format!(
                            "agent {agent} layer {layer} node {node} row {o} is not one-hot"
                        ))
                    })?;
                Self::from_policy(policy, agent, layer + 1, next)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            action: n.action,
            children,
        })
    }
}

/// `V(s, q⃗) = R(s, ā) + Σ_{s',ō} P(s'|s,ā) O(ō|s',ā) V(s', q⃗_ō)`.
pub fn exact_tree_value<F: Real>(
    model: &ExplicitModel<F>,
    state: usize,
    trees: &[PolicyTree],
) -> Result<F> {
    check_arity(trees.len(), model.num_agents())?;
    check_index("state", state, model.num_states())?;
    let depth = trees[0].depth();
    for (i, t) in trees.iter().enumerate() {
        if t.depth() != depth {
            return Err(Error::InvalidPolicy("trees have different depths".into()));
        }
        check_index("action", t.action, model.actions().size(i))?;
        if !t.children.is_empty() && t.children.len() != model.observations().size(i) {
            return Err(Error::InvalidPolicy(format!(
                "agent {i} tree has {} branches, expected {}",
                t.children.len(),
                model.observations().size(i)
            )));
        }
    }
    let mut obs = vec![0; trees.len()];
    tree_value_rec(model, state, trees, &mut obs)
}

fn tree_value_rec<F: Real>(
    model: &ExplicitModel<F>,
    state: usize,
    trees: &[PolicyTree],
    obs: &mut Vec<usize>,
) -> Result<F> {
    let actions: Vec<usize> = trees.iter().map(|t| t.action).collect();
    let ja = model.actions().encode(&actions)?;
    let mut v = model.reward(state, ja);
    if trees[0].children.is_empty() {
        return Ok(v);
    }
    for o in model.outcomes(state, ja) {
        model.observations().decode(o.obs, obs);
        let sub: Vec<PolicyTree> = trees
            .iter()
            .zip(obs.iter())
            .map(|(t, &oi)| t.children[oi].clone())
            .collect();
        v += o.prob * tree_value_rec(model, o.next, &sub, obs)?;
    }
    Ok(v)
}

/// Number of distinct depth-`depth` trees for one agent:
/// `|A|^((|Ω|^depth - 1) / (|Ω| - 1))`.
pub fn tree_count(num_actions: usize, num_observations: usize, depth: usize) -> u128 {
    let mut count: u128 = 0;
    for d in 1..=depth {
        count = if d == 1 {
            num_actions as u128
        } else {
            (num_actions as u128).saturating_mul(count.saturating_pow(num_observations as u32))
        };
    }
    count
}

/// Every deterministic tree of the given depth.
pub fn enumerate_trees(
    num_actions: usize,
    num_observations: usize,
    depth: usize,
) -> Vec<PolicyTree> {
    if depth == 0 {
        return Vec::new();
    }
    if depth == 1 {
        return (0..num_actions).map(PolicyTree::leaf).collect();
    }
    let subtrees = enumerate_trees(num_actions, num_observations, depth - 1);
    let k = subtrees.len();
    let combos = k.pow(num_observations as u32);
    let mut out = Vec::with_capacity(num_actions * combos);
    let mut pick = vec![0; num_observations];
    for action in 0..num_actions {
        for c in 0..combos {
            decode_tuple(c, k, &mut pick);
            out.push(PolicyTree {
                action,
                children: pick.iter().map(|&j| subtrees[j].clone()).collect(),
            });
        }
    }
    out
}

/// Best deterministic joint policy of depth `horizon` at the model's initial
/// belief, by exhaustive enumeration.
pub fn brute_force_optimal<F: Real>(
    model: &ExplicitModel<F>,
    horizon: usize,
) -> Result<(F, Vec<PolicyTree>)> {
    brute_force_optimal_at(model, model.initial_belief(), horizon)
}

pub fn brute_force_optimal_at<F: Real>(
    model: &ExplicitModel<F>,
    belief: &Belief<F>,
    horizon: usize,
) -> Result<(F, Vec<PolicyTree>)> {
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: "must be at least 1".into(),
        });
    }
    let m = model.num_agents();
    let mut joint: u128 = 1;
    for i in 0..m {
        let c = tree_count(
            model.actions().size(i),
            model.observations().size(i),
            horizon,
        );
        joint = joint.saturating_mul(c);
    }
    if joint > TREE_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: joint,
            budget: TREE_BUDGET,
        });
    }
    let per_agent: Vec<Vec<PolicyTree>> = (0..m)
        .map(|i| {
            enumerate_trees(
                model.actions().size(i),
                model.observations().size(i),
                horizon,
            )
        })
        .collect();
    let mut best: Option<(F, Vec<usize>)> = None;
    let mut idx = vec![0usize; m];
    let mut trees: Vec<PolicyTree> = per_agent.iter().map(|l| l[0].clone()).collect();
    for _ in 0..joint {
        for i in 0..m {
            trees[i] = per_agent[i][idx[i]].clone();
        }
        let mut v = F::zero();
        for (s, p) in belief.support() {
            v += p * exact_tree_value(model, s, &trees)?;
        }
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, idx.clone()));
        }
        for i in (0..m).rev() {
            idx[i] += 1;
            if idx[i] < per_agent[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
    let (value, choice) = best.expect("at least one joint policy");
    Ok((
        value,
        choice
            .iter()
            .enumerate()
            .map(|(i, &j)| per_agent[i][j].clone())
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::SignalMatch;
    use crate::model::expected_reward;
    use crate::policy::random_policy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_counts() {
        assert_eq!(tree_count(2, 2, 1), 2);
        assert_eq!(tree_count(2, 2, 2), 8);
        assert_eq!(tree_count(2, 2, 3), 128);
        assert_eq!(enumerate_trees(2, 2, 2).len(), 8);
        assert_eq!(enumerate_trees(3, 2, 2).len(), tree_count(3, 2, 2) as usize);
    }

    #[test]
    fn last_layer_value_is_expected_reward() {
        let model = SignalMatch.explicit_model::<f64>(3).unwrap();
        let p: JointPolicy<f64> =
            random_policy(&[2, 2], &[2, 2], 3, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = Belief::from_dense(vec![0.3, 0.7]).unwrap();
        for n in 0..2 {
            let nodes = [n, 1 - n];
            let mut actions = [0; 2];
            p.joint_action(2, &nodes, &mut actions);
            let v = exact_policy_value(&model, &b, &p, 2, &nodes).unwrap();
            let r = expected_reward(&model, &b, &actions).unwrap();
            assert!((v - r).abs() < 1e-15);
        }
    }

    #[test]
    fn depth_one_brute_force_is_best_joint_action() {
        let model = SignalMatch.explicit_model::<f64>(1).unwrap();
        let (v, trees) = brute_force_optimal(&model, 1).unwrap();
        let best = (0..4)
            .map(|ja| {
                let a = model.actions().decode_vec(ja);
                expected_reward(&model, model.initial_belief(), &a).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(v, best);
        assert_eq!(trees.len(), 2);
        assert_eq!(trees[0].action, trees[1].action);
    }

    #[test]
    fn budget_is_a_hard_error() {
        let model = SignalMatch.explicit_model::<f64>(2).unwrap();
        let p: JointPolicy<f64> =
            random_policy(&[2, 2], &[2, 2], 2, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = model.initial_belief().clone();
        let err = exact_policy_value_with_budget(&model, &b, &p, 0, &[0, 0], 10).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        assert!(matches!(
            brute_force_optimal(&model, 4),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn phi_needs_a_successor_layer() {
        let model = SignalMatch.explicit_model::<f64>(2).unwrap();
        let p: JointPolicy<f64> =
            random_policy(&[2, 2], &[2, 2], 2, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = model.initial_belief().clone();
        assert!(matches!(
            exact_phi(&model, &p, 1, &b, 0, 0, &[0, 0]),
            Err(Error::NoSuccessorLayer { .. })
        ));
    }
}
