//! Layered stochastic policies.
//!
//! Each agent owns `T` layers of `N` decision nodes. A node carries an action
//! and, except in the last layer, a row-stochastic `|Ω_i| × N` selection table
//! giving the distribution over next-layer nodes for each own observation.
//! Execution of agent `i` never looks at another agent's observation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_arity, check_index, Error, Result};
use crate::scalar::{sample_index, unit, Real};

/// Row sums further than this from one are rejected when loading a policy.
pub const LOAD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNode<F> {
    pub action: usize,
    /// Row-major `|Ω_i| × N`; empty in the last layer.
    selection: Vec<F>,
    width: usize,
}

impl<F: Real> PolicyNode<F> {
    /// Node of the last layer: an action with no successor.
    pub fn terminal(action: usize) -> Self {
        Self {
            action,
            selection: Vec::new(),
            width: 0,
        }
    }

    /// Node with one selection row per observation; each row must be a
    /// distribution over the `width` next-layer nodes.
    pub fn new(action: usize, rows: &[Vec<F>]) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        let mut selection = Vec::with_capacity(rows.len() * width);
        for (o, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidPolicy(format!(
                    "selection row {o} has {} entries, expected {width}",
                    row.len()
                )));
            }
            check_row(row, F::SIMPLEX_TOL, &format!("selection row {o}"))?;
            selection.extend_from_slice(row);
        }
        Ok(Self {
            action,
            selection,
            width,
        })
    }

    /// Node with flat row-major selection data, validated.
    pub fn from_flat(action: usize, selection: Vec<F>, width: usize) -> Result<Self> {
        if width == 0 || !selection.len().is_multiple_of(width) {
            return Err(Error::InvalidPolicy("selection shape mismatch".into()));
        }
        for (o, row) in selection.chunks(width).enumerate() {
            check_row(row, F::SIMPLEX_TOL, &format!("selection row {o}"))?;
        }
        Ok(Self {
            action,
            selection,
            width,
        })
    }

    pub fn is_terminal(&self) -> bool {
        self.selection.is_empty()
    }

    pub fn num_rows(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.selection.len() / self.width
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, obs: usize) -> &[F] {
        &self.selection[obs * self.width..(obs + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.selection.chunks(self.width.max(1))
    }
}

fn check_row<F: Real>(row: &[F], tol: f64, context: &str) -> Result<()> {
    let mut sum = F::zero();
    for &x in row {
        if !x.is_finite() || x < F::zero() {
            return Err(Error::InvalidDistribution {
                context: context.to_string(),
                reason: format!("entry {x}"),
            });
        }
        sum += x;
    }
    if (sum - F::one()).abs().as_f64() > tol {
        return Err(Error::InvalidDistribution {
            context: context.to_string(),
            reason: format!("sums to {sum}"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPolicy<F> {
    num_actions: usize,
    num_observations: usize,
    layers: Vec<Vec<PolicyNode<F>>>,
}

impl<F: Real> AgentPolicy<F> {
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_observations(&self) -> usize {
        self.num_observations
    }

    pub fn layers(&self) -> &[Vec<PolicyNode<F>>] {
        &self.layers
    }
}

/// One layered policy per agent, all with the same `T` and `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy<F> {
    horizon: usize,
    nodes: usize,
    agents: Vec<AgentPolicy<F>>,
}

impl<F: Real> JointPolicy<F> {
    /// Assembles and validates a policy from `[agent][layer][node]` data.
    pub fn from_layers(
        action_counts: &[usize],
        observation_counts: &[usize],
        layers: Vec<Vec<Vec<PolicyNode<F>>>>,
    ) -> Result<Self> {
        check_arity(observation_counts.len(), action_counts.len())?;
        check_arity(layers.len(), action_counts.len())?;
        let horizon = layers.first().map(Vec::len).unwrap_or(0);
        let nodes = layers
            .first()
            .and_then(|l| l.first())
            .map(Vec::len)
            .unwrap_or(0);
        let agents = layers
            .into_iter()
            .zip(action_counts.iter().zip(observation_counts))
            .map(|(layers, (&num_actions, &num_observations))| AgentPolicy {
                num_actions,
                num_observations,
                layers,
            })
            .collect();
        let policy = Self {
            horizon,
            nodes,
            agents,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.nodes == 0 || self.agents.is_empty() {
            return Err(Error::InvalidPolicy(
                "T, N and agent count must be positive".into(),
            ));
        }
        for (i, agent) in self.agents.iter().enumerate() {
            if agent.layers.len() != self.horizon {
                return Err(Error::InvalidPolicy(format!(
                    "agent {i} has {} layers, expected {}",
                    agent.layers.len(),
                    self.horizon
                )));
            }
            for (t, layer) in agent.layers.iter().enumerate() {
                if layer.len() != self.nodes {
                    return Err(Error::InvalidPolicy(format!(
                        "agent {i} layer {t} has {} nodes, expected {}",
                        layer.len(),
                        self.nodes
                    )));
                }
                for (n, node) in layer.iter().enumerate() {
                    self.check_node(i, t, node).map_err(|e| {
                        Error::InvalidPolicy(format!("agent {i} layer {t} node {n}: {e}"))
                    })?;
                }
            }
        }
        Ok(())
    }

    fn check_node(&self, agent: usize, layer: usize, node: &PolicyNode<F>) -> Result<()> {
        let a = &self.agents[agent];
        check_index("action", node.action, a.num_actions)?;
        if layer + 1 == self.horizon {
            if !node.is_terminal() {
                return Err(Error::InvalidPolicy(
                    "last-layer node has a selection table".into(),
                ));
            }
        } else if node.width != self.nodes || node.num_rows() != a.num_observations {
            return Err(Error::InvalidPolicy(format!(
                "selection table is {}x{}, expected {}x{}",
                node.num_rows(),
                node.width,
                a.num_observations,
                self.nodes
            )));
        }
        for (o, row) in node.rows().enumerate().take(node.num_rows()) {
            check_row(row, F::SIMPLEX_TOL, &format!("selection row {o}"))?;
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, agent: usize) -> &AgentPolicy<F> {
        &self.agents[agent]
    }

    /// Total decision nodes, always `m * T * N`.
    pub fn total_nodes(&self) -> usize {
        self.agents
            .iter()
            .map(|a| a.layers.iter().map(Vec::len).sum::<usize>())
            .sum()
    }

    pub fn node(&self, agent: usize, layer: usize, node: usize) -> &PolicyNode<F> {
        &self.agents[agent].layers[layer][node]
    }

    /// Replaces a node after validating it, returning the previous one.
    pub fn replace_node(
        &mut self,
        agent: usize,
        layer: usize,
        node: usize,
        new: PolicyNode<F>,
    ) -> Result<PolicyNode<F>> {
        check_index("agent", agent, self.agents.len())?;
        check_index("layer", layer, self.horizon)?;
        check_index("node", node, self.nodes)?;
        self.check_node(agent, layer, &new)?;
        Ok(std::mem::replace(
            &mut self.agents[agent].layers[layer][node],
            new,
        ))
    }

    /// Swaps a node in without validation; used to try candidates that were
    /// already built valid.
    pub(crate) fn swap_node(
        &mut self,
        agent: usize,
        layer: usize,
        node: usize,
        other: &mut PolicyNode<F>,
    ) {
        std::mem::swap(&mut self.agents[agent].layers[layer][node], other);
    }

    /// Writes the joint action of the node tuple at `layer` into `out`.
    pub fn joint_action(&self, layer: usize, nodes: &[usize], out: &mut [usize]) {
        for ((slot, agent), &n) in out.iter_mut().zip(&self.agents).zip(nodes) {
            *slot = agent.layers[layer][n].action;
        }
    }

    pub fn action_counts(&self) -> Vec<usize> {
        self.agents.iter().map(|a| a.num_actions).collect()
    }

    pub fn observation_counts(&self) -> Vec<usize> {
        self.agents.iter().map(|a| a.num_observations).collect()
    }

    /// `π(· | q_i, o_i)`: the stored selection row.
    pub fn next_node_distribution(
        &self,
        agent: usize,
        layer: usize,
        node: usize,
        obs: usize,
    ) -> Result<&[F]> {
        check_index("agent", agent, self.agents.len())?;
        check_index("layer", layer, self.horizon)?;
        check_index("node", node, self.nodes)?;
        if layer + 1 >= self.horizon {
            return Err(Error::NoSuccessorLayer { layer });
        }
        check_index("observation", obs, self.agents[agent].num_observations)?;
        Ok(self.agents[agent].layers[layer][node].row(obs))
    }

    /// Samples every agent's next node independently from its own row.
    pub fn sample_next_nodes<R: Rng + ?Sized>(
        &self,
        layer: usize,
        nodes: &[usize],
        observations: &[usize],
        rng: &mut R,
        out: &mut [usize],
    ) -> Result<()> {
        if layer + 1 >= self.horizon {
            return Err(Error::NoSuccessorLayer { layer });
        }
        check_arity(nodes.len(), self.agents.len())?;
        check_arity(observations.len(), self.agents.len())?;
        for (i, agent) in self.agents.iter().enumerate() {
            let row = agent.layers[layer][nodes[i]].row(observations[i]);
            out[i] = sample_index(row, rng);
        }
        Ok(())
    }
}

/// Uniform draw from the probability simplex of dimension `n - 1`.
pub fn uniform_simplex_row<F: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<F> {
    let draws: Vec<F> = (0..n)
        .map(|_| {
            let u = unit::<F, R>(rng);
            -(F::one() - u).ln()
        })
        .collect();
    let total: F = draws.iter().copied().sum();
    if total > F::zero() {
        draws.into_iter().map(|x| x / total).collect()
    } else {
        vec![F::one() / F::from_count(n); n]
    }
}

/// Random joint policy: uniform actions and uniform-simplex selection rows.
pub fn random_policy<F: Real, R: Rng + ?Sized>(
    action_counts: &[usize],
    observation_counts: &[usize],
    horizon: usize,
    nodes: usize,
    rng: &mut R,
) -> Result<JointPolicy<F>> {
    if action_counts.is_empty() || horizon == 0 || nodes == 0 {
        return Err(Error::InvalidParameter {
            name: "random_policy",
            reason: "agents, horizon and nodes must all be at least 1".into(),
        });
    }
    check_arity(observation_counts.len(), action_counts.len())?;
    let layers = action_counts
        .iter()
        .zip(observation_counts)
        .map(|(&na, &no)| {
            (0..horizon)
                .map(|t| {
                    (0..nodes)
                        .map(|_| {
                            let action = rng.gen_range(0..na);
                            if t + 1 == horizon {
                                PolicyNode::terminal(action)
                            } else {
                                let mut flat = Vec::with_capacity(no * nodes);
                                for _ in 0..no {
                                    flat.extend(uniform_simplex_row::<F, R>(nodes, rng));
                                }
                                PolicyNode {
                                    action,
                                    selection: flat,
                                    width: nodes,
                                }
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    JointPolicy::from_layers(action_counts, observation_counts, layers)
}

/// Metadata stored next to a policy in a policy file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolicyMeta {
    pub domain: String,
    pub seed: u64,
    /// Node index every agent starts executing from in the first layer.
    pub start_node: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    action: usize,
    selection: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerDoc {
    nodes: Vec<NodeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    actions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observations: Option<usize>,
    layers: Vec<LayerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyDoc {
    domain: String,
    seed: u64,
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(rename = "N")]
    nodes: usize,
    #[serde(default)]
    start_node: usize,
    agents: Vec<AgentDoc>,
}

/// JSON policy document.
pub fn serialize_policy<F: Real>(policy: &JointPolicy<F>, meta: &PolicyMeta) -> String {
    let doc = PolicyDoc {
        domain: meta.domain.clone(),
        seed: meta.seed,
        horizon: policy.horizon,
        nodes: policy.nodes,
        start_node: meta.start_node,
        agents: policy
            .agents
            .iter()
            .map(|a| AgentDoc {
                actions: Some(a.num_actions),
                observations: Some(a.num_observations),
                layers: a
                    .layers
                    .iter()
                    .map(|layer| LayerDoc {
                        nodes: layer
                            .iter()
                            .map(|n| NodeDoc {
                                action: n.action,
                                selection: (0..n.num_rows())
                                    .map(|o| n.row(o).iter().map(|x| x.as_f64()).collect())
                                    .collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("policy document serializes")
}

/// Parses a policy document. Rows within [`LOAD_TOLERANCE`] of summing to one
/// are renormalized; rows further off are rejected.
pub fn deserialize_policy<F: Real>(text: &str) -> Result<(JointPolicy<F>, PolicyMeta)> {
    let doc: PolicyDoc = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let mut action_counts = Vec::with_capacity(doc.agents.len());
    let mut observation_counts = Vec::with_capacity(doc.agents.len());
    let mut layers = Vec::with_capacity(doc.agents.len());
    for (i, agent) in doc.agents.into_iter().enumerate() {
        let inferred_obs = agent
            .layers
            .first()
            .and_then(|l| l.nodes.first())
            .map(|n| n.selection.len())
            .unwrap_or(0);
        let inferred_actions = agent
            .layers
            .iter()
            .flat_map(|l| l.nodes.iter().map(|n| n.action + 1))
            .max()
            .unwrap_or(1);
        action_counts.push(agent.actions.unwrap_or(inferred_actions));
        observation_counts.push(agent.observations.unwrap_or(inferred_obs));
        let mut agent_layers = Vec::with_capacity(agent.layers.len());
        for (t, layer) in agent.layers.into_iter().enumerate() {
            let mut nodes = Vec::with_capacity(layer.nodes.len());
            for (n, node) in layer.nodes.into_iter().enumerate() {
                if node.selection.is_empty() {
                    nodes.push(PolicyNode::terminal(node.action));
                    continue;
                }
                let width = node.selection[0].len();
                let mut flat = Vec::with_capacity(node.selection.len() * width);
                for (o, row) in node.selection.into_iter().enumerate() {
                    let context = format!("agent {i} layer {t} node {n} row {o}");
                    if row.len() != width {
                        return Err(Error::Malformed(format!(
                            "{context}: ragged selection table"
                        )));
                    }
                    check_row(&row, LOAD_TOLERANCE, &context)?;
                    let sum: f64 = row.iter().sum();
                    let renorm = (sum - 1.0).abs() > F::SIMPLEX_TOL;
                    flat.extend(row.into_iter().map(|x| {
                        let x = if renorm { x / sum } else { x };
                        F::lit(x)
                    }));
                }
                nodes.push(PolicyNode::from_flat(node.action, flat, width)?);
            }
            agent_layers.push(nodes);
        }
        layers.push(agent_layers);
    }
    let policy = JointPolicy::from_layers(&action_counts, &observation_counts, layers)?;
    if policy.horizon != doc.horizon || policy.nodes != doc.nodes {
        return Err(Error::Malformed(format!(
            "document declares T={} N={}, tables have T={} N={}",
            doc.horizon, doc.nodes, policy.horizon, policy.nodes
        )));
    }
    check_index("start node", doc.start_node, policy.nodes)?;
    Ok((
        policy,
        PolicyMeta {
            domain: doc.domain,
            seed: doc.seed,
            start_node: doc.start_node,
        },
    ))
}
