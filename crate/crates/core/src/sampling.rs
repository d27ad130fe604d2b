//! Belief sampling: heuristic trajectories produce particle sets whose
//! empirical distributions become the belief table `B[t][n]`.
//!
//! The particle recorded for layer `t` is the state *before* the layer-`t`
//! joint action, so `B[0][n]` is an empirical copy of the initial belief.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    belief_from_particles, Belief, ExplicitModel, JointSpace, ParticleSet, Simulator,
};
use crate::scalar::Real;
use crate::streams::{stream, PARALLEL_MIN_STEPS};

/// Finite-horizon Q-values of the underlying fully observable MDP over joint
/// actions, indexed `[layer][state][joint action]`.
#[derive(Debug, Clone)]
pub struct QTable<F> {
    horizon: usize,
    num_states: usize,
    actions: JointSpace,
    values: Vec<F>,
}

impl<F: Real> QTable<F> {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn q(&self, layer: usize, state: usize, joint_action: usize) -> F {
        let na = self.actions.total();
        self.values[(layer * self.num_states + state) * na + joint_action]
    }

    /// Greedy joint action index; ties go to the lowest index.
    pub fn greedy(&self, layer: usize, state: usize) -> usize {
        let na = self.actions.total();
        let base = (layer * self.num_states + state) * na;
        let row = &self.values[base..base + na];
        let mut best = 0;
        for (ja, &q) in row.iter().enumerate().skip(1) {
            if q > row[best] {
                best = ja;
            }
        }
        best
    }

    pub fn actions(&self) -> &JointSpace {
        &self.actions
    }
}

/// Finite-horizon value iteration on the centralized MDP:
/// `Q_T(s,ā) = R(s,ā)`, `Q_t(s,ā) = R(s,ā) + Σ_{s'} P(s'|s,ā) max_ā' Q_{t+1}(s',ā')`.
pub fn solve_underlying_mdp<F: Real>(
    model: &ExplicitModel<F>,
    horizon: usize,
) -> Result<QTable<F>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: "must be at least 1".into(),
        });
    }
    let ns = model.num_states();
    let na = model.actions().total();
    let mut values = vec![F::zero(); horizon * ns * na];
    let mut next_v = vec![F::zero(); ns];
    for layer in (0..horizon).rev() {
        for s in 0..ns {
            for ja in 0..na {
                let mut q = model.reward(s, ja);
                if layer + 1 < horizon {
                    for (s2, &v) in next_v.iter().enumerate() {
                        let p = model.transition_prob(s, ja, s2);
                        if p > F::zero() {
                            q += p * v;
                        }
                    }
                }
                values[(layer * ns + s) * na + ja] = q;
            }
        }
        for (s, v) in next_v.iter_mut().enumerate() {
            let base = (layer * ns + s) * na;
            *v = values[base..base + na]
                .iter()
                .copied()
                .fold(F::neg_infinity(), F::max);
        }
    }
    Ok(QTable {
        horizon,
        num_states: ns,
        actions: model.actions().clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicKind {
    Random,
    MdpGreedy,
}

#[derive(Debug, Clone)]
pub enum HeuristicPolicy<F> {
    Random,
    MdpGreedy(Arc<QTable<F>>),
}

impl<F: Real> HeuristicPolicy<F> {
    pub fn kind(&self) -> HeuristicKind {
        match self {
            HeuristicPolicy::Random => HeuristicKind::Random,
            HeuristicPolicy::MdpGreedy(_) => HeuristicKind::MdpGreedy,
        }
    }

    /// Writes the joint action for `state` at `layer` into `out`.
    pub fn select<S, R>(&self, sim: &S, layer: usize, state: usize, rng: &mut R, out: &mut [usize])
    where
        S: Simulator<F>,
        R: Rng + ?Sized,
    {
        match self {
            HeuristicPolicy::Random => {
                for (i, a) in out.iter_mut().enumerate() {
                    *a = rng.gen_range(0..sim.num_actions(i));
                }
            }
            HeuristicPolicy::MdpGreedy(q) => {
                let layer = layer.min(q.horizon() - 1);
                q.actions().decode(q.greedy(layer, state), out);
            }
        }
    }
}

/// Heuristics available for belief sampling. The MDP heuristic is used with
/// probability `mdp_share` when present.
#[derive(Debug, Clone)]
pub struct Portfolio<F> {
    mdp: Option<Arc<QTable<F>>>,
    mdp_share: f64,
}

/// Default share of belief sets sampled with the MDP heuristic.
pub const DEFAULT_MDP_SHARE: f64 = 0.45;

impl<F: Real> Portfolio<F> {
    pub fn random_only() -> Self {
        Self {
            mdp: None,
            mdp_share: 0.0,
        }
    }

    pub fn with_mdp(q: QTable<F>, mdp_share: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mdp_share) {
            return Err(Error::InvalidParameter {
                name: "mdp_share",
                reason: format!("must lie in [0, 1], got {mdp_share}"),
            });
        }
        Ok(Self {
            mdp: Some(Arc::new(q)),
            mdp_share,
        })
    }

    /// Portfolio for a domain: with an explicit model the MDP heuristic is
    /// solved and mixed in, otherwise only the random heuristic is used.
    pub fn for_model(
        model: Option<&ExplicitModel<F>>,
        horizon: usize,
        mdp_share: f64,
    ) -> Result<Self> {
        match model {
            Some(m) if mdp_share > 0.0 => {
                Self::with_mdp(solve_underlying_mdp(m, horizon)?, mdp_share)
            }
            _ => Ok(Self::random_only()),
        }
    }

    pub fn has_mdp(&self) -> bool {
        self.mdp.is_some()
    }

    pub fn mdp_share(&self) -> f64 {
        if self.mdp.is_some() {
            self.mdp_share
        } else {
            0.0
        }
    }
}

pub fn choose_heuristic<F: Real, R: Rng + ?Sized>(
    portfolio: &Portfolio<F>,
    rng: &mut R,
) -> HeuristicPolicy<F> {
    let u: f64 = rng.gen();
    match &portfolio.mdp {
        Some(q) if u < portfolio.mdp_share => HeuristicPolicy::MdpGreedy(Arc::clone(q)),
        _ => HeuristicPolicy::Random,
    }
}

/// `B[t][n]` for `t` in `0..T`, `n` in `0..N`.
#[derive(Debug, Clone)]
pub struct BeliefTable<F> {
    horizon: usize,
    nodes: usize,
    beliefs: Vec<Belief<F>>,
    particles: Vec<ParticleSet>,
    heuristics: Vec<HeuristicKind>,
    steps: u64,
}

impl<F: Real> BeliefTable<F> {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn get(&self, layer: usize, node: usize) -> &Belief<F> {
        &self.beliefs[layer * self.nodes + node]
    }

    pub fn particles(&self, layer: usize, node: usize) -> &ParticleSet {
        &self.particles[layer * self.nodes + node]
    }

    /// Heuristic used for column `n`.
    pub fn heuristic(&self, node: usize) -> HeuristicKind {
        self.heuristics[node]
    }

    /// Simulator steps spent sampling.
    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// Simulates `K` heuristic trajectories per node column and turns the
/// per-layer particle sets into beliefs.
pub fn sample_beliefs<F, S, R>(
    sim: &S,
    portfolio: &Portfolio<F>,
    horizon: usize,
    nodes: usize,
    particles: usize,
    rng: &mut R,
    parallel: bool,
) -> Result<BeliefTable<F>>
where
    F: Real,
    S: Simulator<F>,
    R: Rng + ?Sized,
{
    if horizon == 0 || nodes == 0 || particles == 0 {
        return Err(Error::InvalidParameter {
            name: "sample_beliefs",
            reason: "horizon, nodes and particle count must be at least 1".into(),
        });
    }
    let m = sim.num_agents();
    let mut columns: Vec<Vec<Vec<usize>>> = Vec::with_capacity(nodes);
    let mut heuristics = Vec::with_capacity(nodes);
    let mut steps = 0u64;
    for _ in 0..nodes {
        let h = choose_heuristic(portfolio, rng);
        heuristics.push(h.kind());
        let base: u64 = rng.gen();
        let run = |k: usize| -> Result<Vec<usize>> {
            let mut r = stream(base, k as u64);
            let mut actions = vec![0; m];
            let mut obs = vec![0; m];
            let mut s = sim.sample_initial(&mut r);
            let mut traj = Vec::with_capacity(horizon);
            for t in 0..horizon {
                traj.push(s);
                if t + 1 < horizon {
                    h.select(sim, t, s, &mut r, &mut actions);
                    s = sim.step(s, &actions, &mut r, &mut obs)?.next;
                }
            }
            Ok(traj)
        };
        let trajectories: Vec<Vec<usize>> = if parallel && particles * horizon >= PARALLEL_MIN_STEPS
        {
            (0..particles)
                .into_par_iter()
                .map(run)
                .collect::<Result<_>>()?
        } else {
            (0..particles).map(run).collect::<Result<_>>()?
        };
        steps += (particles * (horizon - 1)) as u64;
        columns.push(trajectories);
    }

    let mut beliefs = Vec::with_capacity(horizon * nodes);
    let mut sets = Vec::with_capacity(horizon * nodes);
    for t in 0..horizon {
        for column in &columns {
            let set = ParticleSet::new(
                sim.num_states(),
                column.iter().map(|traj| traj[t]).collect(),
            )?;
            beliefs.push(belief_from_particles(&set)?);
            sets.push(set);
        }
    }
    Ok(BeliefTable {
        horizon,
        nodes,
        beliefs,
        particles: sets,
        heuristics,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::SignalMatch;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn terminal_q_is_immediate_reward() {
        let model = SignalMatch.explicit_model::<f64>(2).unwrap();
        let q = solve_underlying_mdp(&model, 2).unwrap();
        assert_eq!(q.q(1, 0, 0), 1.0);
        assert_eq!(q.q(1, 0, 1), -1.0);
        assert_eq!(q.greedy(1, 0), 0);
        assert_eq!(q.greedy(1, 1), 3);
    }

    #[test]
    fn random_only_portfolio_always_random() {
        let p = Portfolio::<f64>::random_only();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(choose_heuristic(&p, &mut rng).kind(), HeuristicKind::Random);
        }
    }

    #[test]
    fn mixed_portfolio_frequencies() {
        let model = SignalMatch.explicit_model::<f64>(2).unwrap();
        let p = Portfolio::with_mdp(solve_underlying_mdp(&model, 2).unwrap(), DEFAULT_MDP_SHARE)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let random = (0..n)
            .filter(|_| choose_heuristic(&p, &mut rng).kind() == HeuristicKind::Random)
            .count();
        assert!((random as f64 / n as f64 - 0.55).abs() < 0.01);
    }

    #[test]
    fn choices_are_seed_determined() {
        let model = SignalMatch.explicit_model::<f64>(2).unwrap();
        let p = Portfolio::with_mdp(solve_underlying_mdp(&model, 2).unwrap(), 0.45).unwrap();
        let seq = |seed| -> Vec<HeuristicKind> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| choose_heuristic(&p, &mut rng).kind())
                .collect()
        };
        assert_eq!(seq(4), seq(4));
    }

    #[test]
    fn bad_share_rejected() {
        let model = SignalMatch.explicit_model::<f64>(2).unwrap();
        assert!(Portfolio::with_mdp(solve_underlying_mdp(&model, 2).unwrap(), 1.5).is_err());
    }

    #[test]
    fn particle_counts_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table = sample_beliefs::<f64, _, _>(
            &SignalMatch,
            &Portfolio::random_only(),
            4,
            3,
            17,
            &mut rng,
            false,
        )
        .unwrap();
        for t in 0..4 {
            for n in 0..3 {
                assert_eq!(table.particles(t, n).len(), 17);
                assert!((table.get(t, n).total_mass() - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(table.steps(), 3 * 17 * 3);
    }
}
