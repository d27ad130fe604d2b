//! Two agents guess a hidden binary state from noisy private signals.
//!
//! The state flips with probability 0.1 each step regardless of actions.
//! Each agent observes the next state correctly with probability 0.8,
//! independently of the other agent. Reward is +1 when both agents say the
//! current state, -1 when they disagree and 0 when both are wrong.

use rand::Rng;

use crate::error::{check_arity, check_index, Result};
use crate::model::{Belief, ExplicitModel, Simulator, Transition, ValueRange};
use crate::scalar::Real;

pub const FLIP_PROB: f64 = 0.1;
pub const SIGNAL_ACCURACY: f64 = 0.8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SignalMatch;

impl SignalMatch {
    pub const AGENTS: usize = 2;
    pub const STATES: usize = 2;

    pub fn reward(state: usize, actions: &[usize]) -> f64 {
        if actions[0] != actions[1] {
            -1.0
        } else if actions[0] == state {
            1.0
        } else {
            0.0
        }
    }

    pub fn explicit_model<F: Real>(&self, horizon: usize) -> Result<ExplicitModel<F>> {
        let flip = F::lit(FLIP_PROB);
        let acc = F::lit(SIGNAL_ACCURACY);
        ExplicitModel::from_fns(
            Self::STATES,
            vec![2, 2],
            vec![2, 2],
            Belief::uniform(Self::STATES)?,
            horizon,
            |s, _| vec![(s, F::one() - flip), (1 - s, flip)],
            |_, next| {
                let mut out = Vec::with_capacity(4);
                for o0 in 0..2 {
                    for o1 in 0..2 {
                        let p0 = if o0 == next { acc } else { F::one() - acc };
                        let p1 = if o1 == next { acc } else { F::one() - acc };
                        out.push((vec![o0, o1], p0 * p1));
                    }
                }
                out
            },
            |s, a| F::lit(Self::reward(s, a)),
        )
    }
}

impl<F: Real> Simulator<F> for SignalMatch {
    fn num_agents(&self) -> usize {
        Self::AGENTS
    }

    fn num_states(&self) -> usize {
        Self::STATES
    }

    fn num_actions(&self, _agent: usize) -> usize {
        2
    }

    fn num_observations(&self, _agent: usize) -> usize {
        2
    }

    fn value_range(&self, horizon: usize) -> ValueRange<F> {
        ValueRange::from_step_bounds(-F::one(), F::one(), horizon)
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.gen_range(0..Self::STATES)
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: usize,
        actions: &[usize],
        rng: &mut R,
        observations: &mut [usize],
    ) -> Result<Transition<F>> {
        check_index("state", state, Self::STATES)?;
        check_arity(actions.len(), Self::AGENTS)?;
        for &a in actions {
            check_index("action", a, 2)?;
        }
        let reward = F::lit(Self::reward(state, actions));
        let next = if rng.gen::<f64>() < FLIP_PROB {
            1 - state
        } else {
            state
        };
        for o in observations.iter_mut().take(Self::AGENTS) {
            *o = if rng.gen::<f64>() < SIGNAL_ACCURACY {
                next
            } else {
                1 - next
            };
        }
        Ok(Transition { next, reward })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_table() {
        assert_eq!(SignalMatch::reward(0, &[0, 0]), 1.0);
        assert_eq!(SignalMatch::reward(1, &[1, 1]), 1.0);
        assert_eq!(SignalMatch::reward(0, &[1, 1]), 0.0);
        assert_eq!(SignalMatch::reward(0, &[0, 1]), -1.0);
        assert_eq!(SignalMatch::reward(1, &[1, 0]), -1.0);
    }

    #[test]
    fn explicit_tables() {
        let m = SignalMatch.explicit_model::<f64>(3).unwrap();
        assert_eq!(m.num_states(), 2);
        assert!((m.transition_prob(0, 0, 1) - FLIP_PROB).abs() < 1e-15);
        // both agents hear the correct signal
        let jo = m.observations().encode(&[1, 1]).unwrap();
        assert!((m.observation_prob(0, 1, jo) - 0.64).abs() < 1e-15);
        assert_eq!(m.initial_belief().prob(0), 0.5);
    }

    #[test]
    fn arity_is_checked() {
        let mut rng = rand::thread_rng();
        let mut obs = [0; 2];
        let r = Simulator::<f64>::step(&SignalMatch, 0, &[0], &mut rng, &mut obs);
        assert!(r.is_err());
    }
}
