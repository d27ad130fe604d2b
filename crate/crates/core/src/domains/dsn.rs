//! Distributed sensor network: two parallel chains of `L` sensors with
//! `L - 1` cells between them.
//!
//! Cell `c` (0-based) is surrounded by sensors `c` and `c + 1` of each chain.
//! Sensor `j` tracks cell `j - 1` with track-left and cell `j` with
//! track-right; aiming outside the cell range is legal, costs 1 and has no
//! effect. Every track action costs 1. A live target whose cell is tracked by
//! at least three of its four sensors loses one unit of energy before it
//! moves; at energy 0 it is captured, removed, and the team earns 10. Once
//! every target is captured the world restarts with fresh targets at
//! uniformly random cells and full energy, within the same episode.
//!
//! Live targets move left, right or stay with probability 1/3 each; at a
//! boundary the infeasible direction's mass goes to staying. Targets may
//! share a cell. Each sensor observes deterministically whether its left and
//! right cells hold a live target: observation `2 * left + right`.
//!
//! State encoding: each target contributes a digit in base `2 * cells + 1`,
//! 0 for captured and `1 + 2 * cell + (energy - 1)` when live. Target 0 is the
//! most significant digit.

use rand::Rng;

use crate::error::{check_arity, check_index, Error, Result};
use crate::model::{Belief, ExplicitModel, Simulator, Transition, ValueRange};
use crate::scalar::Real;

pub const TRACK_LEFT: usize = 0;
pub const TRACK_RIGHT: usize = 1;
pub const NONE: usize = 2;
pub const ACTIONS: usize = 3;
pub const OBSERVATIONS: usize = 4;

pub const CAPTURE_REWARD: f64 = 10.0;
pub const TRACK_COST: f64 = 1.0;
pub const INITIAL_ENERGY: u8 = 2;
pub const CAPTURE_QUORUM: usize = 3;
pub const MAX_TARGETS: usize = 8;

/// Largest state count for which [`Dsn::explicit_model`] is attempted.
pub const EXPLICIT_STATE_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Target {
    pub cell: usize,
    /// 0 means captured.
    pub energy: u8,
}

impl Target {
    pub fn is_live(&self) -> bool {
        self.energy > 0
    }
}

/// Decoded world state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DsnState {
    targets: [Target; MAX_TARGETS],
    len: usize,
}

impl DsnState {
    pub fn targets(&self) -> &[Target] {
        &self.targets[..self.len]
    }

    pub fn targets_mut(&mut self) -> &mut [Target] {
        &mut self.targets[..self.len]
    }

    pub fn all_captured(&self) -> bool {
        self.targets().iter().all(|t| !t.is_live())
    }

    pub fn occupied(&self, cell: usize) -> bool {
        self.targets().iter().any(|t| t.is_live() && t.cell == cell)
    }
}

/// Result of the deterministic tracking phase of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutcome {
    pub after: DsnState,
    pub captures: usize,
    pub tracks: usize,
}

impl TrackOutcome {
    pub fn reward(&self) -> f64 {
        CAPTURE_REWARD * self.captures as f64 - TRACK_COST * self.tracks as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dsn {
    sensors_per_chain: usize,
    targets: usize,
    num_states: usize,
}

impl Dsn {
    pub fn new(sensors_per_chain: usize, targets: usize) -> Result<Self> {
        if sensors_per_chain < 2 {
            return Err(Error::InvalidParameter {
                name: "sensors_per_chain",
                reason: format!("must be at least 2, got {sensors_per_chain}"),
            });
        }
        if targets == 0 || targets > MAX_TARGETS {
            return Err(Error::InvalidParameter {
                name: "targets",
                reason: format!("must be in 1..={MAX_TARGETS}, got {targets}"),
            });
        }
        let base = 2 * (sensors_per_chain - 1) + 1;
        let num_states =
            base.checked_pow(targets as u32)
                .ok_or_else(|| Error::InvalidParameter {
                    name: "targets",
                    reason: "state space does not fit in usize".into(),
                })?;
        Ok(Self {
            sensors_per_chain,
            targets,
            num_states,
        })
    }

    pub fn sensors_per_chain(&self) -> usize {
        self.sensors_per_chain
    }

    pub fn agents(&self) -> usize {
        2 * self.sensors_per_chain
    }

    pub fn cells(&self) -> usize {
        self.sensors_per_chain - 1
    }

    pub fn target_count(&self) -> usize {
        self.targets
    }

    fn base(&self) -> usize {
        2 * self.cells() + 1
    }

    pub fn decode(&self, mut state: usize) -> DsnState {
        let base = self.base();
        let mut out = DsnState {
            targets: [Target::default(); MAX_TARGETS],
            len: self.targets,
        };
        for t in out.targets_mut().iter_mut().rev() {
            let digit = state % base;
            state /= base;
            if digit > 0 {
                t.cell = (digit - 1) / 2;
                t.energy = ((digit - 1) % 2) as u8 + 1;
            }
        }
        out
    }

    pub fn encode(&self, state: &DsnState) -> usize {
        let base = self.base();
        state.targets().iter().fold(0, |acc, t| {
            let digit = if t.is_live() {
                1 + 2 * t.cell + (t.energy as usize - 1)
            } else {
                0
            };
            acc * base + digit
        })
    }

    /// Cell aimed at by `agent` taking `action`, if inside the cell range.
    pub fn tracked_cell(&self, agent: usize, action: usize) -> Option<usize> {
        let j = agent % self.sensors_per_chain;
        match action {
            TRACK_LEFT if j >= 1 => Some(j - 1),
            TRACK_RIGHT if j < self.cells() => Some(j),
            _ => None,
        }
    }

    /// Number of the four surrounding sensors tracking `cell`.
    pub fn trackers(&self, cell: usize, actions: &[usize]) -> usize {
        let l = self.sensors_per_chain;
        (0..2)
            .map(|chain| {
                usize::from(actions[chain * l + cell] == TRACK_RIGHT)
                    + usize::from(actions[chain * l + cell + 1] == TRACK_LEFT)
            })
            .sum()
    }

    /// Energy decrement and capture, applied before targets move.
    pub fn track(&self, state: &DsnState, actions: &[usize]) -> TrackOutcome {
        let tracks = actions.iter().filter(|&&a| a != NONE).count();
        let mut after = *state;
        let mut captures = 0;
        for t in after.targets_mut() {
            if t.is_live() && self.trackers(t.cell, actions) >= CAPTURE_QUORUM {
                t.energy -= 1;
                if t.energy == 0 {
                    captures += 1;
                }
            }
        }
        TrackOutcome {
            after,
            captures,
            tracks,
        }
    }

    /// `(destination, probability)` pairs for a live target in `cell`.
    pub fn move_distribution(&self, cell: usize) -> Vec<(usize, f64)> {
        let third = 1.0 / 3.0;
        let mut out = Vec::with_capacity(3);
        let mut stay = 1.0;
        if cell > 0 {
            out.push((cell - 1, third));
            stay -= third;
        }
        if cell + 1 < self.cells() {
            out.push((cell + 1, third));
            stay -= third;
        }
        out.push((cell, stay));
        out
    }

    pub fn observation(&self, state: &DsnState, agent: usize) -> usize {
        let j = agent % self.sensors_per_chain;
        let left = j >= 1 && state.occupied(j - 1);
        let right = j < self.cells() && state.occupied(j);
        2 * usize::from(left) + usize::from(right)
    }

    fn fresh_targets<R: Rng + ?Sized>(&self, rng: &mut R) -> DsnState {
        let mut s = DsnState {
            targets: [Target::default(); MAX_TARGETS],
            len: self.targets,
        };
        for t in s.targets_mut() {
            t.cell = rng.gen_range(0..self.cells());
            t.energy = INITIAL_ENERGY;
        }
        s
    }

    /// Full step that also reports captures and track counts.
    pub fn step_detailed<R: Rng + ?Sized>(
        &self,
        state: usize,
        actions: &[usize],
        rng: &mut R,
        observations: &mut [usize],
    ) -> Result<(usize, TrackOutcome)> {
        check_index("state", state, self.num_states)?;
        check_arity(actions.len(), self.agents())?;
        for &a in actions {
            check_index("action", a, ACTIONS)?;
        }
        let decoded = self.decode(state);
        let outcome = self.track(&decoded, actions);
        let mut next = outcome.after;
        if next.all_captured() {
            next = self.fresh_targets(rng);
        } else {
            let cells = self.cells();
            for t in next.targets_mut().iter_mut().filter(|t| t.is_live()) {
                let u: f64 = rng.gen();
                if u < 1.0 / 3.0 {
                    if t.cell > 0 {
                        t.cell -= 1;
                    }
                } else if u < 2.0 / 3.0 && t.cell + 1 < cells {
                    t.cell += 1;
                }
            }
        }
        for (agent, o) in observations.iter_mut().enumerate().take(self.agents()) {
            *o = self.observation(&next, agent);
        }
        Ok((self.encode(&next), outcome))
    }

    fn initial_entries(&self) -> Vec<(usize, f64)> {
        let cells = self.cells();
        let count = cells.pow(self.targets as u32);
        let p = 1.0 / count as f64;
        let mut out = Vec::with_capacity(count);
        let mut s = DsnState {
            targets: [Target::default(); MAX_TARGETS],
            len: self.targets,
        };
        for mut idx in 0..count {
            for t in s.targets_mut().iter_mut().rev() {
                t.cell = idx % cells;
                t.energy = INITIAL_ENERGY;
                idx /= cells;
            }
            out.push((self.encode(&s), p));
        }
        out
    }

    pub fn initial_belief<F: Real>(&self) -> Result<Belief<F>> {
        Belief::from_sparse(
            self.num_states,
            self.initial_entries()
                .into_iter()
                .map(|(s, p)| (s, F::lit(p))),
        )
    }

    /// Exact distribution over next states, as sparse `(state, prob)` pairs.
    pub fn transition_distribution(&self, state: usize, actions: &[usize]) -> Vec<(usize, f64)> {
        let outcome = self.track(&self.decode(state), actions);
        if outcome.after.all_captured() {
            return self.initial_entries();
        }
        let mut dist: Vec<(DsnState, f64)> = vec![(outcome.after, 1.0)];
        for k in 0..self.targets {
            if !outcome.after.targets()[k].is_live() {
                continue;
            }
            let mut expanded = Vec::with_capacity(dist.len() * 3);
            for (s, p) in &dist {
                for (dest, q) in self.move_distribution(s.targets()[k].cell) {
                    let mut s2 = *s;
                    s2.targets_mut()[k].cell = dest;
                    expanded.push((s2, p * q));
                }
            }
            dist = expanded;
        }
        let mut out: Vec<(usize, f64)> = dist.iter().map(|(s, p)| (self.encode(s), *p)).collect();
        out.sort_by_key(|&(s, _)| s);
        out.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        out
    }

    /// Tabular model, available only for small instances.
    pub fn explicit_model<F: Real>(&self, horizon: usize) -> Result<ExplicitModel<F>> {
        if self.num_states > EXPLICIT_STATE_LIMIT {
            return Err(Error::BudgetExceeded {
                needed: self.num_states as u128,
                budget: EXPLICIT_STATE_LIMIT as u128,
            });
        }
        let m = self.agents();
        ExplicitModel::from_fns(
            self.num_states,
            vec![ACTIONS; m],
            vec![OBSERVATIONS; m],
            self.initial_belief()?,
            horizon,
            |s, a| {
                self.transition_distribution(s, a)
                    .into_iter()
                    .map(|(s2, p)| (s2, F::lit(p)))
                    .collect()
            },
            |_, next| {
                let decoded = self.decode(next);
                let obs = (0..m).map(|i| self.observation(&decoded, i)).collect();
                vec![(obs, F::one())]
            },
            |s, a| F::lit(self.track(&self.decode(s), a).reward()),
        )
    }
}

impl<F: Real> Simulator<F> for Dsn {
    fn num_agents(&self) -> usize {
        self.agents()
    }

    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self, _agent: usize) -> usize {
        ACTIONS
    }

    fn num_observations(&self, _agent: usize) -> usize {
        OBSERVATIONS
    }

    fn value_range(&self, horizon: usize) -> ValueRange<F> {
        let lo = -F::lit(TRACK_COST) * F::from_count(self.agents());
        let hi = F::lit(CAPTURE_REWARD) * F::from_count(self.targets);
        ValueRange::from_step_bounds(lo, hi, horizon)
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.encode(&self.fresh_targets(rng))
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: usize,
        actions: &[usize],
        rng: &mut R,
        observations: &mut [usize],
    ) -> Result<Transition<F>> {
        let (next, outcome) = self.step_detailed(state, actions, rng, observations)?;
        Ok(Transition {
            next,
            reward: F::lit(outcome.reward()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state_with(dsn: &Dsn, targets: &[(usize, u8)]) -> usize {
        let mut s = dsn.decode(0);
        for (t, &(cell, energy)) in s.targets_mut().iter_mut().zip(targets) {
            *t = Target { cell, energy };
        }
        dsn.encode(&s)
    }

    #[test]
    fn geometry_matches_chain_layout() {
        let dsn = Dsn::new(10, 2).unwrap();
        assert_eq!(dsn.agents(), 20);
        assert_eq!(dsn.cells(), 9);
        assert_eq!(Simulator::<f64>::num_actions(&dsn, 3), 3);
        assert_eq!(Simulator::<f64>::num_observations(&dsn, 3), 4);
    }

    #[test]
    fn encode_decode_round_trip() {
        let dsn = Dsn::new(4, 3).unwrap();
        for s in 0..dsn.num_states {
            assert_eq!(dsn.encode(&dsn.decode(s)), s);
        }
    }

    #[test]
    fn capture_with_three_trackers() {
        // L = 3: cell 1 is surrounded by sensors 1, 2 (chain 0) and 4, 5 (chain 1)
        let dsn = Dsn::new(3, 2).unwrap();
        let s = state_with(&dsn, &[(1, 1), (0, 2)]);
        let actions = [NONE, TRACK_RIGHT, TRACK_LEFT, NONE, TRACK_RIGHT, NONE];
        let out = dsn.track(&dsn.decode(s), &actions);
        assert_eq!(out.captures, 1);
        assert_eq!(out.tracks, 3);
        assert_eq!(out.reward(), 7.0);
        assert!(!out.after.targets()[0].is_live());
        assert_eq!(out.after.targets()[1].energy, 2);
    }

    #[test]
    fn two_trackers_do_not_drain_energy() {
        let dsn = Dsn::new(3, 1).unwrap();
        let s = state_with(&dsn, &[(1, 2)]);
        let actions = [NONE, TRACK_RIGHT, TRACK_LEFT, NONE, NONE, NONE];
        let out = dsn.track(&dsn.decode(s), &actions);
        assert_eq!(out.after.targets()[0].energy, 2);
        assert_eq!(out.reward(), -2.0);
    }

    #[test]
    fn idle_sensors_cost_nothing() {
        let dsn = Dsn::new(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut obs = vec![0; 6];
        for _ in 0..100 {
            let s = Simulator::<f64>::sample_initial(&dsn, &mut rng);
            let tr = Simulator::<f64>::step(&dsn, s, &[NONE; 6], &mut rng, &mut obs).unwrap();
            assert_eq!(tr.reward, 0.0);
        }
    }

    #[test]
    fn out_of_range_tracks_have_no_target() {
        let dsn = Dsn::new(3, 1).unwrap();
        assert_eq!(dsn.tracked_cell(0, TRACK_LEFT), None);
        assert_eq!(dsn.tracked_cell(2, TRACK_RIGHT), None);
        assert_eq!(dsn.tracked_cell(4, TRACK_LEFT), Some(0));
    }

    #[test]
    fn boundary_moves_fold_into_stay() {
        let dsn = Dsn::new(4, 1).unwrap();
        let edge = dsn.move_distribution(0);
        assert_eq!(edge.len(), 2);
        assert_eq!(edge[0].0, 1);
        assert_eq!(edge[1].0, 0);
        assert!((edge[1].1 - 2.0 / 3.0).abs() < 1e-15);
        let mid: f64 = dsn.move_distribution(1).iter().map(|e| e.1).sum();
        assert!((mid - 1.0).abs() < 1e-15);
    }

    #[test]
    fn observation_bits() {
        let dsn = Dsn::new(3, 1).unwrap();
        let s = dsn.decode(state_with(&dsn, &[(1, 2)]));
        // sensor 1 sees cell 0 on its left and cell 1 on its right
        assert_eq!(dsn.observation(&s, 1), 1);
        assert_eq!(dsn.observation(&s, 2), 2);
        assert_eq!(dsn.observation(&s, 0), 0);
    }

    #[test]
    fn restart_after_last_capture() {
        let dsn = Dsn::new(2, 1).unwrap();
        let s = state_with(&dsn, &[(0, 1)]);
        let actions = [TRACK_RIGHT, TRACK_LEFT, TRACK_RIGHT, NONE];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut obs = vec![0; 4];
        let (next, out) = dsn.step_detailed(s, &actions, &mut rng, &mut obs).unwrap();
        assert_eq!(out.captures, 1);
        let t = dsn.decode(next).targets()[0];
        assert_eq!(t.energy, INITIAL_ENERGY);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Dsn::new(1, 1).is_err());
        assert!(Dsn::new(3, 0).is_err());
        assert!(Dsn::new(3, MAX_TARGETS + 1).is_err());
    }
}
