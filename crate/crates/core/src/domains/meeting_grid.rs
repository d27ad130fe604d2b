//! Two robots on a square grid trying to share a cell.
//!
//! Actions are up, down, left, right and stay. A move succeeds with
//! probability 0.6, otherwise the robot stays put; moves off the edge stay.
//! Each robot observes its own cell exactly. The team earns +1 whenever both
//! robots occupy the same cell after the transition. The robots start in
//! opposite corners.

use rand::Rng;

use crate::error::{check_arity, check_index, Error, Result};
use crate::model::{Belief, ExplicitModel, Simulator, Transition, ValueRange};
use crate::scalar::Real;

pub const MOVE_SUCCESS: f64 = 0.6;
pub const ACTIONS: usize = 5;

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;
pub const STAY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeetingGrid {
    size: usize,
}

impl MeetingGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidParameter {
                name: "grid_size",
                reason: format!("must be at least 2, got {size}"),
            });
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cells(&self) -> usize {
        self.size * self.size
    }

    pub fn encode(&self, cell0: usize, cell1: usize) -> usize {
        cell0 * self.cells() + cell1
    }

    pub fn decode(&self, state: usize) -> (usize, usize) {
        (state / self.cells(), state % self.cells())
    }

    pub fn start_state(&self) -> usize {
        self.encode(0, self.cells() - 1)
    }

    /// Cell reached when a move of `action` succeeds.
    pub fn target_cell(&self, cell: usize, action: usize) -> usize {
        let (r, c) = (cell / self.size, cell % self.size);
        let (r, c) = match action {
            UP if r > 0 => (r - 1, c),
            DOWN if r + 1 < self.size => (r + 1, c),
            LEFT if c > 0 => (r, c - 1),
            RIGHT if c + 1 < self.size => (r, c + 1),
            _ => (r, c),
        };
        r * self.size + c
    }

    /// Sparse distribution over one robot's next cell.
    fn move_distribution(&self, cell: usize, action: usize) -> [(usize, f64); 2] {
        let dest = self.target_cell(cell, action);
        if dest == cell {
            [(cell, 1.0), (cell, 0.0)]
        } else {
            [(dest, MOVE_SUCCESS), (cell, 1.0 - MOVE_SUCCESS)]
        }
    }

    /// Tabular model. The reward entry is the probability that the robots
    /// meet after the transition, i.e. the expectation of the sampled reward.
    pub fn explicit_model<F: Real>(&self, horizon: usize) -> Result<ExplicitModel<F>> {
        let ns = self.cells() * self.cells();
        let transition = |s: usize, a: &[usize]| {
            let (c0, c1) = self.decode(s);
            let mut out = Vec::with_capacity(4);
            for (n0, p0) in self.move_distribution(c0, a[0]) {
                for (n1, p1) in self.move_distribution(c1, a[1]) {
                    if p0 * p1 > 0.0 {
                        out.push((self.encode(n0, n1), F::lit(p0 * p1)));
                    }
                }
            }
            out
        };
        let reward = |s: usize, a: &[usize]| {
            let (c0, c1) = self.decode(s);
            let mut meet = 0.0;
            for (n0, p0) in self.move_distribution(c0, a[0]) {
                for (n1, p1) in self.move_distribution(c1, a[1]) {
                    if n0 == n1 {
                        meet += p0 * p1;
                    }
                }
            }
            F::lit(meet)
        };
        ExplicitModel::from_fns(
            ns,
            vec![ACTIONS; 2],
            vec![self.cells(); 2],
            Belief::point(ns, self.start_state())?,
            horizon,
            transition,
            |_, next| {
                let (c0, c1) = self.decode(next);
                vec![(vec![c0, c1], F::one())]
            },
            reward,
        )
    }
}

impl Default for MeetingGrid {
    fn default() -> Self {
        Self { size: 3 }
    }
}

impl<F: Real> Simulator<F> for MeetingGrid {
    fn num_agents(&self) -> usize {
        2
    }

    fn num_states(&self) -> usize {
        self.cells() * self.cells()
    }

    fn num_actions(&self, _agent: usize) -> usize {
        ACTIONS
    }

    fn num_observations(&self, _agent: usize) -> usize {
        self.cells()
    }

    fn value_range(&self, horizon: usize) -> ValueRange<F> {
        ValueRange::from_step_bounds(F::zero(), F::one(), horizon)
    }

    fn sample_initial<R: Rng + ?Sized>(&self, _rng: &mut R) -> usize {
        self.start_state()
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: usize,
        actions: &[usize],
        rng: &mut R,
        observations: &mut [usize],
    ) -> Result<Transition<F>> {
        check_index("state", state, self.cells() * self.cells())?;
        check_arity(actions.len(), 2)?;
        for &a in actions {
            check_index("action", a, ACTIONS)?;
        }
        let (c0, c1) = self.decode(state);
        let mut step_robot = |cell: usize, action: usize| {
            let dest = self.target_cell(cell, action);
            if dest != cell && rng.gen::<f64>() < MOVE_SUCCESS {
                dest
            } else {
                cell
            }
        };
        let n0 = step_robot(c0, actions[0]);
        let n1 = step_robot(c1, actions[1]);
        observations[0] = n0;
        observations[1] = n1;
        let reward = if n0 == n1 { F::one() } else { F::zero() };
        Ok(Transition {
            next: self.encode(n0, n1),
            reward,
        })
    }
}
