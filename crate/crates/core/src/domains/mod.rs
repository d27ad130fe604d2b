//! Benchmark domains and name-based construction.

pub mod dsn;
pub mod meeting_grid;
pub mod signal_match;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExplicitModel, Simulator, Transition, ValueRange};
use crate::scalar::Real;

pub use dsn::Dsn;
pub use meeting_grid::MeetingGrid;
pub use signal_match::SignalMatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    SignalMatch,
    MeetingGrid,
    Dsn,
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::SignalMatch => "signalmatch",
            DomainKind::MeetingGrid => "meetinggrid",
            DomainKind::Dsn => "dsn",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "signalmatch" => Ok(DomainKind::SignalMatch),
            "meetinggrid" => Ok(DomainKind::MeetingGrid),
            "dsn" => Ok(DomainKind::Dsn),
            other => Err(Error::UnknownDomain(other.to_string())),
        }
    }
}

/// Domain name plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub horizon: usize,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_sensors")]
    pub sensors_per_chain: usize,
    #[serde(default = "default_targets")]
    pub targets: usize,
}

fn default_grid_size() -> usize {
    3
}

fn default_sensors() -> usize {
    4
}

fn default_targets() -> usize {
    2
}

impl DomainSpec {
    pub fn new(kind: DomainKind, horizon: usize) -> Self {
        Self {
            kind,
            horizon,
            grid_size: default_grid_size(),
            sensors_per_chain: default_sensors(),
            targets: default_targets(),
        }
    }

    pub fn signal_match(horizon: usize) -> Self {
        Self::new(DomainKind::SignalMatch, horizon)
    }

    pub fn meeting_grid(horizon: usize) -> Self {
        Self::new(DomainKind::MeetingGrid, horizon)
    }

    pub fn dsn(sensors_per_chain: usize, horizon: usize) -> Self {
        Self {
            sensors_per_chain,
            ..Self::new(DomainKind::Dsn, horizon)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: "must be at least 1".into(),
            });
        }
        match self.kind {
            DomainKind::SignalMatch => Ok(()),
            DomainKind::MeetingGrid => MeetingGrid::new(self.grid_size).map(|_| ()),
            DomainKind::Dsn => Dsn::new(self.sensors_per_chain, self.targets).map(|_| ()),
        }
    }
}

/// Any of the built-in domains behind one simulator type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Domain {
    SignalMatch(SignalMatch),
    MeetingGrid(MeetingGrid),
    Dsn(Dsn),
}

impl Domain {
    pub fn kind(&self) -> DomainKind {
        match self {
            Domain::SignalMatch(_) => DomainKind::SignalMatch,
            Domain::MeetingGrid(_) => DomainKind::MeetingGrid,
            Domain::Dsn(_) => DomainKind::Dsn,
        }
    }
}

macro_rules! dispatch {
    ($self:expr, $d:ident => $body:expr) => {
        match $self {
            Domain::SignalMatch($d) => $body,
            Domain::MeetingGrid($d) => $body,
            Domain::Dsn($d) => $body,
        }
    };
}

impl<F: Real> Simulator<F> for Domain {
    fn num_agents(&self) -> usize {
        dispatch!(self, d => Simulator::<F>::num_agents(d))
    }

    fn num_states(&self) -> usize {
        dispatch!(self, d => Simulator::<F>::num_states(d))
    }

    fn num_actions(&self, agent: usize) -> usize {
        dispatch!(self, d => Simulator::<F>::num_actions(d, agent))
    }

    fn num_observations(&self, agent: usize) -> usize {
        dispatch!(self, d => Simulator::<F>::num_observations(d, agent))
    }

    fn value_range(&self, horizon: usize) -> ValueRange<F> {
        dispatch!(self, d => d.value_range(horizon))
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        dispatch!(self, d => Simulator::<F>::sample_initial(d, rng))
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: usize,
        actions: &[usize],
        rng: &mut R,
        observations: &mut [usize],
    ) -> Result<Transition<F>> {
        dispatch!(self, d => d.step(state, actions, rng, observations))
    }
}

/// Builds the simulator for `spec` and, where tractable, its explicit model.
///
/// SignalMatch and MeetingGrid always come with a model. DSN gets one only
/// when its state count is at most [`dsn::EXPLICIT_STATE_LIMIT`] and the dense
/// joint tables fit the allocation budget.
pub fn make_domain<F: Real>(spec: &DomainSpec) -> Result<(Domain, Option<ExplicitModel<F>>)> {
    spec.validate()?;
    match spec.kind {
        DomainKind::SignalMatch => {
            let d = SignalMatch;
            let model = d.explicit_model(spec.horizon)?;
            Ok((Domain::SignalMatch(d), Some(model)))
        }
        DomainKind::MeetingGrid => {
            let d = MeetingGrid::new(spec.grid_size)?;
            let model = d.explicit_model(spec.horizon)?;
            Ok((Domain::MeetingGrid(d), Some(model)))
        }
        DomainKind::Dsn => {
            let d = Dsn::new(spec.sensors_per_chain, spec.targets)?;
            let model = match d.explicit_model(spec.horizon) {
                Ok(m) => Some(m),
                Err(Error::BudgetExceeded { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok((Domain::Dsn(d), model))
        }
    }
}
