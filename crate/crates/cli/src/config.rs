use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use decrspi::domains::{DomainKind, DomainSpec};
use decrspi::improve::ImproveParams;
use decrspi::sampling::DEFAULT_MDP_SHARE;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rollout,
    Exact,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Rollout => "rollout",
            Backend::Exact => "exact",
        }
    }
}

/// Everything a run needs. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainKind,
    /// Agent count; only DSN accepts values other than 2 (two chains of `agents / 2`).
    pub agents: Option<usize>,
    pub targets: usize,
    pub grid_size: usize,
    pub horizon: usize,
    pub nodes: usize,
    pub trials: usize,
    pub seed: u64,
    pub runs: usize,
    pub mdp_share: f64,
    pub min_improve: f64,
    pub max_rounds: usize,
    pub backend: Backend,
    /// Fresh episodes used to evaluate a final policy.
    pub episodes: usize,
    pub parallel: bool,
    pub out: Option<PathBuf>,
    pub policy_out: Option<PathBuf>,
    /// Agent counts for an agent-scaling sweep (DSN).
    pub agent_counts: Vec<usize>,
    /// Horizons for a horizon-scaling sweep.
    pub horizons: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ImproveParams::default();
        Self {
            domain: DomainKind::SignalMatch,
            agents: None,
            targets: 2,
            grid_size: 3,
            horizon: 10,
            nodes: p.nodes,
            trials: p.trials,
            seed: 0,
            runs: 20,
            mdp_share: DEFAULT_MDP_SHARE,
            min_improve: p.min_improve,
            max_rounds: p.max_rounds,
            backend: Backend::Rollout,
            episodes: 1000,
            parallel: true,
            out: None,
            policy_out: None,
            agent_counts: Vec::new(),
            horizons: Vec::new(),
        }
    }
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> anyhow::Error {
    anyhow::anyhow!("invalid config: `{field}` {reason}")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn agent_count(&self) -> usize {
        match self.domain {
            DomainKind::Dsn => self.agents.unwrap_or(8),
            _ => self.agents.unwrap_or(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("horizon", self.horizon),
            ("nodes", self.nodes),
            ("trials", self.trials),
            ("runs", self.runs),
            ("max_rounds", self.max_rounds),
            ("episodes", self.episodes),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be at least 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.mdp_share) {
            return Err(invalid(
                "mdp_share",
                format!("must lie in [0, 1], got {}", self.mdp_share),
            ));
        }
        if !(self.min_improve > 0.0) || !self.min_improve.is_finite() {
            return Err(invalid(
                "min_improve",
                format!("must be positive, got {}", self.min_improve),
            ));
        }
        let m = self.agent_count();
        match self.domain {
            DomainKind::Dsn => {
                if m < 4 || !m.is_multiple_of(2) {
                    return Err(invalid(
                        "agents",
                        format!("DSN needs an even count of at least 4, got {m}"),
                    ));
                }
            }
            _ if m != 2 => {
                return Err(invalid(
                    "agents",
                    format!("{} has exactly 2 agents, got {m}", self.domain),
                ))
            }
            _ => {}
        }
        for &c in &self.agent_counts {
            if c < 4 || c % 2 != 0 {
                return Err(invalid(
                    "agent_counts",
                    format!("entry {c} is not an even count of at least 4"),
                ));
            }
        }
        if self.horizons.contains(&0) {
            return Err(invalid("horizons", "entries must be at least 1"));
        }
        self.domain_spec()
            .validate()
            .map_err(|e| invalid("domain", e))?;
        Ok(())
    }

    pub fn domain_spec(&self) -> DomainSpec {
        self.domain_spec_with(self.agent_count(), self.horizon)
    }

    pub fn domain_spec_with(&self, agents: usize, horizon: usize) -> DomainSpec {
        DomainSpec {
            kind: self.domain,
            horizon,
            grid_size: self.grid_size,
            sensors_per_chain: (agents / 2).max(2),
            targets: self.targets,
        }
    }

    pub fn improve_params(&self) -> ImproveParams {
        ImproveParams {
            min_improve: self.min_improve,
            max_rounds: self.max_rounds,
            trials: self.trials,
            nodes: self.nodes,
            parallel: self.parallel,
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON config file; flags take precedence over its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// signalmatch | meetinggrid | dsn
    #[arg(long)]
    pub domain: Option<DomainKind>,
    /// Number of agents (DSN: even, two chains of agents/2 sensors)
    #[arg(long)]
    pub agents: Option<usize>,
    /// DSN target count [default: 2]
    #[arg(long)]
    pub targets: Option<usize>,
    /// MeetingGrid side length [default: 3]
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Horizon T [default: 10]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Nodes per layer N [default: 3]
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Samples K per estimate [default: 20]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Base seed; run r uses seed + r [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent runs [default: 20]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Share of beliefs sampled with the MDP heuristic [default: 0.45]
    #[arg(long)]
    pub mdp_share: Option<f64>,
    /// Minimum accepted gain [default: 1e-4]
    #[arg(long)]
    pub min_improve: Option<f64>,
    /// Alternation rounds per node [default: 100]
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Value and Φ oracle [default: rollout]
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    /// Evaluation episodes per policy [default: 1000]
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Run rollout batches sequentially
    #[arg(long)]
    pub sequential: bool,
    /// CSV output path (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the best policy as JSON
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
}

impl ConfigArgs {
    /// File config (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() {
                    c.$field = v;
                })*
            };
        }
        set!(
            domain,
            targets,
            grid_size,
            horizon,
            nodes,
            trials,
            seed,
            runs,
            mdp_share,
            min_improve,
            max_rounds,
            backend,
            episodes
        );
        if self.agents.is_some() {
            c.agents = self.agents;
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        if self.policy_out.is_some() {
            c.policy_out = self.policy_out.clone();
        }
        if self.sequential {
            c.parallel = false;
        }
        Ok(c)
    }
}
