use anyhow::{bail, Result};
use decrspi::domains::{make_domain, DomainKind};
use decrspi::improve::LayerStats;
use serde::Serialize;

use crate::config::{Backend, RunConfig};
use crate::solve::{timed_solve, write_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    Agents,
    Horizon,
}

/// A measured point (`kind = "point"`) or the fitted summary (`kind = "fit"`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub kind: &'static str,
    pub sweep: Sweep,
    pub x: Option<usize>,
    pub runs: Option<usize>,
    pub time_algo_s: Option<f64>,
    pub time_sim_s: Option<f64>,
    pub sim_steps: Option<f64>,
    pub policy_nodes: Option<usize>,
    /// Σ over layers of (trajectory steps / trajectories) started at that layer.
    pub batch_steps: Option<f64>,
    /// `(T² + T) / 2`.
    pub law_steps: Option<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    /// Largest relative deviation of `batch_steps` from `law_steps`.
    pub max_rel_dev: Option<f64>,
}

impl ScalingRow {
    fn empty(kind: &'static str, sweep: Sweep) -> Self {
        Self {
            kind,
            sweep,
            x: None,
            runs: None,
            time_algo_s: None,
            time_sim_s: None,
            sim_steps: None,
            policy_nodes: None,
            batch_steps: None,
            law_steps: None,
            slope: None,
            intercept: None,
            r2: None,
            max_rel_dev: None,
        }
    }
}

/// Ordinary least squares `y = slope·x + intercept` with its R².
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    (slope, my - slope * mx, r2)
}

/// Per-layer steps per trajectory, summed over layers.
pub fn batch_steps(stats: &[LayerStats]) -> f64 {
    stats
        .iter()
        .filter(|s| s.eval_trajectories + s.phi_trajectories > 0)
        .map(|s| {
            (s.eval_steps + s.phi_steps) as f64 / (s.eval_trajectories + s.phi_trajectories) as f64
        })
        .sum()
}

/// Agent sweep when `agent_counts` is set (DSN only), otherwise a horizon
/// sweep over `horizons`.
pub fn run_scaling(config: &RunConfig) -> Result<Vec<ScalingRow>> {
    config.validate()?;
    if config.backend != Backend::Rollout {
        bail!("invalid config: `backend` scaling studies use the rollout backend");
    }
    let (sweep, points) = if !config.agent_counts.is_empty() {
        if config.domain != DomainKind::Dsn {
            bail!("invalid config: `agent_counts` needs the dsn domain");
        }
        (Sweep::Agents, config.agent_counts.clone())
    } else if !config.horizons.is_empty() {
        (Sweep::Horizon, config.horizons.clone())
    } else {
        bail!("invalid config: set `agent_counts` or `horizons` for a scaling study");
    };

    let mut rows = Vec::with_capacity(points.len() + 1);
    for &x in &points {
        let (agents, horizon) = match sweep {
            Sweep::Agents => (x, config.horizon),
            Sweep::Horizon => (config.agent_count(), x),
        };
        let (domain, model) = make_domain::<f64>(&config.domain_spec_with(agents, horizon))?;
        let mut row = ScalingRow::empty("point", sweep);
        let (mut algo, mut sim, mut steps, mut batch) = (0.0, 0.0, 0.0, 0.0);
        for run in 0..config.runs {
            let seed = config.seed.wrapping_add(run as u64);
            let solved = timed_solve(&domain, model.as_ref(), config, horizon, seed)?;
            algo += solved.time_algo_s;
            sim += solved.time_sim_s;
            steps += solved.sim_steps as f64;
            batch += batch_steps(&solved.layer_stats);
            row.policy_nodes = Some(solved.outcome.policy.total_nodes());
        }
        let runs = config.runs as f64;
        row.x = Some(x);
        row.runs = Some(config.runs);
        row.time_algo_s = Some(algo / runs);
        row.time_sim_s = Some(sim / runs);
        row.sim_steps = Some(steps / runs);
        row.batch_steps = Some(batch / runs);
        row.law_steps = Some((horizon * horizon + horizon) as f64 / 2.0);
        rows.push(row);
    }

    let xs: Vec<f64> = rows.iter().map(|r| r.x.unwrap_or(0) as f64).collect();
    let mut fit = ScalingRow::empty("fit", sweep);
    let (slope, intercept, r2) = match sweep {
        Sweep::Agents => linear_fit(
            &xs,
            &rows
                .iter()
                .map(|r| r.time_algo_s.unwrap_or(0.0))
                .collect::<Vec<_>>(),
        ),
        Sweep::Horizon => {
            let law: Vec<f64> = rows.iter().map(|r| r.law_steps.unwrap_or(0.0)).collect();
            linear_fit(
                &law,
                &rows
                    .iter()
                    .map(|r| r.batch_steps.unwrap_or(0.0))
                    .collect::<Vec<_>>(),
            )
        }
    };
    fit.slope = Some(slope);
    fit.intercept = Some(intercept);
    fit.r2 = Some(r2);
    fit.max_rel_dev = rows
        .iter()
        .filter_map(|r| Some((r.batch_steps? - r.law_steps?).abs() / r.law_steps?))
        .reduce(f64::max);
    rows.push(fit);
    if let Some(path) = &config.out {
        write_csv(path, &rows)?;
    }
    Ok(rows)
}
