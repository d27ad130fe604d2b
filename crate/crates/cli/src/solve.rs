use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use decrspi::domains::{make_domain, Domain};
use decrspi::exact::exact_policy_value;
use decrspi::improve::{decrspi_with, ExactEvaluator, RolloutEvaluator, SolveOutcome};
use decrspi::instrument::Instrumented;
use decrspi::model::{ExplicitModel, Simulator};
use decrspi::policy::{deserialize_policy, serialize_policy, JointPolicy, PolicyMeta};
use decrspi::rollout::{Rollouts, Start};
use decrspi::sampling::Portfolio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Backend, RunConfig};

/// One CSV row of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub run: usize,
    pub seed: u64,
    pub domain: String,
    pub agents: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "N")]
    pub nodes: usize,
    #[serde(rename = "K")]
    pub trials: usize,
    pub backend: String,
    pub value_mean: f64,
    pub value_ci95: f64,
    pub time_algo_s: f64,
    pub time_sim_s: f64,
    pub sim_steps: u64,
    pub policy_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub rows: Vec<RunRow>,
    /// Run index of the policy with the highest value.
    pub best_run: usize,
    /// Serialized best policy.
    pub best_policy: String,
}

/// Mean and 95% half-width of a sample.
pub fn mean_ci95(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Mean return of `episodes` fresh episodes from the initial belief, starting
/// every agent at `start_node`.
pub fn evaluate_policy<S: Simulator<f64>>(
    sim: &S,
    policy: &JointPolicy<f64>,
    start_node: usize,
    episodes: usize,
    seed: u64,
    parallel: bool,
) -> Result<(f64, f64)> {
    let est = Rollouts::new(sim, episodes)
        .parallel(parallel)
        .keep_samples(true)
        .estimate(
            policy,
            0,
            Start::Initial,
            &vec![start_node; policy.num_agents()],
            seed,
        )?;
    Ok(mean_ci95(est.per_sample.as_deref().unwrap_or(&[])))
}

/// Result of one solver run with timing split into algorithm and simulator.
pub struct TimedSolve {
    pub outcome: SolveOutcome<f64>,
    pub time_algo_s: f64,
    pub time_sim_s: f64,
    pub sim_steps: u64,
    pub layer_stats: Vec<decrspi::improve::LayerStats>,
}

pub fn timed_solve(
    domain: &Domain,
    model: Option<&ExplicitModel<f64>>,
    config: &RunConfig,
    horizon: usize,
    seed: u64,
) -> Result<TimedSolve> {
    let sim = Instrumented::new(domain.clone());
    let params = config.improve_params();
    let portfolio = Portfolio::for_model(model, horizon, config.mdp_share)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let started = Instant::now();
    let (outcome, layer_stats) = match config.backend {
        Backend::Rollout => {
            let mut eval = RolloutEvaluator::new(&sim, horizon, params.trials, params.parallel);
            let out = decrspi_with(
                &sim,
                &mut eval,
                &portfolio,
                horizon,
                &params,
                &mut rng,
                |_| {},
            )?;
            (out, eval.stats().to_vec())
        }
        Backend::Exact => {
            let model = model.context("backend `exact` needs a domain with an explicit model")?;
            let mut eval = ExactEvaluator::new(model);
            let out = decrspi_with(
                &sim,
                &mut eval,
                &portfolio,
                horizon,
                &params,
                &mut rng,
                |_| {},
            )?;
            (out, Vec::new())
        }
    };
    let total = started.elapsed().as_secs_f64();
    let time_sim_s = sim.step_time().as_secs_f64();
    Ok(TimedSolve {
        outcome,
        time_algo_s: (total - time_sim_s).max(0.0),
        time_sim_s,
        sim_steps: sim.steps(),
        layer_stats,
    })
}

/// Solves `runs` times with seeds `seed, seed + 1, …`, evaluates each policy
/// and keeps the best one.
pub fn run_solve(config: &RunConfig) -> Result<SolveReport> {
    config.validate()?;
    let spec = config.domain_spec();
    let (domain, model) = make_domain::<f64>(&spec)?;
    if config.backend == Backend::Exact && model.is_none() {
        bail!(
            "invalid config: `backend` exact is only available for domains with an explicit model"
        );
    }
    let mut rows = Vec::with_capacity(config.runs);
    let mut best: Option<(f64, usize, String)> = None;
    for run in 0..config.runs {
        let seed = config.seed.wrapping_add(run as u64);
        let solved = timed_solve(&domain, model.as_ref(), config, config.horizon, seed)?;
        let out = &solved.outcome;
        let (value_mean, value_ci95) = match (config.backend, model.as_ref()) {
            (Backend::Exact, Some(m)) => {
                let nodes = vec![out.start_node; out.policy.num_agents()];
                (
                    exact_policy_value(m, m.initial_belief(), &out.policy, 0, &nodes)?,
                    0.0,
                )
            }
            _ => {
                let eval_seed: u64 = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e7a1).gen();
                evaluate_policy(
                    &domain,
                    &out.policy,
                    out.start_node,
                    config.episodes,
                    eval_seed,
                    config.parallel,
                )?
            }
        };
        let meta = PolicyMeta {
            domain: domain.kind().name().to_string(),
            seed,
            start_node: out.start_node,
        };
        if best.as_ref().is_none_or(|(v, _, _)| value_mean > *v) {
            best = Some((value_mean, run, serialize_policy(&out.policy, &meta)));
        }
        rows.push(RunRow {
            run,
            seed,
            domain: domain.kind().name().to_string(),
            agents: domain_agents(&domain),
            horizon: config.horizon,
            nodes: config.nodes,
            trials: config.trials,
            backend: config.backend.name().to_string(),
            value_mean,
            value_ci95,
            time_algo_s: solved.time_algo_s,
            time_sim_s: solved.time_sim_s,
            sim_steps: solved.sim_steps,
            policy_nodes: out.policy.total_nodes(),
        });
    }
    let (_, best_run, best_policy) = best.expect("runs >= 1");
    if let Some(path) = &config.out {
        write_csv(path, &rows)?;
    }
    if let Some(path) = &config.policy_out {
        fs::write(path, &best_policy)
            .with_context(|| format!("writing policy {}", path.display()))?;
    }
    Ok(SolveReport {
        rows,
        best_run,
        best_policy,
    })
}

pub fn domain_agents(domain: &Domain) -> usize {
    Simulator::<f64>::num_agents(domain)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub domain: String,
    pub agents: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub start_node: usize,
    pub episodes: usize,
    pub seed: u64,
    pub value_mean: f64,
    pub value_ci95: f64,
}

/// Loads a policy and evaluates it on the configured domain.
pub fn run_evaluate(policy_path: &Path, config: &RunConfig) -> Result<EvalRow> {
    let text = fs::read_to_string(policy_path)
        .with_context(|| format!("reading {}", policy_path.display()))?;
    let (policy, meta) = deserialize_policy::<f64>(&text)?;
    let config = RunConfig {
        horizon: policy.horizon(),
        agents: config.agents.or(Some(policy.num_agents())),
        ..config.clone()
    };
    config.validate()?;
    if meta.domain != config.domain.name() {
        bail!(
            "policy was trained on `{}` but the domain is `{}`",
            meta.domain,
            config.domain
        );
    }
    let (domain, _) = make_domain::<f64>(&config.domain_spec())?;
    check_policy_fits(&policy, &domain)?;
    if meta.start_node >= policy.nodes() {
        bail!("policy start node {} is out of range", meta.start_node);
    }
    let (value_mean, value_ci95) = evaluate_policy(
        &domain,
        &policy,
        meta.start_node,
        config.episodes,
        config.seed,
        config.parallel,
    )?;
    let row = EvalRow {
        domain: domain.kind().name().to_string(),
        agents: policy.num_agents(),
        horizon: policy.horizon(),
        start_node: meta.start_node,
        episodes: config.episodes,
        seed: config.seed,
        value_mean,
        value_ci95,
    };
    if let Some(path) = &config.out {
        write_csv(path, std::slice::from_ref(&row))?;
    }
    Ok(row)
}

pub fn check_policy_fits<S: Simulator<f64>>(policy: &JointPolicy<f64>, sim: &S) -> Result<()> {
    if policy.num_agents() != sim.num_agents() {
        bail!(
            "policy has {} agents but the domain has {}",
            policy.num_agents(),
            sim.num_agents()
        );
    }
    if policy.action_counts() != sim.action_counts() {
        bail!(
            "policy action counts {:?} do not match the domain's {:?}",
            policy.action_counts(),
            sim.action_counts()
        );
    }
    if policy.observation_counts() != sim.observation_counts() {
        bail!(
            "policy observation counts {:?} do not match the domain's {:?}",
            policy.observation_counts(),
            sim.observation_counts()
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_of_constant_sample_is_zero() {
        assert_eq!(mean_ci95(&[2.0, 2.0, 2.0]), (2.0, 0.0));
    }

    #[test]
    fn ci_reference_value() {
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((h - 1.96 * sd / 2.0).abs() < 1e-12);
    }
}
