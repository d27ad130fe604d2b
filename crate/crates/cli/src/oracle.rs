//! Exact-versus-sampled verification on SignalMatch.

use anyhow::Result;
use decrspi::domains::SignalMatch;
use decrspi::exact::{brute_force_optimal, exact_phi, exact_policy_value};
use decrspi::improve::{
    decrspi_with, estimate_phi, solve_selection_lp, ExactEvaluator, ImproveParams,
};
use decrspi::model::{Belief, Simulator};
use decrspi::policy::random_policy;
use decrspi::rollout::{hoeffding_epsilon, Rollouts, Start};
use decrspi::sampling::Portfolio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Rollout means of random policies against exact values.
pub fn rollout_coverage(
    seed: u64,
    policies: usize,
    horizon: usize,
    samples: usize,
    delta: f64,
) -> Result<Check> {
    let model = SignalMatch.explicit_model::<f64>(horizon)?;
    let width = Simulator::<f64>::value_range(&SignalMatch, horizon).width();
    let eps = hoeffding_epsilon(samples, delta, width)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inside = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..policies {
        let policy = random_policy::<f64, _>(&[2, 2], &[2, 2], horizon, 3, &mut rng)?;
        let est = Rollouts::new(&SignalMatch, samples)
            .parallel(true)
            .estimate(
                &policy,
                0,
                Start::Belief(model.initial_belief()),
                &[0, 0],
                rng.gen(),
            )?;
        let exact = exact_policy_value(&model, model.initial_belief(), &policy, 0, &[0, 0])?;
        let err = (est.mean - exact).abs();
        worst = worst.max(err);
        inside += usize::from(err <= eps);
    }
    let needed = (policies * 9).div_ceil(10);
    Ok(Check {
        name: "rollout_coverage",
        passed: inside >= needed,
        detail: format!("{inside}/{policies} within ±{eps:.5}, worst error {worst:.5}"),
    })
}

/// Row argmax of sampled Φ against exact Φ on rows with a clear margin.
pub fn phi_agreement(seed: u64, cases: usize, samples: usize) -> Result<Check> {
    let horizon = 3;
    let model = SignalMatch.explicit_model::<f64>(horizon)?;
    let width = Simulator::<f64>::value_range(&SignalMatch, horizon).width();
    let margin = 2.0 * hoeffding_epsilon(samples, 0.05, width)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut agreed) = (0, 0);
    for case in 0..cases {
        let policy = random_policy::<f64, _>(&[2, 2], &[2, 2], horizon, 3, &mut rng)?;
        let b = Belief::from_dense({
            let p: f64 = rng.gen();
            vec![p, 1.0 - p]
        })?;
        let (agent, action, node) = (case % 2, rng.gen_range(0..2), rng.gen_range(0..3));
        let nodes = [node; 2];
        let exact = exact_phi(&model, &policy, 0, &b, agent, action, &nodes)?;
        let est = estimate_phi(
            &SignalMatch,
            &policy,
            0,
            &b,
            agent,
            action,
            &nodes,
            samples,
            rng.gen(),
            true,
        )?;
        let (xe, xs) = (solve_selection_lp(&exact), solve_selection_lp(&est.phi));
        for o in 0..exact.rows() {
            let mut row = exact.row(o).to_vec();
            row.sort_by(|a, b| b.total_cmp(a));
            if exact.is_reached(o) && row[0] - row[1] > margin {
                checked += 1;
                agreed += usize::from(xe.row(o) == xs.row(o));
            }
        }
    }
    Ok(Check {
        name: "phi_agreement",
        passed: checked > 0 && agreed == checked,
        detail: format!("{agreed}/{checked} separated rows agree (margin {margin:.5})"),
    })
}

/// Exact-backend solves against the brute-force optimum, with every accepted
/// update checked for a strict exact gain.
pub fn exact_backend(seed: u64, runs: usize, horizon: usize) -> Result<(Check, Check)> {
    let model = SignalMatch.explicit_model::<f64>(horizon)?;
    let (opt, _) = brute_force_optimal(&model, horizon)?;
    let params = ImproveParams::default();
    let portfolio = Portfolio::for_model(Some(&model), horizon, 0.45)?;
    let mut total = 0.0;
    let (mut updates, mut violations, mut max_rounds) = (0usize, 0usize, 0usize);
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(run as u64));
        let mut eval = ExactEvaluator::new(&model);
        let out = decrspi_with(
            &SignalMatch,
            &mut eval,
            &portfolio,
            horizon,
            &params,
            &mut rng,
            |ev| {
                let nodes = [ev.node; 2];
                let after = exact_policy_value(&model, ev.belief, ev.policy, ev.layer, &nodes);
                let mut before = ev.policy.clone();
                let restored =
                    before.replace_node(ev.agent, ev.layer, ev.node, ev.previous.clone());
                let before = restored
                    .and_then(|_| exact_policy_value(&model, ev.belief, &before, ev.layer, &nodes));
                updates += 1;
                match (after, before) {
                    (Ok(a), Ok(b)) if a - b > params.min_improve => {}
                    _ => violations += 1,
                }
            },
        )?;
        for r in &out.records {
            max_rounds = max_rounds.max(r.rounds);
            if r.hit_round_limit {
                violations += 1;
            }
        }
        total += exact_policy_value(
            &model,
            model.initial_belief(),
            &out.policy,
            0,
            &[out.start_node; 2],
        )?;
    }
    let mean = total / runs as f64;
    Ok((
        Check {
            name: "exact_backend_optimality",
            passed: mean >= 0.95 * opt,
            detail: format!("mean {mean:.6} vs optimum {opt:.6} over {runs} runs"),
        },
        Check {
            name: "monotone_improvement",
            passed: violations == 0 && max_rounds <= params.max_rounds,
            detail: format!(
                "{updates} accepted updates, {violations} violations, at most {max_rounds} rounds"
            ),
        },
    ))
}

pub fn run_oracle(seed: u64) -> Result<Vec<Check>> {
    let (opt, mono) = exact_backend(seed, 20, 2)?;
    Ok(vec![
        rollout_coverage(seed, 10, 4, 10_000, 0.01)?,
        phi_agreement(seed, 20, 5000)?,
        opt,
        mono,
    ])
}
