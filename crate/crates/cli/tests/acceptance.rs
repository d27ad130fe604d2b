//! Acceptance criteria 1 through 9. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use anyhow::{ensure, Result};
use decrspi::domains::{make_domain, DomainKind};
use decrspi::improve::{solve_selection_lp, PhiMatrix};
use decrspi::model::Simulator;
use decrspi::policy::random_policy;
use decrspi_cli::oracle::{exact_backend, phi_agreement, rollout_coverage};
use decrspi_cli::scaling::{linear_fit, run_scaling};
use decrspi_cli::solve::{evaluate_policy, timed_solve};
use decrspi_cli::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-sided 95% Student t quantile with 9 degrees of freedom.
const T_975_DF9: f64 = 2.262_157_162_740_992;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn brute_force_selection(phi: &PhiMatrix<f64>) -> f64 {
    let (rows, cols) = (phi.rows(), phi.cols());
    let mut best = f64::NEG_INFINITY;
    for code in 0..cols.pow(rows as u32) {
        let mut c = code;
        let mut total = 0.0;
        for o in 0..rows {
            total += phi.get(o, c % cols);
            c /= cols;
        }
        best = best.max(total);
    }
    best
}

fn lp_vertex_optimality() -> Result<Outcome> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for size in [3usize, 4] {
        for _ in 0..100 {
            let rows: Vec<Vec<f64>> = (0..size)
                .map(|_| (0..size).map(|_| rng.gen_range(-10.0..10.0)).collect())
                .collect();
            let phi = PhiMatrix::from_rows(&rows)?;
            let lp = solve_selection_lp(&phi);
            let mut attained = 0.0;
            for o in 0..size {
                attained += lp
                    .row(o)
                    .iter()
                    .zip(phi.row(o))
                    .map(|(x, v)| x * v)
                    .sum::<f64>();
            }
            let best = brute_force_selection(&phi);
            worst = worst
                .max((lp.objective - best).abs())
                .max((attained - best).abs());
            cases += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 1.0,
        format!("{cases} matrices, max |LP - enumeration| = {worst:.2e}, {secs:.3} s"),
    )
}

fn rollout_unbiasedness() -> Result<Outcome> {
    let check = rollout_coverage(2, 10, 4, 10_000, 0.01)?;
    outcome(check.passed, check.detail)
}

fn phi_consistency() -> Result<Outcome> {
    let check = phi_agreement(3, 40, 5000)?;
    outcome(check.passed, check.detail)
}

fn exact_backend_checks() -> Result<(Outcome, Outcome)> {
    let started = Instant::now();
    let (opt, mono) = exact_backend(0, 20, 2)?;
    let secs = started.elapsed().as_secs_f64();
    Ok((
        Outcome {
            passed: opt.passed && secs < 300.0,
            detail: format!("{}, {secs:.2} s", opt.detail),
        },
        Outcome {
            passed: mono.passed,
            detail: mono.detail,
        },
    ))
}

fn horizon_complexity() -> Result<Outcome> {
    let config = RunConfig {
        domain: DomainKind::SignalMatch,
        horizons: vec![5, 10, 20],
        runs: 3,
        parallel: false,
        ..RunConfig::default()
    };
    let rows = run_scaling(&config)?;
    let points: Vec<_> = rows.iter().filter(|r| r.kind == "point").collect();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for p in &points {
        let (batch, law) = (p.batch_steps.unwrap_or(0.0), p.law_steps.unwrap_or(1.0));
        worst = worst.max((batch - law).abs() / law);
        parts.push(format!(
            "T={} steps/batch {batch:.2} law {law} (raw steps {:.0})",
            p.x.unwrap_or(0),
            p.sim_steps.unwrap_or(0.0)
        ));
    }
    outcome(
        points.len() == 3 && worst <= 0.10,
        format!("{}; max relative deviation {worst:.4}", parts.join(", ")),
    )
}

fn agent_scaling() -> Result<Outcome> {
    let config = RunConfig {
        domain: DomainKind::Dsn,
        agent_counts: vec![4, 8, 12, 16],
        horizon: 10,
        nodes: 3,
        trials: 20,
        runs: 5,
        parallel: false,
        ..RunConfig::default()
    };
    let rows = run_scaling(&config)?;
    let points: Vec<_> = rows.iter().filter(|r| r.kind == "point").collect();
    let xs: Vec<f64> = points.iter().map(|p| p.x.unwrap_or(0) as f64).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| p.time_algo_s.unwrap_or(0.0))
        .collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    let nodes_ok = points
        .iter()
        .all(|p| p.policy_nodes == p.x.map(|m| m * config.horizon * config.nodes));
    let times: Vec<String> = points
        .iter()
        .map(|p| {
            format!(
                "m={} {:.3}s",
                p.x.unwrap_or(0),
                p.time_algo_s.unwrap_or(0.0)
            )
        })
        .collect();
    outcome(
        r2 >= 0.9 && nodes_ok,
        format!(
            "{}; slope {slope:.4} s/agent, R² {r2:.4}, node counts exact: {nodes_ok}",
            times.join(", ")
        ),
    )
}

fn t_interval(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, T_975_DF9 * (var / n).sqrt())
}

fn learning_beats_random() -> Result<Outcome> {
    let config = RunConfig {
        domain: DomainKind::Dsn,
        agents: Some(8),
        horizon: 10,
        nodes: 3,
        trials: 20,
        episodes: 1000,
        parallel: true,
        ..RunConfig::default()
    };
    config.validate()?;
    let (domain, model) = make_domain::<f64>(&config.domain_spec())?;
    let (actions, observations) = (
        Simulator::<f64>::action_counts(&domain),
        Simulator::<f64>::observation_counts(&domain),
    );
    let (mut learned, mut random) = (Vec::new(), Vec::new());
    for seed in 0..10u64 {
        let solved = timed_solve(&domain, model.as_ref(), &config, config.horizon, seed)?;
        let out = &solved.outcome;
        let eval_seed = 1_000 + seed;
        learned.push(
            evaluate_policy(
                &domain,
                &out.policy,
                out.start_node,
                config.episodes,
                eval_seed,
                true,
            )?
            .0,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = random_policy::<f64, _>(
            &actions,
            &observations,
            config.horizon,
            config.nodes,
            &mut rng,
        )?;
        random.push(evaluate_policy(&domain, &policy, 0, config.episodes, eval_seed, true)?.0);
    }
    let (lm, lh) = t_interval(&learned);
    let (rm, rh) = t_interval(&random);
    outcome(
        lm - lh > rm + rh,
        format!("DecRSPI {lm:.3} ± {lh:.3} vs random {rm:.3} ± {rh:.3}"),
    )
}

fn value_columns(csv_text: &str) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("value_"))
        .map(|(i, _)| i)
        .collect();
    ensure!(cols.len() == 2, "expected two value columns in {headers:?}");
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        out.push(cols.iter().map(|&c| &rec[c]).collect::<Vec<_>>().join(","));
    }
    Ok(out)
}

fn determinism() -> Result<Outcome> {
    let invocations: [&[&str]; 2] = [
        &[
            "--domain",
            "dsn",
            "--agents",
            "6",
            "--horizon",
            "6",
            "--runs",
            "3",
            "--seed",
            "11",
        ],
        &[
            "--domain",
            "meetinggrid",
            "--horizon",
            "5",
            "--runs",
            "3",
            "--seed",
            "4",
            "--trials",
            "40",
        ],
    ];
    let mut compared = 0;
    for args in invocations {
        let run = || -> Result<Vec<String>> {
            let output = Command::new(env!("CARGO_BIN_EXE_decrspi"))
                .arg("solve")
                .args(args)
                .output()?;
            ensure!(
                output.status.success(),
                "solve failed: {}",
                String::from_utf8_lossy(&output.stderr)
            );
            value_columns(&String::from_utf8(output.stdout)?)
        };
        let (a, b) = (run()?, run()?);
        if a != b || a.is_empty() {
            return outcome(
                false,
                format!("value columns differ for `solve {}`", args.join(" ")),
            );
        }
        compared += a.len();
    }
    outcome(
        true,
        format!("{compared} rows byte-identical across repeated parallel invocations"),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Result<Outcome>)> = vec![
        ("1 LP vertex optimality", lp_vertex_optimality()),
        ("2 rollout unbiasedness", rollout_unbiasedness()),
        ("3 Φ estimator consistency", phi_consistency()),
    ];
    match exact_backend_checks() {
        Ok((opt, mono)) => {
            results.push(("4 exact-backend optimality", Ok(opt)));
            results.push(("5 monotone improvement", Ok(mono)));
        }
        Err(e) => {
            results.push(("4 exact-backend optimality", Err(anyhow::anyhow!("{e}"))));
            results.push(("5 monotone improvement", Err(e)));
        }
    }
    results.push(("6 horizon complexity", horizon_complexity()));
    results.push(("7 agent scaling", agent_scaling()));
    results.push(("8 learning beats random", learning_beats_random()));
    results.push(("9 determinism", determinism()));

    let mut failures = 0;
    for (name, result) in &results {
        let (passed, detail) = match result {
            Ok(o) => (o.passed, o.detail.clone()),
            Err(e) => (false, format!("error: {e:#}")),
        };
        failures += usize::from(!passed);
        println!(
            "{} criterion {name}: {detail}",
            if passed { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failures,
        results.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
