use decrspi::domains::{MeetingGrid, SignalMatch};
use decrspi::model::ExplicitModel;
use decrspi::sampling::{sample_beliefs, solve_underlying_mdp, HeuristicKind, Portfolio, QTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn propagate(
    model: &ExplicitModel<f64>,
    b: &[f64],
    mut policy: impl FnMut(usize) -> Vec<(usize, f64)>,
) -> Vec<f64> {
    let ns = model.num_states();
    let mut out = vec![0.0; ns];
    for (s, &p) in b.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (ja, w) in policy(s) {
            for (s2, slot) in out.iter_mut().enumerate() {
                *slot += p * w * model.transition_prob(s, ja, s2);
            }
        }
    }
    out
}

fn check_counts(counts: &[usize], expected: &[f64], n: usize) {
    for (s, (&c, &p)) in counts.iter().zip(expected).enumerate() {
        let mean = n as f64 * p;
        let tol = 4.0 * (n as f64 * p * (1.0 - p)).sqrt() + 1.0;
        assert!((c as f64 - mean).abs() <= tol, "state {s}: {c} vs {mean}");
    }
}

fn histogram(particles: &[usize], states: usize) -> Vec<usize> {
    let mut h = vec![0; states];
    for &s in particles {
        h[s] += 1;
    }
    h
}

#[test]
fn random_heuristic_marginals_match_exact_propagation() {
    let g = MeetingGrid::default();
    let model = g.explicit_model::<f64>(4).unwrap();
    let k = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let table = sample_beliefs(
        &g,
        &Portfolio::<f64>::random_only(),
        4,
        1,
        k,
        &mut rng,
        true,
    )
    .unwrap();
    let na = model.actions().total();
    let mut b = model.initial_belief().to_dense();
    for t in 0..4 {
        check_counts(&histogram(table.particles(t, 0).particles(), 81), &b, k);
        b = propagate(&model, &b, |_| {
            (0..na).map(|ja| (ja, 1.0 / na as f64)).collect()
        });
    }
}

#[test]
fn greedy_heuristic_marginals_match_exact_propagation() {
    let g = MeetingGrid::default();
    let model = g.explicit_model::<f64>(5).unwrap();
    let q: QTable<f64> = solve_underlying_mdp(&model, 5).unwrap();
    let portfolio = Portfolio::with_mdp(q.clone(), 1.0).unwrap();
    let k = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let table = sample_beliefs(&g, &portfolio, 5, 2, k, &mut rng, false).unwrap();
    assert_eq!(table.heuristic(0), HeuristicKind::MdpGreedy);
    let mut b = model.initial_belief().to_dense();
    for t in 0..5 {
        check_counts(&histogram(table.particles(t, 1).particles(), 81), &b, k);
        b = propagate(&model, &b, |s| vec![(q.greedy(t, s), 1.0)]);
    }
}

#[test]
fn mdp_values_bound_the_meeting_reward() {
    let g = MeetingGrid::default();
    let model = g.explicit_model::<f64>(3).unwrap();
    let q = solve_underlying_mdp(&model, 3).unwrap();
    // from opposite corners no move sequence of length 1 can meet
    assert_eq!(q.q(2, g.start_state(), q.greedy(2, g.start_state())), 0.0);
    for s in 0..81 {
        let best = q.q(0, s, q.greedy(0, s));
        assert!((0.0..=3.0).contains(&best));
    }
}

#[test]
fn first_layer_is_the_initial_belief() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = 40_000;
    let table = sample_beliefs(
        &SignalMatch,
        &Portfolio::<f64>::random_only(),
        3,
        2,
        k,
        &mut rng,
        false,
    )
    .unwrap();
    check_counts(
        &histogram(table.particles(0, 1).particles(), 2),
        &[0.5, 0.5],
        k,
    );
}

#[test]
fn sampling_is_seed_deterministic_and_parallel_invariant() {
    let g = MeetingGrid::default();
    let model = g.explicit_model::<f64>(6).unwrap();
    let portfolio = Portfolio::for_model(Some(&model), 6, 0.45).unwrap();
    let run = |parallel| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = sample_beliefs(&g, &portfolio, 6, 3, 1000, &mut rng, parallel).unwrap();
        (0..6)
            .flat_map(|l| (0..3).map(move |n| (l, n)))
            .map(|(l, n)| t.particles(l, n).particles().to_vec())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(false), run(false));
    assert_eq!(run(false), run(true));
}
