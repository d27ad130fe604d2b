use decrspi::domains::{Dsn, SignalMatch};
use decrspi::exact::exact_policy_value;
use decrspi::instrument::Instrumented;
use decrspi::model::{Belief, Simulator};
use decrspi::policy::random_policy;
use decrspi::rollout::{hoeffding_epsilon, rollout, rollout_from_belief, Rollouts, Start};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn rollout_means_fall_inside_the_hoeffding_band() {
    let model = SignalMatch.explicit_model::<f64>(4).unwrap();
    let width = Simulator::<f64>::value_range(&SignalMatch, 4).width();
    let k = 10_000;
    let eps = hoeffding_epsilon(k, 0.01, width).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut inside = 0;
    for _ in 0..10 {
        let policy = random_policy::<f64, _>(&[2, 2], &[2, 2], 4, 3, &mut rng).unwrap();
        let est = rollout_from_belief(
            &SignalMatch,
            &policy,
            0,
            model.initial_belief(),
            &[0, 0],
            k,
            &mut rng,
        )
        .unwrap();
        let exact =
            exact_policy_value(&model, model.initial_belief(), &policy, 0, &[0, 0]).unwrap();
        if (est.mean - exact).abs() <= eps {
            inside += 1;
        }
    }
    assert!(inside >= 9, "{inside}/10 inside ±{eps}");
}

#[test]
fn single_state_rollouts_match_exact_values() {
    let model = SignalMatch.explicit_model::<f64>(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let policy = random_policy::<f64, _>(&[2, 2], &[2, 2], 3, 2, &mut rng).unwrap();
    let width = Simulator::<f64>::value_range(&SignalMatch, 3).width();
    for layer in 0..3 {
        let est = rollout(&SignalMatch, &policy, layer, 1, &[1, 0], 20_000, &mut rng).unwrap();
        let exact = exact_policy_value(
            &model,
            &Belief::point(2, 1).unwrap(),
            &policy,
            layer,
            &[1, 0],
        )
        .unwrap();
        let eps = hoeffding_epsilon(20_000, 1e-4, width).unwrap();
        assert!((est.mean - exact).abs() <= eps);
    }
}

#[test]
fn samples_stay_in_the_declared_range() {
    let dsn = Dsn::new(3, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let policy = random_policy::<f64, _>(
        &Simulator::<f64>::action_counts(&dsn),
        &Simulator::<f64>::observation_counts(&dsn),
        6,
        2,
        &mut rng,
    )
    .unwrap();
    let range = Simulator::<f64>::value_range(&dsn, 6);
    let est = Rollouts::new(&dsn, 2000)
        .keep_samples(true)
        .estimate(&policy, 0, Start::Initial, &[0; 6], 3)
        .unwrap();
    assert!(est.per_sample.unwrap().iter().all(|&v| range.contains(v)));
}

#[test]
fn parallel_and_sequential_estimates_are_identical() {
    let dsn = Dsn::new(4, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let policy = random_policy::<f64, _>(
        &Simulator::<f64>::action_counts(&dsn),
        &Simulator::<f64>::observation_counts(&dsn),
        10,
        3,
        &mut rng,
    )
    .unwrap();
    let nodes = [1; 8];
    let seq = Rollouts::new(&dsn, 5000)
        .keep_samples(true)
        .estimate(&policy, 0, Start::Initial, &nodes, 99)
        .unwrap();
    let par = Rollouts::new(&dsn, 5000)
        .keep_samples(true)
        .parallel(true)
        .estimate(&policy, 0, Start::Initial, &nodes, 99)
        .unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq.mean.to_bits(), par.mean.to_bits());
}

#[test]
fn point_mass_belief_is_a_fixed_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let policy = random_policy::<f64, _>(&[2, 2], &[2, 2], 4, 2, &mut rng).unwrap();
    let b = Belief::point(2, 1).unwrap();
    let r = Rollouts::new(&SignalMatch, 300);
    let a = r
        .estimate(&policy, 0, Start::Belief(&b), &[0, 1], 5)
        .unwrap();
    let s = r.estimate(&policy, 0, Start::State(1), &[0, 1], 5).unwrap();
    // the belief draw consumes randomness, so only distributional agreement holds
    let eps = hoeffding_epsilon(300, 1e-6, 8.0).unwrap();
    assert!((a.mean - s.mean).abs() <= 2.0 * eps);
}

#[test]
fn step_counts_follow_remaining_horizon() {
    let sim = Instrumented::counting_only(SignalMatch);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let policy = random_policy::<f64, _>(&[2, 2], &[2, 2], 7, 2, &mut rng).unwrap();
    for layer in 0..7 {
        sim.reset();
        let est = Rollouts::new(&sim, 50)
            .estimate(&policy, layer, Start::State(0), &[0, 0], 1)
            .unwrap();
        assert_eq!(est.steps, 50 * (7 - layer) as u64);
        assert_eq!(sim.steps(), est.steps);
    }
}

#[test]
fn last_layer_rollout_is_the_immediate_reward() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut policy = random_policy::<f64, _>(&[2, 2], &[2, 2], 3, 1, &mut rng).unwrap();
    policy
        .replace_node(0, 2, 0, decrspi::policy::PolicyNode::terminal(1))
        .unwrap();
    policy
        .replace_node(1, 2, 0, decrspi::policy::PolicyNode::terminal(1))
        .unwrap();
    let est = rollout(&SignalMatch, &policy, 2, 1, &[0, 0], 100, &mut rng).unwrap();
    assert_eq!(est.mean, 1.0);
}
