mod common;

use focused_reading::agent::{train, A2cModel, TrainConfig};
use focused_reading::corpus::Template;
use focused_reading::env::SearchProblem;

use common::{doc, Fixture};

// Each source and destination shares a document with a bridge entity but
// never co-occurs with the other endpoint, so only the disjunction
// connects them in one step; the conjunction reads nothing.
fn planted() -> Fixture {
    Fixture::from_records(
        vec![
            doc("s1", &[&["north", "bridge"]]),
            doc("d1", &[&["bridge", "south"]]),
            doc("s2", &[&["east", "ferry"]]),
            doc("d2", &[&["ferry", "west"]]),
            doc("n1", &[&["north", "hill"]]),
            doc("w1", &[&["west", "lake"]]),
        ],
        2,
    )
}

fn problems(fx: &Fixture) -> Vec<SearchProblem> {
    [("north", "south"), ("east", "west")]
        .into_iter()
        .map(|(s, d)| SearchProblem {
            source: fx.id(s),
            destination: fx.id(d),
        })
        .collect()
}

fn config(iterations: usize) -> TrainConfig {
    TrainConfig {
        iterations,
        minibatch: 20,
        parallel_envs: 4,
        hidden: vec![32, 16],
        seed: 3,
        ..TrainConfig::default()
    }
}

fn disjunction_probability(model: &A2cModel, fx: &Fixture, p: &SearchProblem) -> f64 {
    let env = fx.env(1);
    let state = env.reset(p).unwrap();
    let cands = env.candidate_actions(&state).unwrap();
    let probs = model
        .probabilities(
            &env.featurize(&state, &cands).unwrap(),
            &env.action_mask(&cands),
        )
        .unwrap();
    let disj = cands
        .iter()
        .find(|a| a.template() == Some(Template::Disjunction))
        .unwrap();
    probs[disj.slot.unwrap()]
}

#[test]
fn learns_the_planted_action() {
    let fx = planted();
    let env = fx.env(1);
    let problems = problems(&fx);
    let out = train(&env, &problems, &config(300)).unwrap();
    for p in &problems {
        let prob = disjunction_probability(&out.model, &fx, p);
        assert!(prob > 0.9, "disjunction probability {prob}");
    }
}

#[test]
fn same_seed_gives_identical_curves() {
    let fx = planted();
    let env = fx.env(1);
    let problems = problems(&fx);
    let a = train(&env, &problems, &config(25)).unwrap();
    let b = train(&env, &problems, &config(25)).unwrap();
    assert_eq!(a.curve.len(), 25);
    for (x, y) in a.curve.iter().zip(&b.curve) {
        assert_eq!(
            x.mean_return.map(f64::to_bits),
            y.mean_return.map(f64::to_bits)
        );
        assert_eq!(x.policy_loss.to_bits(), y.policy_loss.to_bits());
        assert_eq!(x.value_loss.to_bits(), y.value_loss.to_bits());
    }
    assert_eq!(a.model, b.model);
    let c = train(
        &env,
        &problems,
        &TrainConfig {
            seed: 4,
            ..config(25)
        },
    )
    .unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn curve_has_one_point_per_iteration() {
    let fx = planted();
    let env = fx.env(1);
    for iterations in [1, 7] {
        let out = train(&env, &problems(&fx), &config(iterations)).unwrap();
        let its: Vec<usize> = out.curve.iter().map(|p| p.iteration).collect();
        assert_eq!(its, (1..=iterations).collect::<Vec<_>>());
    }
}

#[test]
fn saved_model_acts_like_the_trained_one() {
    let fx = planted();
    let env = fx.env(1);
    let problems = problems(&fx);
    let out = train(&env, &problems, &config(10)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    out.model.save(&path).unwrap();
    let loaded = A2cModel::load(&path).unwrap();
    loaded.check_compatible(&env).unwrap();
    for p in &problems {
        assert_eq!(
            disjunction_probability(&out.model, &fx, p).to_bits(),
            disjunction_probability(&loaded, &fx, p).to_bits()
        );
    }
    assert!(loaded.check_compatible(&fx.env(2)).is_err());
}
