use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sail_core::baselines::{run_random, train_bc, BaselineKind, BcConfig};
use sail_core::data::{state_only, Trajectory};
use sail_core::env::EnvName;
use sail_core::experts::{default_min_return, generate_teacher, ExpertKind};
use sail_core::metrics::aer;
use sail_core::models::ActMode;
use sail_core::sail::{SailConfig, LOG_COLUMNS};

fn teacher(env: EnvName, n: usize, seed: u64) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_teacher(
        env,
        ExpertKind::default_for(env),
        n,
        default_min_return(env),
        &mut rng,
    )
    .unwrap()
}

#[test]
fn random_mountain_car_never_reaches_the_goal() {
    let returns = run_random(EnvName::MountainCar, 100, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(returns.len(), 100);
    assert!(returns.iter().all(|&r| r == -200.0));
    assert_eq!(aer(&returns).unwrap(), (-200.0, 0.0));
}

#[test]
fn random_cart_pole_mean_is_short() {
    let returns = run_random(EnvName::CartPole, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (mean, _) = aer(&returns).unwrap();
    assert!((15.0..=35.0).contains(&mean), "mean {mean}");
}

#[test]
fn random_acrobot_respects_the_step_cap() {
    let returns = run_random(EnvName::Acrobot, 50, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert!(returns.iter().all(|&r| (-500.0..=0.0).contains(&r)));
}

#[test]
fn random_needs_an_episode() {
    assert!(run_random(EnvName::CartPole, 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn random_runs_are_seeded() {
    let a = run_random(EnvName::CartPole, 20, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = run_random(EnvName::CartPole, 20, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bc_needs_actions() {
    let t = state_only(&teacher(EnvName::CartPole, 1, 4));
    let stripped = vec![Trajectory {
        states: t[0].states.clone(),
        hidden_actions: None,
        episode_return: t[0].episode_return,
    }];
    let err = train_bc::<f64>(EnvName::CartPole, &stripped, &BcConfig::default()).unwrap_err();
    assert!(matches!(err, sail_core::Error::Config(_)));
}

#[test]
fn bc_is_deterministic() {
    let t = teacher(EnvName::Acrobot, 2, 5);
    let cfg = BcConfig {
        steps: 30,
        batch: 16,
        seed: 9,
        ..BcConfig::default()
    };
    let a = train_bc::<f64>(EnvName::Acrobot, &t, &cfg).unwrap();
    let b = train_bc::<f64>(EnvName::Acrobot, &t, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bc_memorises_a_short_demonstration() {
    let full = teacher(EnvName::MountainCar, 1, 6);
    let n = 12;
    let short = vec![Trajectory {
        states: full[0].states[..=n].to_vec(),
        hidden_actions: Some(full[0].hidden_actions.as_ref().unwrap()[..n].to_vec()),
        episode_return: -(n as f64),
    }];
    let cfg = BcConfig {
        steps: 600,
        batch: 12,
        ..BcConfig::default()
    };
    let b = train_bc::<f64>(EnvName::MountainCar, &short, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (s, &a) in short[0]
        .states
        .iter()
        .zip(short[0].hidden_actions.as_ref().unwrap())
    {
        assert_eq!(
            b.policy
                .act(&b.store, s, ActMode::Argmax, &mut rng)
                .unwrap(),
            a
        );
    }
}

#[test]
fn ablation_log_has_the_full_schema() {
    let t = state_only(&teacher(EnvName::CartPole, 2, 7));
    let cfg = SailConfig {
        epochs: 1,
        idm_steps: 5,
        bc_steps: 5,
        rollout_episodes: 1,
        eval_episodes: 2,
        initial_random_episodes: 2,
        ..SailConfig::default()
    };
    let out =
        sail_core::baselines::train_sail_ablation::<f64>(&cfg, EnvName::CartPole, &t).unwrap();
    let csv = out.log.to_csv();
    assert_eq!(csv.lines().next().unwrap(), LOG_COLUMNS.join(","));
    assert_eq!(out.log.len(), 1);
}

#[test]
fn baseline_names_serialise() {
    assert_eq!(serde_json::to_string(&BaselineKind::Bc).unwrap(), "\"BC\"");
    assert_eq!(
        serde_json::to_string(&BaselineKind::Random).unwrap(),
        "\"Random\""
    );
}
