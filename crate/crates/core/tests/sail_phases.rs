use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sail_core::data::{
    collect_random, sample_windows, state_only, Provenance, SampleSet, StateTrajectory, Trajectory,
    Transition,
};
use sail_core::env::{Env, EnvName};
use sail_core::experts::{default_min_return, generate_teacher, ExpertKind};
use sail_core::models::{argmax, rows_tensor as rows, select_action, ActMode, ModelBundle};
use sail_core::nn::{AdamConfig, Graph, ParamId};
use sail_core::sail::{
    adversarial_update, behavioural_cloning, discriminator_accuracy, discriminator_step,
    filter_append, measure_discriminator, pseudo_label, rollout_collect, train, train_idm,
    AdvSettings, BcSettings, GeneratorLoss, SailConfig,
};
use sail_core::Adam;
use sail_core::{baselines, ParamStore};

fn tiny_config(seed: u64) -> SailConfig {
    SailConfig {
        epochs: 2,
        idm_steps: 20,
        idm_batch: 32,
        bc_steps: 20,
        bc_batch: 32,
        adversarial_steps: 3,
        rollout_episodes: 2,
        window: 8,
        windows_per_side: 4,
        accuracy_windows: 8,
        eval_episodes: 3,
        initial_random_episodes: 5,
        seed,
        ..SailConfig::default()
    }
}

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

fn snapshot(store: &ParamStore, ids: &[ParamId]) -> Vec<Vec<f64>> {
    ids.iter()
        .map(|&id| store.value(id).data().to_vec())
        .collect()
}

fn fitted_bundle(env: EnvName, t: &[StateTrajectory], seed: u64) -> ModelBundle<f64> {
    let mut b = ModelBundle::<f64>::new(&env.spec(), &mut ChaCha8Rng::seed_from_u64(seed));
    let states = || t.iter().flat_map(|x| &x.states).map(Vec::as_slice);
    b.policy.state_norm.fit(&mut b.store, states());
    b.generator.state_norm.fit(&mut b.store, states());
    b.discriminator.state_norm.fit(&mut b.store, states());
    b
}

fn adam(b: &ModelBundle<f64>, ids: Vec<ParamId>) -> Adam {
    Adam::new(&b.store, ids, AdamConfig::default())
}

#[test]
fn idm_learns_cartpole_from_random_transitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut env = Env::new(EnvName::CartPole, 1);
    let mut samples = SampleSet::new();
    while samples.len() < 10_000 {
        let more = collect_random(&mut env, 50, &mut rng).unwrap();
        samples.extend(more.transitions().iter().cloned(), Provenance::Random);
    }
    let mut b = ModelBundle::<f64>::new(&EnvName::CartPole.spec(), &mut rng);
    let all = samples.transitions();
    b.idm
        .state_norm
        .fit(&mut b.store, all.iter().map(|t| t.state.as_slice()));
    let deltas: Vec<Vec<f64>> = all
        .iter()
        .map(|t| {
            t.next_state
                .iter()
                .zip(&t.state)
                .map(|(n, s)| n - s)
                .collect()
        })
        .collect();
    b.idm
        .delta_norm
        .fit(&mut b.store, deltas.iter().map(Vec::as_slice));
    let mut opt = adam(&b, b.idm.trainable());
    let m = train_idm(&b.idm, &mut b.store, &mut opt, &samples, 300, 128, &mut rng).unwrap();
    assert!(
        m.holdout_accuracy > 0.6,
        "holdout accuracy {}",
        m.holdout_accuracy
    );
}

#[test]
fn one_idm_step_lowers_the_batch_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut env = Env::new(EnvName::MountainCar, 2);
    let samples = collect_random(&mut env, 1, &mut rng).unwrap();
    let batch: Vec<&Transition> = samples.transitions().iter().take(64).collect();
    let s: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
    let n: Vec<&[f64]> = batch.iter().map(|t| t.next_state.as_slice()).collect();
    let a: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let mut b = ModelBundle::<f64>::new(&EnvName::MountainCar.spec(), &mut rng);
    let mut opt = adam(&b, b.idm.trainable());
    let loss = |b: &ModelBundle<f64>| {
        let mut g = Graph::new(&b.store);
        let sv = g.input(rows(&s));
        let nv = g.input(rows(&n));
        let logits = b.idm.forward(&mut g, sv, nv);
        let l = g.cross_entropy(logits, &a);
        (g.value(l).data()[0], g.backward(l))
    };
    let (before, grads) = loss(&b);
    opt.apply(&mut b.store, &grads);
    let (after, _) = loss(&b);
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn idm_loss_stays_near_ln_k_on_random_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut env = Env::new(EnvName::MountainCar, 3);
    let base = collect_random(&mut env, 10, &mut rng).unwrap();
    let mut noisy = SampleSet::new();
    for t in base.transitions() {
        let mut t = t.clone();
        t.action = rng.gen_range(0..3);
        noisy.push(t, Provenance::Random);
    }
    let mut b = ModelBundle::<f64>::new(&EnvName::MountainCar.spec(), &mut rng);
    let mut opt = adam(&b, b.idm.trainable());
    let m = train_idm(&b.idm, &mut b.store, &mut opt, &noisy, 200, 64, &mut rng).unwrap();
    assert!((m.loss - 3f64.ln()).abs() < 0.1, "loss {}", m.loss);
}

#[test]
fn train_idm_rejects_empty_sample_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut b = ModelBundle::<f64>::new(&EnvName::CartPole.spec(), &mut rng);
    let mut opt = adam(&b, b.idm.trainable());
    assert!(train_idm(
        &b.idm,
        &mut b.store,
        &mut opt,
        &SampleSet::new(),
        1,
        8,
        &mut rng
    )
    .is_err());
}

#[test]
fn pseudo_labels_cover_every_transition() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = state_only(&teacher(EnvName::MountainCar, 4, 5));
    let mut with_short = t.clone();
    with_short.push(StateTrajectory {
        states: vec![t[0].states[0].clone()],
        episode_return: -1.0,
    });
    let b = ModelBundle::<f64>::new(&EnvName::MountainCar.spec(), &mut rng);
    let labels = pseudo_label(&b.idm, &b.store, &with_short, ActMode::Sample, &mut rng).unwrap();
    let expected: usize = with_short
        .iter()
        .map(|x| x.states.len().saturating_sub(1))
        .sum();
    assert_eq!(labels.iter().map(Vec::len).sum::<usize>(), expected);
    assert!(labels.last().unwrap().is_empty());
}

#[test]
fn confident_sampling_equals_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let mut logits = [0.0; 3];
        let hot = rng.gen_range(0..3);
        logits[hot] = 1e3;
        assert_eq!(
            select_action(&logits, ActMode::Sample, &mut rng),
            argmax(&logits)
        );
    }
}

#[test]
fn sample_mode_matches_softmax_frequencies() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 10_000;
    let mut counts = [0.0f64; 3];
    for _ in 0..n {
        counts[select_action(&[0.0, 0.0, 0.0], ActMode::Sample, &mut rng)] += 1.0;
    }
    let e = n as f64 / 3.0;
    let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
    assert!(chi2 < 9.21, "chi2 {chi2}");
}

#[test]
fn warmed_up_idm_agrees_with_hidden_actions() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let full = teacher(EnvName::MountainCar, 10, 8);
    let t = state_only(&full);
    let mut env = Env::new(EnvName::MountainCar, 8);
    let samples = collect_random(&mut env, 20, &mut rng).unwrap();
    let mut b = ModelBundle::<f64>::new(&EnvName::MountainCar.spec(), &mut rng);
    let all = samples.transitions();
    b.idm
        .state_norm
        .fit(&mut b.store, all.iter().map(|x| x.state.as_slice()));
    let deltas: Vec<Vec<f64>> = all
        .iter()
        .map(|x| {
            x.next_state
                .iter()
                .zip(&x.state)
                .map(|(n, s)| n - s)
                .collect()
        })
        .collect();
    b.idm
        .delta_norm
        .fit(&mut b.store, deltas.iter().map(Vec::as_slice));
    let mut opt = adam(&b, b.idm.trainable());
    train_idm(&b.idm, &mut b.store, &mut opt, &samples, 200, 128, &mut rng).unwrap();
    let labels = pseudo_label(&b.idm, &b.store, &t, ActMode::Sample, &mut rng).unwrap();
    let (mut hit, mut total) = (0, 0);
    for (traj, ls) in full.iter().zip(&labels) {
        for (a, l) in traj.hidden_actions.as_ref().unwrap().iter().zip(ls) {
            hit += usize::from(a == l);
            total += 1;
        }
    }
    let agreement = hit as f64 / total as f64;
    assert!(agreement > 1.0 / 3.0, "agreement {agreement}");
}

#[test]
fn zero_generator_weight_leaves_generator_untouched() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t = state_only(&teacher(EnvName::CartPole, 2, 9));
    let labels: Vec<Vec<usize>> = t.iter().map(|x| vec![0; x.states.len() - 1]).collect();
    let mut b = fitted_bundle(EnvName::CartPole, &t, 9);
    let before = snapshot(&b.store, &b.generator.params());
    let policy_before = snapshot(&b.store, &b.policy.params());
    let mut p = adam(&b, b.policy.trainable());
    let mut g = adam(&b, b.generator.trainable());
    let settings = BcSettings {
        steps: 10,
        batch: 16,
        lambda_g: 0.0,
        generator_loss: GeneratorLoss::Mse,
        min_max: None,
    };
    behavioural_cloning(&mut b, &mut p, &mut g, &t, &labels, &settings, &mut rng).unwrap();
    assert_eq!(snapshot(&b.store, &b.generator.params()), before);
    assert_ne!(snapshot(&b.store, &b.policy.params()), policy_before);
}

#[test]
fn positive_generator_weight_trains_both_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let t = state_only(&teacher(EnvName::MountainCar, 2, 10));
    let labels: Vec<Vec<usize>> = t.iter().map(|x| vec![2; x.states.len() - 1]).collect();
    let mut b = fitted_bundle(EnvName::MountainCar, &t, 10);
    let before = snapshot(&b.store, &b.generator.params());
    let mut p = adam(&b, b.policy.trainable());
    let mut g = adam(&b, b.generator.trainable());
    let settings = BcSettings {
        steps: 5,
        batch: 16,
        lambda_g: 1.0,
        generator_loss: GeneratorLoss::LiteralCe,
        min_max: sail_core::sail::MinMax::fit(&t),
    };
    let m = behavioural_cloning(&mut b, &mut p, &mut g, &t, &labels, &settings, &mut rng).unwrap();
    assert!(m.generator_loss.is_finite());
    assert_ne!(snapshot(&b.store, &b.generator.params()), before);
}

#[test]
fn policy_memorises_a_labelled_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let full = teacher(EnvName::CartPole, 1, 11);
    let short = vec![StateTrajectory {
        states: full[0].states[..9].to_vec(),
        episode_return: 8.0,
    }];
    let labels = vec![full[0].hidden_actions.as_ref().unwrap()[..8].to_vec()];
    let mut b = fitted_bundle(EnvName::CartPole, &short, 11);
    let mut p = adam(&b, b.policy.trainable());
    let mut g = adam(&b, b.generator.trainable());
    let settings = BcSettings {
        steps: 400,
        batch: 8,
        lambda_g: 0.0,
        generator_loss: GeneratorLoss::Mse,
        min_max: None,
    };
    behavioural_cloning(&mut b, &mut p, &mut g, &short, &labels, &settings, &mut rng).unwrap();
    let last = BcSettings {
        steps: 1,
        ..settings
    };
    let m = behavioural_cloning(&mut b, &mut p, &mut g, &short, &labels, &last, &mut rng).unwrap();
    assert!(m.policy_loss < 0.05, "loss {}", m.policy_loss);
}

#[test]
fn mismatched_labels_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let t = state_only(&teacher(EnvName::CartPole, 2, 12));
    let mut b = fitted_bundle(EnvName::CartPole, &t, 12);
    let mut p = adam(&b, b.policy.trainable());
    let mut g = adam(&b, b.generator.trainable());
    let settings = BcSettings {
        steps: 1,
        batch: 4,
        lambda_g: 0.0,
        generator_loss: GeneratorLoss::Mse,
        min_max: None,
    };
    let short = vec![vec![0; 3]; 2];
    assert!(behavioural_cloning(&mut b, &mut p, &mut g, &t, &short, &settings, &mut rng).is_err());
    assert!(
        behavioural_cloning(&mut b, &mut p, &mut g, &t, &short[..1], &settings, &mut rng).is_err()
    );
}

#[test]
fn rollouts_replay_and_add_up() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for env in EnvName::ALL {
        let b = ModelBundle::<f64>::new(&env.spec(), &mut rng);
        let eps = rollout_collect(&b.policy, &b.store, env, 3, ActMode::Sample, &mut rng).unwrap();
        assert_eq!(eps.len(), 3);
        let mut sim = Env::new(env, 0);
        for ep in &eps {
            assert_eq!(ep.episode_return, ep.rewards.iter().sum::<f64>());
            assert_eq!(ep.states.len(), ep.transitions.len() + 1);
            for t in &ep.transitions {
                sim.set_observation(&t.state).unwrap();
                let next = sim.step(t.action).unwrap().next_state;
                for (a, b) in next.iter().zip(&t.next_state) {
                    assert!((a - b).abs() <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn indistinguishable_windows_leave_discriminator_at_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let t = state_only(&teacher(EnvName::MountainCar, 5, 14));
    let mut b = fitted_bundle(EnvName::MountainCar, &t, 14);
    let mut opt = adam(&b, b.discriminator.trainable());
    let windows = sample_windows(&t, 16, 32, &mut rng).unwrap();
    let loss = discriminator_step(
        &b.discriminator,
        &mut b.store,
        &mut opt,
        &windows,
        &windows,
        &mut rng,
    )
    .unwrap();
    assert!((loss - 2.0 * 2f64.ln()).abs() < 0.05, "loss {loss}");
    let acc = discriminator_accuracy(&b.discriminator, &b.store, &windows, &windows).unwrap();
    assert_eq!(acc, 0.5);
}

#[test]
fn zero_adversarial_weight_leaves_policy_untouched() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let t = state_only(&teacher(EnvName::CartPole, 3, 15));
    let mut b = fitted_bundle(EnvName::CartPole, &t, 15);
    let replay: Vec<StateTrajectory> = rollout_collect(
        &b.policy,
        &b.store,
        EnvName::CartPole,
        3,
        ActMode::Sample,
        &mut rng,
    )
    .unwrap()
    .iter()
    .map(|e| e.state_only())
    .collect();
    let policy_before = snapshot(&b.store, &b.policy.params());
    let disc_before = snapshot(&b.store, &b.discriminator.params());
    let mut d = adam(&b, b.discriminator.trainable());
    let mut p = adam(&b, b.policy.trainable());
    let mut g = adam(&b, b.generator.trainable());
    let settings = AdvSettings {
        steps: 3,
        windows_per_side: 4,
        window: 8,
        lambda_adv: 0.0,
    };
    let loss = adversarial_update(
        &mut b, &mut d, &mut p, &mut g, &t, &replay, &settings, &mut rng,
    )
    .unwrap();
    assert!(loss.is_finite());
    let acc = measure_discriminator(&b, &t, &replay, 8, 8, &mut rng).unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(snapshot(&b.store, &b.policy.params()), policy_before);
    assert_ne!(snapshot(&b.store, &b.discriminator.params()), disc_before);

    let on = AdvSettings {
        lambda_adv: 0.5,
        ..settings
    };
    adversarial_update(&mut b, &mut d, &mut p, &mut g, &t, &replay, &on, &mut rng).unwrap();
    assert_ne!(snapshot(&b.store, &b.policy.params()), policy_before);
    assert!(adversarial_update(&mut b, &mut d, &mut p, &mut g, &t, &[], &on, &mut rng).is_err());
}

#[test]
fn filter_gate_follows_the_judge() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut env = Env::new(EnvName::CartPole, 16);
    let random = collect_random(&mut env, 3, &mut rng).unwrap();
    let episodes = vec![random.transitions().to_vec()];
    let total = episodes[0].len();

    let mut all = SampleSet::new();
    assert_eq!(
        filter_append(&mut all, &episodes, 8, |_| Ok(1.0)).unwrap(),
        total
    );
    assert_eq!(all.count(Provenance::Policy), total);

    let mut none = SampleSet::new();
    assert_eq!(
        filter_append(&mut none, &episodes, 8, |_| Ok(0.0)).unwrap(),
        0
    );
    assert!(none.is_empty());

    let mut some = SampleSet::new();
    let mut flip = false;
    let n = filter_append(&mut some, &episodes, 8, |_| {
        flip = !flip;
        Ok(if flip { 0.7 } else { 0.2 })
    })
    .unwrap();
    assert!(n <= total);
    assert_eq!(n, some.len());
}

#[test]
fn zero_epochs_returns_untrained_models() {
    let t = state_only(&teacher(EnvName::CartPole, 2, 17));
    let cfg = SailConfig {
        epochs: 0,
        ..tiny_config(17)
    };
    let out = train::<f64>(&cfg, EnvName::CartPole, &t).unwrap();
    assert!(out.log.is_empty());
    assert_eq!(out.best_epoch, None);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let fresh = ModelBundle::<f64>::new(
        &EnvName::CartPole.spec(),
        &mut ChaCha8Rng::seed_from_u64(rng.gen()),
    );
    assert_eq!(out.bundle, fresh);
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let t = state_only(&teacher(EnvName::Acrobot, 3, 18));
    let cfg = tiny_config(18);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train::<f64>(&cfg, EnvName::Acrobot, &t).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.log.to_csv(), b.log.to_csv());
    assert_eq!(a.bundle, b.bundle);
    assert_eq!(a.log.len(), 2);
    let sizes: Vec<usize> = a.log.records.iter().map(|r| r.sample_set_size).collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn ablation_never_touches_generator_or_discriminator() {
    let t = state_only(&teacher(EnvName::CartPole, 3, 19));
    let cfg = tiny_config(19);
    let untrained = train::<f64>(
        &SailConfig {
            epochs: 0,
            ..cfg.clone()
        },
        EnvName::CartPole,
        &t,
    )
    .unwrap();
    let out = baselines::train_sail_ablation::<f64>(&cfg, EnvName::CartPole, &t).unwrap();
    let b = &out.bundle;
    let u = &untrained.bundle;
    assert_eq!(
        snapshot(&b.store, &b.generator.params()),
        snapshot(&u.store, &u.generator.params())
    );
    assert_eq!(
        snapshot(&b.store, &b.discriminator.params()),
        snapshot(&u.store, &u.discriminator.params())
    );
    assert_ne!(
        snapshot(&b.store, &b.policy.params()),
        snapshot(&u.store, &u.policy.params())
    );
    // every rollout transition was appended
    for r in &out.log.records {
        assert!(r.appended > 0);
        assert!(r.discriminator_accuracy.is_nan());
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let t = state_only(&teacher(EnvName::CartPole, 1, 20));
    for cfg in [
        SailConfig {
            idm_batch: 0,
            ..tiny_config(0)
        },
        SailConfig {
            lambda_g: -1.0,
            ..tiny_config(0)
        },
        SailConfig {
            lambda_adv: f64::NAN,
            ..tiny_config(0)
        },
        SailConfig {
            learning_rate: 0.0,
            ..tiny_config(0)
        },
    ] {
        assert!(matches!(
            train::<f64>(&cfg, EnvName::CartPole, &t),
            Err(sail_core::Error::Config(_))
        ));
    }
    assert!(train::<f64>(&tiny_config(0), EnvName::CartPole, &[]).is_err());
    assert!(matches!(
        train::<f64>(&tiny_config(0), EnvName::MountainCar, &t),
        Err(sail_core::Error::Validation(_))
    ));
}
