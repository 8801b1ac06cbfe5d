//! The imitation loop: inverse-dynamics labelling, behavioural cloning with
//! a forward-dynamics generator, policy rollouts, adversarial discriminator
//! training and discriminator-gated growth of the sample set.

mod epoch_log;
mod phases;
mod rollout;

pub use epoch_log::{EpochRecord, MetricsLog, LOG_COLUMNS};
pub use phases::{
    adversarial_update, behavioural_cloning, discriminator_accuracy, discriminator_step,
    filter_append, generate_windows, is_holdout, measure_discriminator, pseudo_label,
    score_generated, train_idm, AdvSettings, BcMetrics, BcSettings, GeneratorLoss, IdmMetrics,
    MinMax, LITERAL_FLOOR,
};
pub use rollout::{
    evaluate_episodes, evaluate_policy, rollout_collect, run_episode, run_episodes, Episode,
    EpisodeSeeds,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::run_random;
use crate::data::{collect_random, ReplayBuffer, SampleSet, StateTrajectory, Transition};
use crate::env::{Env, EnvName};
use crate::error::{Error, Result};
use crate::metrics::{aer, performance, ReferenceBand};
use crate::models::{ActMode, ModelBundle};
use crate::nn::{Adam, AdamConfig};
use crate::scalar::Scalar;

/// How policy transitions enter the sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Windows the discriminator classifies as teacher-like.
    #[default]
    Discriminator,
    /// Everything.
    AcceptAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SailConfig {
    pub epochs: usize,
    pub idm_steps: usize,
    pub idm_batch: usize,
    pub bc_steps: usize,
    pub bc_batch: usize,
    pub adversarial_steps: usize,
    pub rollout_episodes: usize,
    /// Discriminator window length in states.
    pub window: usize,
    /// Windows sampled per side for each discriminator step.
    pub windows_per_side: usize,
    /// Windows per side when measuring discriminator accuracy.
    pub accuracy_windows: usize,
    pub generator_loss: GeneratorLoss,
    pub lambda_g: f64,
    pub lambda_adv: f64,
    pub learning_rate: f64,
    pub initial_random_episodes: usize,
    pub replay_capacity: usize,
    pub label_mode: ActMode,
    pub rollout_mode: ActMode,
    pub eval_mode: ActMode,
    pub eval_episodes: usize,
    pub filter: FilterMode,
    /// When false the discriminator phase is skipped entirely.
    pub train_discriminator: bool,
    /// Stop after the first epoch whose evaluation AER reaches this value.
    pub stop_at_aer: Option<f64>,
    pub seed: u64,
}

impl Default for SailConfig {
    fn default() -> Self {
        SailConfig {
            epochs: 100,
            idm_steps: 500,
            idm_batch: 128,
            bc_steps: 500,
            bc_batch: 128,
            adversarial_steps: 50,
            rollout_episodes: 10,
            window: 32,
            windows_per_side: 8,
            accuracy_windows: 256,
            generator_loss: GeneratorLoss::Mse,
            lambda_g: 1.0,
            lambda_adv: 0.1,
            learning_rate: 1e-3,
            initial_random_episodes: 100,
            replay_capacity: crate::data::REPLAY_CAPACITY,
            label_mode: ActMode::Sample,
            rollout_mode: ActMode::Sample,
            eval_mode: ActMode::Argmax,
            eval_episodes: 100,
            filter: FilterMode::Discriminator,
            train_discriminator: true,
            stop_at_aer: None,
            seed: 0,
        }
    }
}

impl SailConfig {
    /// Generator and discriminator frozen, every rollout appended.
    pub fn ablation(mut self) -> Self {
        self.lambda_g = 0.0;
        self.lambda_adv = 0.0;
        self.filter = FilterMode::AcceptAll;
        self.train_discriminator = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("idm_steps", self.idm_steps),
            ("idm_batch", self.idm_batch),
            ("bc_steps", self.bc_steps),
            ("bc_batch", self.bc_batch),
            ("adversarial_steps", self.adversarial_steps),
            ("rollout_episodes", self.rollout_episodes),
            ("window", self.window),
            ("windows_per_side", self.windows_per_side),
            ("accuracy_windows", self.accuracy_windows),
            ("initial_random_episodes", self.initial_random_episodes),
            ("replay_capacity", self.replay_capacity),
            ("eval_episodes", self.eval_episodes),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        for (name, v) in [("lambda_g", self.lambda_g), ("lambda_adv", self.lambda_adv)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be a non-negative number, got {v}"
                )));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.stop_at_aer.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Config("stop_at_aer must be finite".into()));
        }
        Ok(())
    }

    /// Whether the generator takes part in training or filtering.
    pub fn uses_generator(&self) -> bool {
        self.lambda_g > 0.0 || self.lambda_adv > 0.0 || self.filter == FilterMode::Discriminator
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Models from the epoch with the best evaluation AER (the untrained
    /// models when no epoch ran).
    pub bundle: ModelBundle<T>,
    pub log: MetricsLog,
    /// 1-based epoch of `bundle`.
    pub best_epoch: Option<usize>,
    pub band: Option<ReferenceBand>,
}

fn teacher_deltas(teacher: &[StateTrajectory]) -> Vec<Vec<f64>> {
    teacher
        .iter()
        .flat_map(|t| t.states.windows(2))
        .map(|p| p[1].iter().zip(&p[0]).map(|(b, a)| b - a).collect())
        .collect()
}

fn sample_deltas(ts: &[Transition]) -> Vec<Vec<f64>> {
    ts.iter()
        .map(|t| {
            t.next_state
                .iter()
                .zip(&t.state)
                .map(|(b, a)| b - a)
                .collect()
        })
        .collect()
}

fn check_teacher(teacher: &[StateTrajectory], env: EnvName) -> Result<()> {
    if teacher.is_empty() {
        return Err(Error::Usage("teacher set is empty".into()));
    }
    let dim = env.spec().state_dim;
    if teacher
        .iter()
        .flat_map(|t| &t.states)
        .any(|s| s.len() != dim)
    {
        return Err(Error::Validation(format!(
            "teacher states do not match {env}"
        )));
    }
    if teacher.iter().all(|t| t.states.len() < 2) {
        return Err(Error::Usage("teacher set has no transitions".into()));
    }
    Ok(())
}

/// Reference band from fresh random episodes and the teacher's mean return.
pub fn measure_band<R: Rng + ?Sized>(
    env: EnvName,
    teacher: &[StateTrajectory],
    rng: &mut R,
) -> Option<ReferenceBand> {
    let random = run_random(env, 100, rng).ok()?;
    let (random_mean, _) = aer(&random).ok()?;
    let returns: Vec<f64> = teacher.iter().map(|t| t.episode_return).collect();
    let (expert_mean, _) = aer(&returns).ok()?;
    ReferenceBand::new(random_mean, expert_mean).ok()
}

/// Runs the imitation loop on state-only teacher trajectories.
pub fn train<T: Scalar>(
    config: &SailConfig,
    env: EnvName,
    teacher: &[StateTrajectory],
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    check_teacher(teacher, env)?;
    let spec = env.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut init_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut bundle = ModelBundle::<T>::new(&spec, &mut init_rng);
    if config.epochs == 0 {
        return Ok(TrainOutcome {
            bundle,
            log: MetricsLog::default(),
            best_epoch: None,
            band: None,
        });
    }

    let band = measure_band(env, teacher, &mut ChaCha8Rng::seed_from_u64(rng.gen()));
    let mut sim = Env::new(env, rng.gen());
    let mut samples: SampleSet =
        collect_random(&mut sim, config.initial_random_episodes, &mut rng)?;
    let mut replay = ReplayBuffer::new(config.replay_capacity)?;

    // standardisation is fitted once, before any training
    {
        let store = &mut bundle.store;
        let all = samples.transitions();
        bundle
            .idm
            .state_norm
            .fit(store, all.iter().map(|t| t.state.as_slice()));
        let deltas = sample_deltas(all);
        bundle
            .idm
            .delta_norm
            .fit(store, deltas.iter().map(Vec::as_slice));
        let teacher_states = || teacher.iter().flat_map(|t| &t.states).map(Vec::as_slice);
        bundle.policy.state_norm.fit(store, teacher_states());
        if config.uses_generator() {
            bundle.generator.state_norm.fit(store, teacher_states());
            let td = teacher_deltas(teacher);
            bundle
                .generator
                .delta_norm
                .fit(store, td.iter().map(Vec::as_slice));
        }
        if config.train_discriminator {
            bundle.discriminator.state_norm.fit(store, teacher_states());
        }
    }

    let adam = config.adam();
    let mut idm_opt = Adam::new(&bundle.store, bundle.idm.trainable(), adam);
    let mut policy_opt = Adam::new(&bundle.store, bundle.policy.trainable(), adam);
    let mut generator_opt = Adam::new(&bundle.store, bundle.generator.trainable(), adam);
    let mut disc_opt = Adam::new(&bundle.store, bundle.discriminator.trainable(), adam);

    let bc = BcSettings {
        steps: config.bc_steps,
        batch: config.bc_batch,
        lambda_g: config.lambda_g,
        generator_loss: config.generator_loss,
        min_max: MinMax::fit(teacher),
    };
    let adv = AdvSettings {
        steps: config.adversarial_steps,
        windows_per_side: config.windows_per_side,
        window: config.window,
        lambda_adv: config.lambda_adv,
    };

    let mut log = MetricsLog::default();
    let mut best: Option<(f64, usize, ModelBundle<T>)> = None;
    for epoch in 1..=config.epochs {
        let idm = train_idm(
            &bundle.idm,
            &mut bundle.store,
            &mut idm_opt,
            &samples,
            config.idm_steps,
            config.idm_batch,
            &mut rng,
        )?;
        let labels = pseudo_label(
            &bundle.idm,
            &bundle.store,
            teacher,
            config.label_mode,
            &mut rng,
        )?;
        let bcm = behavioural_cloning(
            &mut bundle,
            &mut policy_opt,
            &mut generator_opt,
            teacher,
            &labels,
            &bc,
            &mut rng,
        )?;
        let episodes = rollout_collect(
            &bundle.policy,
            &bundle.store,
            env,
            config.rollout_episodes,
            config.rollout_mode,
            &mut rng,
        )?;
        for ep in &episodes {
            replay.push(ep.state_only());
        }
        let discriminator_loss = if config.train_discriminator {
            let rb = replay.to_vec();
            adversarial_update(
                &mut bundle,
                &mut disc_opt,
                &mut policy_opt,
                &mut generator_opt,
                teacher,
                &rb,
                &adv,
                &mut rng,
            )?
        } else {
            f64::NAN
        };
        let fresh: Vec<Vec<Transition>> = episodes.into_iter().map(|e| e.transitions).collect();
        let appended = match config.filter {
            FilterMode::AcceptAll => {
                filter_append(&mut samples, &fresh, config.window, |_| Ok(1.0))?
            }
            FilterMode::Discriminator => {
                filter_append(&mut samples, &fresh, config.window, |chunk| {
                    score_generated(
                        &bundle.generator,
                        &bundle.discriminator,
                        &bundle.store,
                        chunk,
                    )
                })?
            }
        };
        let eval_episodes = evaluate_episodes(
            &bundle.policy,
            &bundle.store,
            env,
            config.eval_episodes,
            config.eval_mode,
            rng.gen(),
        )?;
        let returns: Vec<f64> = eval_episodes.iter().map(|e| e.episode_return).collect();
        // accuracy against the policy as it is evaluated, not the exploring one
        let discriminator_accuracy = if config.train_discriminator {
            let evaluated: Vec<StateTrajectory> =
                eval_episodes.iter().map(Episode::state_only).collect();
            measure_discriminator(
                &bundle,
                teacher,
                &evaluated,
                config.accuracy_windows,
                config.window,
                &mut rng,
            )?
        } else {
            f64::NAN
        };
        let (aer_mean, aer_std) = aer(&returns)?;
        let perf = band
            .as_ref()
            .map_or(Ok(f64::NAN), |b| performance(&returns, b))?;

        let record = EpochRecord {
            epoch,
            idm_loss: idm.loss,
            idm_holdout_accuracy: idm.holdout_accuracy,
            policy_loss: bcm.policy_loss,
            generator_loss: bcm.generator_loss,
            discriminator_loss,
            discriminator_accuracy,
            eval_aer_mean: aer_mean,
            eval_aer_std: aer_std,
            eval_performance: perf,
            sample_set_size: samples.len(),
            appended,
        };
        log::info!(
            "{env} epoch {epoch}: aer {aer_mean:.2} ± {aer_std:.2}, idm acc {:.3}, d acc {:.3}, g loss {:.4}, appended {appended}",
            idm.holdout_accuracy,
            discriminator_accuracy,
            bcm.generator_loss
        );
        log.records.push(record);

        if best.as_ref().is_none_or(|(b, _, _)| aer_mean > *b) {
            best = Some((aer_mean, epoch, bundle.clone()));
        }
        if config.stop_at_aer.is_some_and(|target| aer_mean >= target) {
            break;
        }
    }
    let (_, best_epoch, best_bundle) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        bundle: best_bundle,
        log,
        best_epoch: Some(best_epoch),
        band,
    })
}
