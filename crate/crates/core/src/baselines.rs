//! Comparison agents: uniform random actions, behavioural cloning on the
//! teacher's true actions, and the imitation loop with the generator and
//! discriminator switched off.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{state_only, Trajectory};
use crate::env::{Env, EnvName};
use crate::error::{Error, Result};
use crate::models::ModelBundle;
use crate::nn::{Adam, AdamConfig};
use crate::sail::{self, behavioural_cloning, BcSettings, GeneratorLoss, SailConfig, TrainOutcome};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    Random,
    #[serde(rename = "BC")]
    Bc,
    SailNoAdversarial,
}

/// Returns of `n_episodes` uniformly random episodes.
pub fn run_random<R: Rng + ?Sized>(
    env: EnvName,
    n_episodes: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_episodes == 0 {
        return Err(Error::Usage("need at least one episode".into()));
    }
    let seeds: Vec<(u64, u64)> = (0..n_episodes).map(|_| (rng.gen(), rng.gen())).collect();
    seeds
        .par_iter()
        .map(|&(env_seed, action_seed)| {
            let mut sim = Env::new(env, env_seed);
            let mut actions = ChaCha8Rng::seed_from_u64(action_seed);
            let k = sim.spec().action_count;
            sim.reset();
            let mut total = 0.0;
            loop {
                let step = sim.step(actions.gen_range(0..k))?;
                total += step.reward;
                if step.done {
                    return Ok(total);
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            steps: 5000,
            batch: 128,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Supervised policy training on the teacher's recorded actions. Only the
/// policy inside the returned bundle is trained. No environment is touched.
pub fn train_bc<T: Scalar>(
    env: EnvName,
    teacher: &[Trajectory],
    config: &BcConfig,
) -> Result<ModelBundle<T>> {
    if teacher.is_empty() {
        return Err(Error::Usage("teacher set is empty".into()));
    }
    if config.steps == 0 || config.batch == 0 {
        return Err(Error::Config("bc steps and batch must be positive".into()));
    }
    let labels: Vec<Vec<usize>> = teacher
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.hidden_actions
                .clone()
                .ok_or_else(|| Error::Config(format!("teacher trajectory {i} carries no actions")))
        })
        .collect::<Result<_>>()?;
    let states = state_only(teacher);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut bundle = ModelBundle::<T>::new(&env.spec(), &mut ChaCha8Rng::seed_from_u64(rng.gen()));
    bundle.policy.state_norm.fit(
        &mut bundle.store,
        states.iter().flat_map(|t| &t.states).map(Vec::as_slice),
    );
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut policy_opt = Adam::new(&bundle.store, bundle.policy.trainable(), adam);
    let mut unused = Adam::new(&bundle.store, Vec::new(), adam);
    let settings = BcSettings {
        steps: config.steps,
        batch: config.batch,
        lambda_g: 0.0,
        generator_loss: GeneratorLoss::Mse,
        min_max: None,
    };
    behavioural_cloning(
        &mut bundle,
        &mut policy_opt,
        &mut unused,
        &states,
        &labels,
        &settings,
        &mut rng,
    )?;
    Ok(bundle)
}

/// The imitation loop with the generator loss, the adversarial policy
/// term and the discriminator gate all disabled.
pub fn train_sail_ablation<T: Scalar>(
    config: &SailConfig,
    env: EnvName,
    teacher: &[crate::data::StateTrajectory],
) -> Result<TrainOutcome<T>> {
    sail::train(&config.clone().ablation(), env, teacher)
}
