//! Running a policy in fresh environment instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{StateTrajectory, Transition};
use crate::env::{Env, EnvName, StateVec};
use crate::error::Result;
use crate::models::{ActMode, PolicyModel};
use crate::nn::ParamStore;
use crate::scalar::Scalar;

/// One policy episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub states: Vec<StateVec>,
    pub transitions: Vec<Transition>,
    pub rewards: Vec<f64>,
    pub episode_return: f64,
}

impl Episode {
    pub fn state_only(&self) -> StateTrajectory {
        StateTrajectory {
            states: self.states.clone(),
            episode_return: self.episode_return,
        }
    }
}

/// Seeds for the environment and for action sampling of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSeeds {
    pub env: u64,
    pub actions: u64,
}

impl EpisodeSeeds {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Self> {
        (0..n)
            .map(|_| EpisodeSeeds {
                env: rng.gen(),
                actions: rng.gen(),
            })
            .collect()
    }
}

pub fn run_episode<T: Scalar>(
    policy: &PolicyModel,
    store: &ParamStore<T>,
    env: EnvName,
    mode: ActMode,
    seeds: EpisodeSeeds,
) -> Result<Episode> {
    let mut sim = Env::new(env, seeds.env);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.actions);
    let mut state = sim.reset();
    let mut ep = Episode {
        states: vec![state.clone()],
        transitions: Vec::new(),
        rewards: Vec::new(),
        episode_return: 0.0,
    };
    loop {
        let action = policy.act(store, &state, mode, &mut rng)?;
        let step = sim.step(action)?;
        ep.rewards.push(step.reward);
        ep.episode_return += step.reward;
        ep.states.push(step.next_state.clone());
        ep.transitions.push(Transition {
            state,
            action,
            next_state: step.next_state.clone(),
        });
        state = step.next_state;
        if step.done {
            return Ok(ep);
        }
    }
}

/// Runs one episode per seed pair in parallel; results keep seed order, so
/// the outcome does not depend on the thread count.
pub fn run_episodes<T: Scalar>(
    policy: &PolicyModel,
    store: &ParamStore<T>,
    env: EnvName,
    mode: ActMode,
    seeds: &[EpisodeSeeds],
) -> Result<Vec<Episode>> {
    seeds
        .par_iter()
        .map(|&s| run_episode(policy, store, env, mode, s))
        .collect()
}

/// Collects `n_episodes` policy episodes for the sample set and replay buffer.
pub fn rollout_collect<T: Scalar, R: Rng + ?Sized>(
    policy: &PolicyModel,
    store: &ParamStore<T>,
    env: EnvName,
    n_episodes: usize,
    mode: ActMode,
    rng: &mut R,
) -> Result<Vec<Episode>> {
    let seeds = EpisodeSeeds::draw(rng, n_episodes);
    run_episodes(policy, store, env, mode, &seeds)
}

/// Policy episodes in `episodes` fresh environments seeded from `seed`.
pub fn evaluate_episodes<T: Scalar>(
    policy: &PolicyModel,
    store: &ParamStore<T>,
    env: EnvName,
    episodes: usize,
    mode: ActMode,
    seed: u64,
) -> Result<Vec<Episode>> {
    let seeds = EpisodeSeeds::draw(&mut ChaCha8Rng::seed_from_u64(seed), episodes);
    run_episodes(policy, store, env, mode, &seeds)
}

/// Episode returns of the policy over `episodes` fresh environments.
pub fn evaluate_policy<T: Scalar>(
    policy: &PolicyModel,
    store: &ParamStore<T>,
    env: EnvName,
    episodes: usize,
    mode: ActMode,
    seed: u64,
) -> Result<Vec<f64>> {
    let eps = evaluate_episodes(policy, store, env, episodes, mode, seed)?;
    Ok(eps.iter().map(|e| e.episode_return).collect())
}
