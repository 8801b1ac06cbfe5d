//! Seedable classic-control environments: CartPole-v1, MountainCar-v0 and
//! Acrobot-v1 with discrete actions.

mod acrobot;
mod cartpole;
pub mod constants;
mod mountain_car;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use acrobot::Acrobot;
pub use cartpole::CartPole;
pub use mountain_car::MountainCar;

use crate::error::{Error, Result};

/// Observation vector. Its length is the environment's `state_dim`.
pub type StateVec = Vec<f64>;

/// Index of a discrete action, `< action_count`.
pub type ActionId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvName {
    #[serde(rename = "CartPole-v1")]
    CartPole,
    #[serde(rename = "MountainCar-v0")]
    MountainCar,
    #[serde(rename = "Acrobot-v1")]
    Acrobot,
}

impl EnvName {
    pub const ALL: [EnvName; 3] = [EnvName::CartPole, EnvName::MountainCar, EnvName::Acrobot];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::CartPole => constants::cart_pole::NAME,
            EnvName::MountainCar => constants::mountain_car::NAME,
            EnvName::Acrobot => constants::acrobot::NAME,
        }
    }

    pub fn spec(self) -> EnvSpec {
        match self {
            EnvName::CartPole => {
                use constants::cart_pole::*;
                EnvSpec {
                    name: self,
                    state_dim: STATE_DIM,
                    action_count: ACTION_COUNT,
                    max_steps: MAX_STEPS,
                    solved_threshold: Some(SOLVED_THRESHOLD),
                }
            }
            EnvName::MountainCar => {
                use constants::mountain_car::*;
                EnvSpec {
                    name: self,
                    state_dim: STATE_DIM,
                    action_count: ACTION_COUNT,
                    max_steps: MAX_STEPS,
                    solved_threshold: Some(SOLVED_THRESHOLD),
                }
            }
            EnvName::Acrobot => {
                use constants::acrobot::*;
                EnvSpec {
                    name: self,
                    state_dim: STATE_DIM,
                    action_count: ACTION_COUNT,
                    max_steps: MAX_STEPS,
                    solved_threshold: None,
                }
            }
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown environment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub name: EnvName,
    pub state_dim: usize,
    pub action_count: usize,
    pub max_steps: usize,
    pub solved_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: StateVec,
    pub reward: f64,
    /// Termination or step-limit truncation.
    pub done: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
enum Dynamics {
    CartPole(CartPole),
    MountainCar(MountainCar),
    Acrobot(Acrobot),
}

/// A single-owner environment instance with its own random stream.
#[derive(Debug, Clone)]
pub struct Env {
    spec: EnvSpec,
    dynamics: Dynamics,
    rng: ChaCha8Rng,
    steps: usize,
    done: bool,
}

static STEPS_TAKEN: AtomicU64 = AtomicU64::new(0);

/// Environment steps taken by every [`Env`] in this process so far.
pub fn total_steps() -> u64 {
    STEPS_TAKEN.load(Ordering::Relaxed)
}

pub fn make_env(name: &str, seed: u64) -> Result<Env> {
    Ok(Env::new(name.parse()?, seed))
}

impl Env {
    pub fn new(name: EnvName, seed: u64) -> Self {
        let dynamics = match name {
            EnvName::CartPole => Dynamics::CartPole(CartPole::new()),
            EnvName::MountainCar => Dynamics::MountainCar(MountainCar::new()),
            EnvName::Acrobot => Dynamics::Acrobot(Acrobot::new()),
        };
        Env {
            spec: name.spec(),
            dynamics,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
            // stepping requires a reset first
            done: true,
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn name(&self) -> EnvName {
        self.spec.name
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn reset(&mut self) -> StateVec {
        self.steps = 0;
        self.done = false;
        match &mut self.dynamics {
            Dynamics::CartPole(d) => d.reset(&mut self.rng),
            Dynamics::MountainCar(d) => d.reset(&mut self.rng),
            Dynamics::Acrobot(d) => d.reset(&mut self.rng),
        }
    }

    /// Overrides the internal state and starts a fresh episode from it.
    ///
    /// CartPole and MountainCar take their observation vector; Acrobot takes
    /// the joint state `[theta1, theta2, dtheta1, dtheta2]`.
    pub fn set_state(&mut self, state: &[f64]) -> Result<()> {
        let expected = match self.dynamics {
            Dynamics::Acrobot(_) => 4,
            _ => self.spec.state_dim,
        };
        if state.len() != expected {
            return Err(Error::shape(format!(
                "{} state needs {expected} values, got {}",
                self.spec.name,
                state.len()
            )));
        }
        match &mut self.dynamics {
            Dynamics::CartPole(d) => d.set_state(state),
            Dynamics::MountainCar(d) => d.set_state(state),
            Dynamics::Acrobot(d) => d.set_state(state),
        }
        self.steps = 0;
        self.done = false;
        Ok(())
    }

    /// Like [`Env::set_state`] but always takes an observation vector.
    /// Acrobot angles are recovered from their sines and cosines.
    pub fn set_observation(&mut self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.spec.state_dim {
            return Err(Error::shape(format!(
                "{} observation needs {} values, got {}",
                self.spec.name,
                self.spec.state_dim,
                obs.len()
            )));
        }
        match self.dynamics {
            Dynamics::Acrobot(_) => {
                let joints = [obs[1].atan2(obs[0]), obs[3].atan2(obs[2]), obs[4], obs[5]];
                self.set_state(&joints)
            }
            _ => self.set_state(obs),
        }
    }

    pub fn observe(&self) -> StateVec {
        match &self.dynamics {
            Dynamics::CartPole(d) => d.observe(),
            Dynamics::MountainCar(d) => d.observe(),
            Dynamics::Acrobot(d) => d.observe(),
        }
    }

    pub fn step(&mut self, action: ActionId) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage(
                "step called on a finished episode; call reset first".into(),
            ));
        }
        if action >= self.spec.action_count {
            return Err(Error::Usage(format!(
                "action {action} out of range for {}",
                self.spec.name
            )));
        }
        let (terminated, reward) = match &mut self.dynamics {
            Dynamics::CartPole(d) => (d.advance(action), 1.0),
            Dynamics::MountainCar(d) => (d.advance(action), -1.0),
            Dynamics::Acrobot(d) => {
                let t = d.advance(action);
                (t, if t { 0.0 } else { -1.0 })
            }
        };
        self.steps += 1;
        STEPS_TAKEN.fetch_add(1, Ordering::Relaxed);
        let truncated = !terminated && self.steps >= self.spec.max_steps;
        self.done = terminated || truncated;
        Ok(StepResult {
            next_state: self.observe(),
            reward,
            done: self.done,
            truncated,
        })
    }
}
