//! Scripted controllers that produce teacher demonstrations.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Trajectory;
use crate::env::{ActionId, Env, EnvName, MountainCar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExpertKind {
    /// Push toward the side the pole is falling, with a velocity term.
    CartPolePD,
    /// Accelerate with the current velocity; right when standing still.
    MountainCarEnergy,
    /// One-step lookahead over a velocity-following rule.
    MountainCarLookahead,
    /// Torque in the direction of the relative joint velocity.
    AcrobotEnergy,
}

const CARTPOLE_GAINS: [f64; 4] = [0.05, 0.1, 1.0, 0.5];
// slightly negative threshold on the left slope lets the car roll back sooner
const MC_LEFT_SLOPE_THRESHOLD: f64 = -0.01;
const MC_LOOKAHEAD_LIMIT: usize = 250;

impl ExpertKind {
    pub const ALL: [ExpertKind; 4] = [
        ExpertKind::CartPolePD,
        ExpertKind::MountainCarEnergy,
        ExpertKind::MountainCarLookahead,
        ExpertKind::AcrobotEnergy,
    ];

    pub fn env(self) -> EnvName {
        match self {
            ExpertKind::CartPolePD => EnvName::CartPole,
            ExpertKind::MountainCarEnergy | ExpertKind::MountainCarLookahead => {
                EnvName::MountainCar
            }
            ExpertKind::AcrobotEnergy => EnvName::Acrobot,
        }
    }

    /// The teacher used for `env` unless one is named explicitly.
    pub fn default_for(env: EnvName) -> Self {
        match env {
            EnvName::CartPole => ExpertKind::CartPolePD,
            EnvName::MountainCar => ExpertKind::MountainCarLookahead,
            EnvName::Acrobot => ExpertKind::AcrobotEnergy,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExpertKind::CartPolePD => "CartPolePD",
            ExpertKind::MountainCarEnergy => "MountainCarEnergy",
            ExpertKind::MountainCarLookahead => "MountainCarLookahead",
            ExpertKind::AcrobotEnergy => "AcrobotEnergy",
        }
    }
}

impl fmt::Display for ExpertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExpertKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExpertKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown expert controller {s:?}")))
    }
}

pub fn default_min_return(env: EnvName) -> f64 {
    match env {
        EnvName::CartPole => 475.0,
        EnvName::MountainCar => -110.0,
        EnvName::Acrobot => -100.0,
    }
}

fn mc_velocity_rule(p: f64, v: f64) -> ActionId {
    let threshold = if p < -0.5 {
        MC_LEFT_SLOPE_THRESHOLD
    } else {
        0.0
    };
    if v > threshold {
        2
    } else {
        0
    }
}

fn mc_steps_to_goal(car: &mut MountainCar) -> usize {
    for n in 0..MC_LOOKAHEAD_LIMIT {
        let s = car.observe();
        if car.advance(mc_velocity_rule(s[0], s[1])) {
            return n + 1;
        }
    }
    MC_LOOKAHEAD_LIMIT + 1
}

fn mc_lookahead(state: &[f64]) -> ActionId {
    let mut best = (usize::MAX, 0);
    // ties prefer decisive pushes over coasting
    for action in [0, 2, 1] {
        let mut car = MountainCar::new();
        car.set_state(state);
        let cost = if car.advance(action) {
            1
        } else {
            1 + mc_steps_to_goal(&mut car)
        };
        if cost < best.0 {
            best = (cost, action);
        }
    }
    best.1
}

/// The controller's action for `state`. Pure function of the state.
pub fn expert_act(kind: ExpertKind, state: &[f64]) -> Result<ActionId> {
    let dim = kind.env().spec().state_dim;
    if state.len() != dim {
        return Err(Error::shape(format!(
            "{kind} expects {dim} state values, got {}",
            state.len()
        )));
    }
    Ok(match kind {
        ExpertKind::CartPolePD => {
            let u: f64 = CARTPOLE_GAINS.iter().zip(state).map(|(k, s)| k * s).sum();
            usize::from(u > 0.0)
        }
        ExpertKind::MountainCarEnergy => {
            if state[1] >= 0.0 {
                2
            } else {
                0
            }
        }
        ExpertKind::MountainCarLookahead => mc_lookahead(state),
        ExpertKind::AcrobotEnergy => {
            if 0.5 * state[5] - 0.25 * state[4] > 0.0 {
                2
            } else {
                0
            }
        }
    })
}

/// Plays one full episode with the controller, recording its actions.
pub fn run_episode(env: &mut Env, kind: ExpertKind) -> Result<Trajectory> {
    let mut states = vec![env.reset()];
    let mut actions = Vec::new();
    let mut total = 0.0;
    loop {
        let a = expert_act(kind, states.last().expect("non-empty"))?;
        let step = env.step(a)?;
        total += step.reward;
        actions.push(a);
        states.push(step.next_state);
        if step.done {
            break;
        }
    }
    Ok(Trajectory {
        states,
        hidden_actions: Some(actions),
        episode_return: total,
    })
}

/// Runs the controller until `n_episodes` episodes with return at least
/// `min_return` are collected, giving up after `50 * n_episodes` attempts.
pub fn generate_teacher<R: Rng + ?Sized>(
    env: EnvName,
    kind: ExpertKind,
    n_episodes: usize,
    min_return: f64,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    if n_episodes == 0 {
        return Err(Error::Usage(
            "teacher set needs at least one episode".into(),
        ));
    }
    if kind.env() != env {
        return Err(Error::Config(format!("{kind} does not control {env}")));
    }
    let mut sim = Env::new(env, rng.gen());
    let cap = 50 * n_episodes;
    let mut kept = Vec::with_capacity(n_episodes);
    let mut returns = Vec::new();
    while kept.len() < n_episodes {
        if returns.len() == cap {
            let mean = returns.iter().sum::<f64>() / returns.len() as f64;
            let best = returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            return Err(Error::Quality(format!(
                "{kind} kept {} of {n_episodes} episodes after {cap} attempts \
                 (min_return {min_return}, mean return {mean:.2}, best {best:.2})",
                kept.len()
            )));
        }
        let t = run_episode(&mut sim, kind)?;
        returns.push(t.episode_return);
        if t.episode_return >= min_return {
            kept.push(t);
        }
    }
    log::info!(
        "{kind}: kept {n_episodes} episodes from {} attempts",
        returns.len()
    );
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn mean(ts: &[Trajectory]) -> f64 {
        ts.iter().map(|t| t.episode_return).sum::<f64>() / ts.len() as f64
    }

    #[test]
    fn mountain_car_energy_follows_velocity() {
        assert_eq!(
            expert_act(ExpertKind::MountainCarEnergy, &[-0.5, 0.01]).unwrap(),
            2
        );
        assert_eq!(
            expert_act(ExpertKind::MountainCarEnergy, &[-0.5, -0.01]).unwrap(),
            0
        );
        assert_eq!(
            expert_act(ExpertKind::MountainCarEnergy, &[-0.5, 0.0]).unwrap(),
            2
        );
    }

    #[test]
    fn cartpole_upright_ties_to_zero() {
        assert_eq!(expert_act(ExpertKind::CartPolePD, &[0.0; 4]).unwrap(), 0);
        assert_eq!(
            expert_act(ExpertKind::CartPolePD, &[0.0, 0.0, 0.05, 0.0]).unwrap(),
            1
        );
        assert_eq!(
            expert_act(ExpertKind::CartPolePD, &[0.0, 0.0, -0.05, 0.0]).unwrap(),
            0
        );
    }

    #[test]
    fn controllers_reject_wrong_dimension() {
        for kind in ExpertKind::ALL {
            assert!(matches!(expert_act(kind, &[0.0; 5]), Err(Error::Shape(_))));
        }
    }

    #[test]
    fn controllers_are_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in ExpertKind::ALL {
            let mut env = Env::new(kind.env(), rng.gen());
            let s = env.reset();
            assert_eq!(expert_act(kind, &s).unwrap(), expert_act(kind, &s).unwrap());
        }
    }

    #[test]
    fn cartpole_teacher_meets_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ts = generate_teacher(
            EnvName::CartPole,
            ExpertKind::CartPolePD,
            100,
            475.0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(ts.len(), 100);
        assert!(ts.iter().all(|t| t.episode_return >= 475.0));
    }

    #[test]
    fn mountain_car_teacher_averages_above_solved() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let kind = ExpertKind::MountainCarLookahead;
        let ts = generate_teacher(EnvName::MountainCar, kind, 100, -110.0, &mut rng).unwrap();
        assert!(ts.iter().all(|t| t.episode_return >= -110.0));
        assert!(mean(&ts) >= -110.0, "{}", mean(&ts));
    }

    #[test]
    fn lookahead_beats_plain_rule_unfiltered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seed = rng.gen();
        let plain = generate_teacher(
            EnvName::MountainCar,
            ExpertKind::MountainCarEnergy,
            50,
            f64::NEG_INFINITY,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        let look = generate_teacher(
            EnvName::MountainCar,
            ExpertKind::MountainCarLookahead,
            50,
            f64::NEG_INFINITY,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        assert!(
            mean(&look) > mean(&plain),
            "{} vs {}",
            mean(&look),
            mean(&plain)
        );
        assert!(mean(&look) >= -110.0);
    }

    #[test]
    fn acrobot_teacher_meets_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ts = generate_teacher(
            EnvName::Acrobot,
            ExpertKind::AcrobotEnergy,
            20,
            -100.0,
            &mut rng,
        )
        .unwrap();
        assert!(ts.iter().all(|t| t.episode_return >= -100.0));
    }

    #[test]
    fn no_filter_keeps_first_episodes() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let ts = generate_teacher(
            EnvName::Acrobot,
            ExpertKind::AcrobotEnergy,
            5,
            f64::NEG_INFINITY,
            &mut a,
        )
        .unwrap();
        let mut env = Env::new(EnvName::Acrobot, ChaCha8Rng::seed_from_u64(5).gen());
        for t in &ts {
            assert_eq!(
                t,
                &run_episode(&mut env, ExpertKind::AcrobotEnergy).unwrap()
            );
        }
    }

    #[test]
    fn impossible_threshold_is_a_quality_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let err = generate_teacher(
            EnvName::MountainCar,
            ExpertKind::MountainCarEnergy,
            2,
            -50.0,
            &mut rng,
        )
        .unwrap_err();
        match err {
            Error::Quality(m) => assert!(m.contains("MountainCarEnergy")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn recorded_returns_match_rewards() {
        let mut env = Env::new(EnvName::MountainCar, 7);
        let t = run_episode(&mut env, ExpertKind::MountainCarLookahead).unwrap();
        assert_eq!(t.episode_return, -(t.transitions() as f64));
    }
}
