use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::constants::mountain_car::*;
use super::StateVec;

/// State is `[position, velocity]`.
#[derive(Debug, Clone, Default)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
}

impl MountainCar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> StateVec {
        self.position = rng.gen_range(INIT_LOW..INIT_HIGH);
        self.velocity = 0.0;
        self.observe()
    }

    pub fn observe(&self) -> StateVec {
        vec![self.position, self.velocity]
    }

    pub fn set_state(&mut self, s: &[f64]) {
        self.position = s[0];
        self.velocity = s[1];
    }

    /// Semi-implicit Euler: the new velocity moves the car.
    pub fn advance(&mut self, action: usize) -> bool {
        let push = (action as f64 - 1.0) * FORCE;
        self.velocity += push + (3.0 * self.position).cos() * (-GRAVITY);
        self.velocity = self.velocity.clamp(-MAX_SPEED, MAX_SPEED);
        self.position += self.velocity;
        self.position = self.position.clamp(MIN_POSITION, MAX_POSITION);
        if self.position == MIN_POSITION && self.velocity < 0.0 {
            self.velocity = 0.0;
        }
        self.position >= GOAL_POSITION && self.velocity >= GOAL_VELOCITY
    }
}
