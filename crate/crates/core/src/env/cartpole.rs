use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::constants::cart_pole::*;
use super::StateVec;

#[derive(Debug, Clone)]
pub struct CartPole {
    x: f64,
    x_dot: f64,
    theta: f64,
    theta_dot: f64,
}

impl CartPole {
    pub fn new() -> Self {
        CartPole {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.0,
            theta_dot: 0.0,
        }
    }

    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> StateVec {
        self.x = rng.gen_range(-INIT_BOUND..INIT_BOUND);
        self.x_dot = rng.gen_range(-INIT_BOUND..INIT_BOUND);
        self.theta = rng.gen_range(-INIT_BOUND..INIT_BOUND);
        self.theta_dot = rng.gen_range(-INIT_BOUND..INIT_BOUND);
        self.observe()
    }

    pub fn observe(&self) -> StateVec {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn set_state(&mut self, s: &[f64]) {
        self.x = s[0];
        self.x_dot = s[1];
        self.theta = s[2];
        self.theta_dot = s[3];
    }

    /// Advances one tick; returns whether the pole fell or the cart left the track.
    pub fn advance(&mut self, action: usize) -> bool {
        let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
        let (sin_t, cos_t) = self.theta.sin_cos();
        let temp =
            (force + POLE_MASS_LENGTH * self.theta_dot * self.theta_dot * sin_t) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin_t - cos_t * temp)
            / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t * cos_t / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS;

        // explicit Euler, as in the reference implementation
        self.x += TAU * self.x_dot;
        self.x_dot += TAU * x_acc;
        self.theta += TAU * self.theta_dot;
        self.theta_dot += TAU * theta_acc;

        self.x < -X_THRESHOLD
            || self.x > X_THRESHOLD
            || self.theta < -THETA_THRESHOLD
            || self.theta > THETA_THRESHOLD
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}
