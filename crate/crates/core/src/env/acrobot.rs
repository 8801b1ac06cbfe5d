use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::constants::acrobot::*;
use super::StateVec;

/// Internal state is `[theta1, theta2, dtheta1, dtheta2]`; observations expose
/// `[cos theta1, sin theta1, cos theta2, sin theta2, dtheta1, dtheta2]`.
#[derive(Debug, Clone, Default)]
pub struct Acrobot {
    state: [f64; 4],
}

impl Acrobot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> StateVec {
        for s in self.state.iter_mut() {
            *s = rng.gen_range(-INIT_BOUND..INIT_BOUND);
        }
        self.observe()
    }

    pub fn observe(&self) -> StateVec {
        let [t1, t2, d1, d2] = self.state;
        vec![t1.cos(), t1.sin(), t2.cos(), t2.sin(), d1, d2]
    }

    /// Sets the internal joint state `[theta1, theta2, dtheta1, dtheta2]`.
    pub fn set_state(&mut self, s: &[f64]) {
        self.state.copy_from_slice(&s[..4]);
    }

    pub fn joint_state(&self) -> [f64; 4] {
        self.state
    }

    pub fn advance(&mut self, action: usize) -> bool {
        let torque = AVAIL_TORQUE[action];
        let mut next = rk4_step(&self.state, torque, DT);
        next[0] = wrap(next[0], -PI, PI);
        next[1] = wrap(next[1], -PI, PI);
        next[2] = next[2].clamp(-MAX_VEL_1, MAX_VEL_1);
        next[3] = next[3].clamp(-MAX_VEL_2, MAX_VEL_2);
        self.state = next;
        let [t1, t2, _, _] = self.state;
        -t1.cos() - (t2 + t1).cos() > 1.0
    }
}

fn wrap(mut x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    while x > hi {
        x -= span;
    }
    while x < lo {
        x += span;
    }
    x
}

fn rk4_step(y: &[f64; 4], torque: f64, h: f64) -> [f64; 4] {
    let offset = |base: &[f64; 4], k: &[f64; 4], scale: f64| {
        let mut out = *base;
        for i in 0..4 {
            out[i] += scale * k[i];
        }
        out
    };
    let k1 = derivatives(y, torque);
    let k2 = derivatives(&offset(y, &k1, h / 2.0), torque);
    let k3 = derivatives(&offset(y, &k2, h / 2.0), torque);
    let k4 = derivatives(&offset(y, &k3, h), torque);
    let mut out = *y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Equations of motion in the "book" formulation.
fn derivatives(s: &[f64; 4], torque: f64) -> [f64; 4] {
    let m1 = LINK_MASS_1;
    let m2 = LINK_MASS_2;
    let l1 = LINK_LENGTH_1;
    let lc1 = LINK_COM_POS_1;
    let lc2 = LINK_COM_POS_2;
    let i1 = LINK_MOI;
    let i2 = LINK_MOI;
    let g = GRAVITY;
    let [theta1, theta2, dtheta1, dtheta2] = *s;

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 =
        (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
            / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}
