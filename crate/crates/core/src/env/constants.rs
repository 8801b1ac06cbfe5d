//! Physical constants and episode limits for the classic-control tasks.
//!
//! Values follow the Gym reference implementations of the original
//! formulations (Barto, Sutton & Anderson 1983; Moore 1990; Sutton 1996).

pub mod cart_pole {
    pub const NAME: &str = "CartPole-v1";
    pub const GRAVITY: f64 = 9.8;
    pub const MASS_CART: f64 = 1.0;
    pub const MASS_POLE: f64 = 0.1;
    pub const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
    /// Half the pole length.
    pub const HALF_LENGTH: f64 = 0.5;
    pub const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
    pub const FORCE_MAG: f64 = 10.0;
    pub const TAU: f64 = 0.02;
    /// 12 degrees.
    pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
    pub const X_THRESHOLD: f64 = 2.4;
    pub const INIT_BOUND: f64 = 0.05;
    pub const MAX_STEPS: usize = 500;
    pub const SOLVED_THRESHOLD: f64 = 195.0;
    pub const STATE_DIM: usize = 4;
    pub const ACTION_COUNT: usize = 2;
}

pub mod mountain_car {
    pub const NAME: &str = "MountainCar-v0";
    pub const MIN_POSITION: f64 = -1.2;
    pub const MAX_POSITION: f64 = 0.6;
    pub const MAX_SPEED: f64 = 0.07;
    pub const GOAL_POSITION: f64 = 0.5;
    pub const GOAL_VELOCITY: f64 = 0.0;
    pub const FORCE: f64 = 0.001;
    pub const GRAVITY: f64 = 0.0025;
    pub const INIT_LOW: f64 = -0.6;
    pub const INIT_HIGH: f64 = -0.4;
    pub const MAX_STEPS: usize = 200;
    pub const SOLVED_THRESHOLD: f64 = -110.0;
    pub const STATE_DIM: usize = 2;
    pub const ACTION_COUNT: usize = 3;
}

pub mod acrobot {
    use std::f64::consts::PI;

    pub const NAME: &str = "Acrobot-v1";
    pub const DT: f64 = 0.2;
    pub const LINK_LENGTH_1: f64 = 1.0;
    pub const LINK_MASS_1: f64 = 1.0;
    pub const LINK_MASS_2: f64 = 1.0;
    pub const LINK_COM_POS_1: f64 = 0.5;
    pub const LINK_COM_POS_2: f64 = 0.5;
    pub const LINK_MOI: f64 = 1.0;
    pub const GRAVITY: f64 = 9.8;
    pub const MAX_VEL_1: f64 = 4.0 * PI;
    pub const MAX_VEL_2: f64 = 9.0 * PI;
    pub const AVAIL_TORQUE: [f64; 3] = [-1.0, 0.0, 1.0];
    pub const INIT_BOUND: f64 = 0.1;
    pub const MAX_STEPS: usize = 500;
    pub const STATE_DIM: usize = 6;
    pub const ACTION_COUNT: usize = 3;
}
