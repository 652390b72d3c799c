//! Classic cart-pole balancing with Euler-integrated dynamics and the
//! standard constants (pole length 0.5, masspole 0.1, masscart 1.0,
//! force 10.0, tau 0.02, 12-degree / 2.4-unit failure bounds).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::NeatError;
use super::{Action, Environment, StepResult};

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_POLE_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_POLE_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const THETA_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
const X_LIMIT: f64 = 2.4;

#[derive(Debug, Clone, Default)]
pub struct CartPole {
    x: f64,
    x_dot: f64,
    theta: f64,
    theta_dot: f64,
    done: bool,
}

impl CartPole {
    pub fn new() -> Self {
        Self::default()
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }
}

impl Environment for CartPole {
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.x = rng.random_range(-0.05..0.05);
        self.x_dot = rng.random_range(-0.05..0.05);
        self.theta = rng.random_range(-0.05..0.05);
        self.theta_dot = rng.random_range(-0.05..0.05);
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult, NeatError> {
        let push_right = match action {
            Action::Discrete(a) => *a == 1,
            Action::Continuous(_) => {
                return Err(NeatError::InvalidAction(
                    "cartpole expects a discrete action".into(),
                ))
            }
        };
        debug_assert!(!self.done, "stepping a finished episode");
        let force = if push_right { FORCE_MAG } else { -FORCE_MAG };
        let cos_theta = self.theta.cos();
        let sin_theta = self.theta.sin();
        let temp =
            (force + POLE_MASS_LENGTH * self.theta_dot * self.theta_dot * sin_theta) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin_theta - cos_theta * temp)
            / (HALF_POLE_LENGTH
                * (4.0 / 3.0 - MASS_POLE * cos_theta * cos_theta / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_theta / TOTAL_MASS;
        self.x += TAU * self.x_dot;
        self.x_dot += TAU * x_acc;
        self.theta += TAU * self.theta_dot;
        self.theta_dot += TAU * theta_acc;
        self.done = self.x.abs() > X_LIMIT || self.theta.abs() > THETA_LIMIT;
        Ok(StepResult {
            observation: self.observation(),
            reward: 1.0,
            done: self.done,
        })
    }
}
