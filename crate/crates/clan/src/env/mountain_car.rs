//! Mountain-car with the standard discrete dynamics: position clipped to
//! [-1.2, 0.6], velocity to [-0.07, 0.07], goal at position 0.5, reward
//! -1 per step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::NeatError;
use super::{Action, Environment, StepResult};

const MIN_POSITION: f64 = -1.2;
const MAX_POSITION: f64 = 0.6;
const MAX_SPEED: f64 = 0.07;
const GOAL_POSITION: f64 = 0.5;
const FORCE: f64 = 0.001;
const GRAVITY: f64 = 0.0025;

#[derive(Debug, Clone, Default)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
    done: bool,
}

impl MountainCar {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Environment for MountainCar {
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.position = rng.random_range(-0.6..-0.4);
        self.velocity = 0.0;
        self.done = false;
        vec![self.position, self.velocity]
    }

    fn step(&mut self, action: &Action) -> Result<StepResult, NeatError> {
        let a = match action {
            // 0 = push left, 1 = coast, 2 = push right
            Action::Discrete(a) if *a < 3 => *a as f64 - 1.0,
            _ => {
                return Err(NeatError::InvalidAction(
                    "mountain car expects a discrete action in 0..3".into(),
                ))
            }
        };
        debug_assert!(!self.done, "stepping a finished episode");
        self.velocity += a * FORCE - GRAVITY * (3.0 * self.position).cos();
        self.velocity = self.velocity.clamp(-MAX_SPEED, MAX_SPEED);
        self.position += self.velocity;
        self.position = self.position.clamp(MIN_POSITION, MAX_POSITION);
        if self.position <= MIN_POSITION && self.velocity < 0.0 {
            self.velocity = 0.0;
        }
        self.done = self.position >= GOAL_POSITION;
        Ok(StepResult {
            observation: vec![self.position, self.velocity],
            reward: -1.0,
            done: self.done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    /// Hand-computed single transition from a fixed state.
    #[test]
    fn single_step_matches_hand_computation() {
        let mut env = MountainCar {
            position: -0.5,
            velocity: 0.01,
            done: false,
        };
        let r = env.step(&Action::Discrete(2)).unwrap();
        let v = 0.01 + 0.001 - 0.0025 * (-1.5_f64).cos();
        assert!((r.observation[1] - v).abs() < 1e-15);
        assert!((r.observation[0] - (-0.5 + v)).abs() < 1e-15);
        assert_eq!(r.reward, -1.0);
        assert!(!r.done);
    }

    #[test]
    fn velocity_is_clamped() {
        let mut env = MountainCar {
            position: -1.0,
            velocity: 0.069,
            done: false,
        };
        // Free-fall down the slope exceeds the speed limit without clamping.
        let r = env.step(&Action::Discrete(2)).unwrap();
        assert!(r.observation[1].abs() <= MAX_SPEED);
    }

    #[test]
    fn reaching_the_goal_terminates() {
        let mut env = MountainCar {
            position: 0.49,
            velocity: 0.05,
            done: false,
        };
        let r = env.step(&Action::Discrete(2)).unwrap();
        assert!(r.done);
        assert!(r.observation[0] >= GOAL_POSITION);
    }

    #[test]
    fn reset_range_matches_convention() {
        let mut env = MountainCar::new();
        for s in 0..20 {
            let obs = env.reset(&mut derive_rng(s, &[2]));
            assert!(obs[0] >= -0.6 && obs[0] < -0.4);
            assert_eq!(obs[1], 0.0);
        }
    }

    #[test]
    fn left_wall_inelastic() {
        let mut env = MountainCar {
            position: -1.2,
            velocity: -0.05,
            done: false,
        };
        let r = env.step(&Action::Discrete(0)).unwrap();
        assert_eq!(r.observation[0], -1.2);
        assert_eq!(r.observation[1], 0.0);
    }
}
