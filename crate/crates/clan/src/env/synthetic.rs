//! Synthetic workload: observations are seeded pseudo-random vectors and
//! the per-step reward is the negative squared distance between the
//! network output and a hidden target vector drawn once per run. The
//! target depends only on the master seed, so every node scores genomes
//! identically.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::NeatError;
use crate::rng::{derive_rng, stream};
use super::{Action, EnvSpec, Environment, StepResult};

#[derive(Debug, Clone)]
pub struct Synthetic {
    obs_dim: usize,
    target: Vec<f64>,
    max_steps: usize,
    steps: usize,
    /// Per-episode observation stream, reseeded on reset.
    obs_rng: Option<ChaCha8Rng>,
}

/// The hidden target the workload scores against.
pub fn target(spec: &EnvSpec, master_seed: u64) -> Vec<f64> {
    let dim = spec.action_dim();
    let mut rng = derive_rng(master_seed, &[stream::SYNTHETIC_TARGET]);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn observation(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Negative squared distance between `outputs` and the hidden target;
/// missing output components count as zero.
pub fn score(spec: &EnvSpec, master_seed: u64, outputs: &[f64]) -> f64 {
    let t = target(spec, master_seed);
    -t.iter()
        .enumerate()
        .map(|(i, &ti)| {
            let oi = outputs.get(i).copied().unwrap_or(0.0);
            (oi - ti) * (oi - ti)
        })
        .sum::<f64>()
}

impl Synthetic {
    pub fn new(spec: &EnvSpec, master_seed: u64) -> Self {
        Synthetic {
            obs_dim: spec.observation_dim,
            target: target(spec, master_seed),
            max_steps: spec.max_steps,
            steps: 0,
            obs_rng: None,
        }
    }
}

impl Environment for Synthetic {
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.steps = 0;
        self.obs_rng = Some(rng.clone());
        observation(self.obs_dim, self.obs_rng.as_mut().unwrap())
    }

    fn step(&mut self, action: &Action) -> Result<StepResult, NeatError> {
        let outputs = match action {
            Action::Continuous(v) => v,
            Action::Discrete(_) => {
                return Err(NeatError::InvalidAction(
                    "synthetic workload expects continuous outputs".into(),
                ))
            }
        };
        let reward = -self
            .target
            .iter()
            .enumerate()
            .map(|(i, &ti)| {
                let oi = outputs.get(i).copied().unwrap_or(0.0);
                (oi - ti) * (oi - ti)
            })
            .sum::<f64>();
        self.steps += 1;
        Ok(StepResult {
            observation: observation(self.obs_dim, self.obs_rng.as_mut().unwrap()),
            reward,
            done: self.steps >= self.max_steps,
        })
    }
}
