//! Task environments with a uniform episodic contract: CartPole and
//! MountainCar from their standard dynamics, plus a tunable synthetic
//! workload standing in for larger tasks.

mod cartpole;
mod mountain_car;
mod synthetic;

pub use cartpole::CartPole;
pub use mountain_car::MountainCar;
pub use synthetic::Synthetic;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::NeatError;
use crate::neat::genome::GenomeOf;
use crate::neat::network::Network;
use crate::rng::{derive_rng, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete { n: usize },
    Continuous { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    MultiStep,
    /// Exactly one forward pass per genome per generation, scored by the
    /// synthetic workload's scoring function.
    SingleStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    CartPole,
    MountainCar,
    Synthetic,
}

/// Self-describing environment parameters; enough to reconstruct the
/// environment on any node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub kind: EnvKind,
    pub observation_dim: usize,
    pub action_space: ActionSpace,
    pub max_steps: usize,
    pub solved_threshold: f64,
    /// Episodes averaged per fitness evaluation.
    pub episodes: usize,
    /// Hidden nodes seeded into initial genomes (sizes the workload).
    pub initial_hidden: usize,
    /// Modeled per-step cost multiplier for gene-op accounting.
    pub flop_scale: u64,
}

impl EnvSpec {
    pub fn cartpole() -> Self {
        EnvSpec {
            name: "cartpole".into(),
            kind: EnvKind::CartPole,
            observation_dim: 4,
            action_space: ActionSpace::Discrete { n: 2 },
            max_steps: 200,
            solved_threshold: 195.0,
            episodes: 3,
            initial_hidden: 0,
            flop_scale: 1,
        }
    }

    pub fn mountain_car() -> Self {
        EnvSpec {
            name: "mountaincar".into(),
            kind: EnvKind::MountainCar,
            observation_dim: 2,
            action_space: ActionSpace::Discrete { n: 3 },
            max_steps: 200,
            solved_threshold: -110.0,
            episodes: 3,
            initial_hidden: 0,
            flop_scale: 1,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self.action_space {
            ActionSpace::Discrete { n } => n,
            ActionSpace::Continuous { dim } => dim,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_steps < 1 {
            return Err("env.max_steps must be at least 1".into());
        }
        if self.observation_dim < 1 {
            return Err("env.observation_dim must be at least 1".into());
        }
        if self.episodes < 1 {
            return Err("env.episodes must be at least 1".into());
        }
        Ok(())
    }
}

/// A parameterized synthetic workload: seeded pseudo-random observations
/// and a smooth deterministic score, with tunable input width, episode
/// length and per-step cost.
pub fn synthetic_workload(
    obs_dim: usize,
    hidden_hint: usize,
    steps: usize,
    flop_scale: u64,
) -> EnvSpec {
    assert!(obs_dim >= 1 && steps >= 1 && flop_scale >= 1);
    EnvSpec {
        name: "synthetic".into(),
        kind: EnvKind::Synthetic,
        observation_dim: obs_dim,
        action_space: ActionSpace::Continuous { dim: 4 },
        max_steps: steps,
        // unreachable by the negative squared-distance score
        solved_threshold: 1.0,
        episodes: 1,
        initial_hidden: hidden_hint,
        flop_scale,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub total_reward: f64,
    pub steps_taken: usize,
    pub terminated_early: bool,
}

/// Single-context environment state machine.
pub trait Environment {
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    fn step(&mut self, action: &Action) -> Result<StepResult, NeatError>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

pub fn make_env(spec: &EnvSpec, master_seed: u64) -> Box<dyn Environment> {
    match spec.kind {
        EnvKind::CartPole => Box::new(CartPole::new()),
        EnvKind::MountainCar => Box::new(MountainCar::new()),
        EnvKind::Synthetic => Box::new(Synthetic::new(spec, master_seed)),
    }
}

/// Discrete action selection: argmax over outputs, ties to the lowest
/// output index.
pub fn select_action(spec: &EnvSpec, outputs: &[f64]) -> Action {
    match spec.action_space {
        ActionSpace::Discrete { n } => {
            let mut best = 0;
            for i in 1..n.min(outputs.len()) {
                if outputs[i] > outputs[best] {
                    best = i;
                }
            }
            Action::Discrete(best)
        }
        ActionSpace::Continuous { .. } => Action::Continuous(outputs.to_vec()),
    }
}

/// Outcome of one fitness evaluation, with the forward-pass count needed
/// for gene-op accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub forward_passes: u64,
}

/// Runs one seeded episode with a compiled network policy.
pub fn run_episode(
    spec: &EnvSpec,
    env: &mut dyn Environment,
    net: &Network<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeResult, NeatError> {
    let mut obs = env.reset(rng);
    let mut total = 0.0;
    let mut steps = 0;
    let mut terminated_early = false;
    while steps < spec.max_steps {
        let outputs = net.evaluate(&obs)?;
        let action = select_action(spec, &outputs);
        let result = env.step(&action)?;
        total += result.reward;
        steps += 1;
        if result.done {
            terminated_early = steps < spec.max_steps;
            break;
        }
        obs = result.observation;
    }
    Ok(EpisodeResult {
        total_reward: total,
        steps_taken: steps,
        terminated_early,
    })
}

/// Fitness of a genome on an environment.
///
/// Multi-step: mean total reward over `spec.episodes` seeded episodes.
/// Single-step: one forward pass on the synthetic observation, scored by
/// the synthetic squared-distance function. Episode seeds depend only on
/// the master seed and episode index, so a genome's fitness is identical
/// wherever and whenever it is evaluated within a run.
pub fn evaluate_genome(
    spec: &EnvSpec,
    genome: &GenomeOf<f64>,
    mode: EvalMode,
    master_seed: u64,
) -> Result<Evaluation, NeatError> {
    let expected = spec.observation_dim;
    let got = genome.input_count();
    if got != expected {
        return Err(NeatError::ArityMismatch { expected, got });
    }
    let net = Network::compile(genome)?;
    match mode {
        EvalMode::MultiStep => {
            let mut env = make_env(spec, master_seed);
            let mut total = 0.0;
            let mut passes = 0u64;
            for k in 0..spec.episodes {
                let mut rng = derive_rng(master_seed, &[stream::EPISODE, k as u64]);
                let episode = run_episode(spec, env.as_mut(), &net, &mut rng)?;
                total += episode.total_reward;
                passes += episode.steps_taken as u64;
            }
            Ok(Evaluation {
                fitness: total / spec.episodes as f64,
                forward_passes: passes,
            })
        }
        EvalMode::SingleStep => {
            let mut rng = derive_rng(master_seed, &[stream::EPISODE, 0]);
            let obs = synthetic::observation(spec.observation_dim, &mut rng);
            let outputs = net.evaluate(&obs)?;
            let fitness = synthetic::score(spec, master_seed, &outputs);
            Ok(Evaluation {
                fitness,
                forward_passes: 1,
            })
        }
    }
}
