//! The evolutionary core: genomes, networks, innovation tracking,
//! speciation, generation planning and the reproduction operators.

pub mod activation;
pub mod config;
pub mod genome;
pub mod innovation;
pub mod network;
pub mod plan;
pub mod reproduce;
pub mod speciation;

pub use activation::Activation;
pub use config::NeatConfig;
pub use genome::{compatibility_distance, GenomeId, InnovationId, NodeId, NodeKind};
pub use innovation::{
    replay_innovations, IdRemap, InnovationRequest, InnovationSource, InnovationTracker,
    RecordingInnovations, PROVISIONAL_BASE,
};
pub use plan::{plan_generation, GenerationPlan};
pub use reproduce::{crossover, initial_genome, mutate, INITIAL_ID_SPACE};
pub use speciation::{share_fitness, speciate, EvolutionCost};
