//! Distributed NEAT with clan-sharded speciation.
//!
//! The crate is organized around four layers:
//!
//! * [`neat`] — the evolutionary core, generic over the scalar type;
//! * [`env`] — episodic task environments (CartPole, MountainCar, a
//!   synthetic workload);
//! * [`transport`] — the wire protocol plus simulated and TCP transports;
//! * [`cluster`] — the distribution topologies and the experiment driver;
//! * [`metrics`] — the gene-denominated cost ledger and scaling analysis.

pub mod cluster;
pub mod env;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod neat;
pub mod rng;
pub mod scalar;
pub mod transport;

/// Concrete f64 aliases; the generic forms live in [`neat`].
pub type Genome = neat::genome::GenomeOf<f64>;
pub type NodeGene = neat::genome::NodeGene<f64>;
pub type ConnectionGene = neat::genome::ConnectionGene<f64>;
pub type Species = neat::speciation::SpeciesOf<f64>;
pub type Network = neat::network::Network<f64>;
