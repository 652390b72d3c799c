//! Message types, the framed wire protocol, and the two interchangeable
//! transports: a deterministic in-process network simulation and real TCP
//! sockets. Both carry the identical byte format, so the simulation's
//! communication totals are exactly what the sockets would move.

pub mod sim;
pub mod socket;
pub mod wire;

use serde::{Deserialize, Serialize};

use crate::env::{EnvSpec, EvalMode};
use crate::error::TransportError;
use crate::neat::config::NeatConfig;
use crate::neat::genome::{GenomeId, GenomeOf};
use crate::neat::innovation::InnovationRequest;

/// Node addresses: the center is 0, agents are 1..=n.
pub type NodeAddr = u16;

pub const CENTER: NodeAddr = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: NodeAddr,
    pub receiver: NodeAddr,
    pub generation: u32,
    pub payload: Payload,
}

/// Why a batch of genomes is being shipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenomePurpose {
    /// Center -> agent: evaluate these and report fitness.
    Evaluate,
    /// Center -> agent: parent pool for remote reproduction.
    Parents,
    /// Agent -> center: bred children (with innovation logs).
    Children,
}

/// One genome in flight, tagged with the sender's slot numbering so replies
/// can be matched without trusting genome ids across namespaces.
#[derive(Debug, Clone, PartialEq)]
pub struct GenomeEntry {
    pub slot: u32,
    pub genome: GenomeOf<f64>,
    /// Ordered structural-gene requests made while breeding this genome;
    /// empty unless the purpose is `Children`.
    pub innovation_log: Vec<InnovationRequest>,
}

/// One reproduction assignment for a remote agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BreedItem {
    pub child_slot: u32,
    /// Slot of the first parent in the agent's parent pool.
    pub parent_a: u32,
    /// Slot of the second parent; equal to `parent_a` for elites.
    pub parent_b: u32,
    /// Elites are copied verbatim, skipping crossover and mutation.
    pub elite: bool,
    pub child_genome_id: GenomeId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessEntry {
    pub slot: u32,
    pub genome_id: GenomeId,
    pub fitness: f64,
    /// Gene-ops the evaluation cost, for the compute ledger.
    pub eval_gene_ops: u64,
}

/// Per-clan progress summary; the only steady-state traffic in the fully
/// asynchronous topology.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Telemetry {
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub species_count: u32,
    pub population_size: u32,
    pub inference_gene_ops: u64,
    pub evolution_gene_ops: u64,
    pub best_genome_genes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanDecision {
    Continue,
    Stop,
}

/// Run parameters every node needs before the first generation. Sent once,
/// JSON-encoded (the only non-fixed-layout payload; it is negligible in the
/// communication budget and benefits from being self-describing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitPayload {
    pub master_seed: u64,
    pub clan_id: u32,
    pub agent_count: u16,
    pub env: EnvSpec,
    pub neat: NeatConfig,
    pub eval_mode: EvalMode,
    /// Modeled seconds per gene-op, for logical compute timing.
    pub sec_per_gene_op: f64,
    /// True when this agent hosts a whole clan (fully distributed mode)
    /// rather than serving as a stateless worker.
    pub clan_mode: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Init(InitPayload),
    Genomes {
        purpose: GenomePurpose,
        entries: Vec<GenomeEntry>,
    },
    WorkItems(Vec<BreedItem>),
    FitnessReport(Vec<FitnessEntry>),
    Plan(PlanDecision),
    Telemetry(Telemetry),
    Stop,
}

impl Payload {
    /// Genome genes carried by this message (zero for non-genome payloads).
    /// This is the quantity the clan topology drives to zero after the
    /// first generation.
    pub fn genome_genes(&self) -> u64 {
        match self {
            Payload::Genomes { entries, .. } => {
                entries.iter().map(|e| e.genome.gene_count()).sum()
            }
            _ => 0,
        }
    }
}

/// Blocking message-passing endpoint used by the center drivers. The
/// simulated and socket transports both implement it.
pub trait Transport {
    fn send(&mut self, msg: Message) -> Result<(), TransportError>;
    /// Next message addressed to this endpoint, in delivery order.
    fn recv(&mut self) -> Result<Message, TransportError>;
}

/// Logical-time hooks for the center. The simulation advances its clock
/// for center-side compute; real transports run on wall time and ignore
/// these.
pub trait ModelClock {
    fn advance_center(&mut self, _seconds: f64) {}
    fn model_now(&self) -> f64 {
        0.0
    }
}

impl ModelClock for socket::CenterHub {}
