//! Center-side drivers for the serial baseline and the three distribution
//! topologies.
//!
//! * `run_serial` — everything on one node; the correctness oracle.
//! * `run_dcs` — distributed inference, central reproduction/speciation.
//! * `run_dds` — distributed inference and reproduction, central
//!   synchronous speciation (the costliest in communication).
//! * `run_dda` — fully distributed asynchronous clans; after the initial
//!   population ships, only telemetry and control cross the network.
//!
//! The partially distributed drivers are bit-identical to the serial
//! baseline by construction: randomness is drawn from per-child streams,
//! fitness is matched by slot, and remote innovation logs are replayed at
//! the center in global child order.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::env::{EnvSpec, EvalMode};
use crate::error::{NeatError, RunError, TransportError};
use crate::metrics::{ChargeKind, CostLedger};
use crate::neat::config::NeatConfig;
use crate::neat::innovation::replay_innovations;
use crate::transport::wire::frame_len;
use crate::transport::{
    BreedItem, GenomeEntry, GenomePurpose, InitPayload, Message, ModelClock, NodeAddr, Payload,
    PlanDecision, Transport, CENTER,
};

use super::evolver::{ChildKind, ClanEvolver, GenerationStat, Genome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Serial,
    /// Distributed inference, central speciation and reproduction.
    Dcs,
    /// Distributed inference and reproduction, central speciation.
    Dds,
    /// Fully distributed asynchronous clans.
    Dda,
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Topology::Serial => "serial",
            Topology::Dcs => "dcs",
            Topology::Dds => "dds",
            Topology::Dda => "dda",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub env: EnvSpec,
    pub neat: NeatConfig,
    pub eval_mode: EvalMode,
    pub master_seed: u64,
    pub max_generations: u32,
    /// Modeled seconds per gene-op for logical timing.
    pub sec_per_gene_op: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub topology: Topology,
    pub history: Vec<GenerationStat>,
    pub best_genome: Genome,
    /// The population at the moment the run stopped (clan champions for
    /// the fully distributed topology, which never centralizes members).
    pub final_population: Vec<Genome>,
    pub ledger: CostLedger,
    pub generations_run: u32,
    pub solved: bool,
    /// Simulated wall-clock seconds (zero under real transports, which
    /// run on actual wall time).
    pub model_seconds: f64,
}

/// Ledger wrapper that attributes every frame to its sender.
struct Accounting {
    ledger: CostLedger,
}

impl Accounting {
    fn new() -> Self {
        Accounting {
            ledger: CostLedger::new(),
        }
    }

    fn on_message(&mut self, msg: &Message) -> Result<(), RunError> {
        let bytes = frame_len(msg) as i64;
        let genes = msg.payload.genome_genes() as i64;
        let g = msg.generation;
        let s = msg.sender;
        self.ledger.charge(g, s, ChargeKind::CommBytes, bytes)?;
        self.ledger.charge(g, s, ChargeKind::GenomeGenesSent, genes)?;
        self.ledger.charge(g, s, ChargeKind::MessagesSent, 1)?;
        Ok(())
    }
}

fn send<T: Transport>(
    t: &mut T,
    acc: &mut Accounting,
    msg: Message,
) -> Result<(), RunError> {
    acc.on_message(&msg)?;
    t.send(msg)?;
    Ok(())
}

fn recv<T: Transport>(t: &mut T, acc: &mut Accounting) -> Result<Message, RunError> {
    let msg = t.recv()?;
    acc.on_message(&msg)?;
    Ok(msg)
}

/// Splits `total` into `parts` contiguous chunk sizes, remainders to the
/// front.
fn split_sizes(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let rem = total % parts;
    (0..parts).map(|i| base + usize::from(i < rem)).collect()
}

pub fn run_serial(params: &RunParams) -> Result<RunResult, RunError> {
    let mut evolver = ClanEvolver::new(
        0,
        params.neat.clone(),
        params.env.clone(),
        params.eval_mode,
        params.master_seed,
        params.neat.population_size,
    );
    let mut ledger = CostLedger::new();
    let mut history = Vec::new();
    let mut solved = false;
    let mut total_ops = 0u64;
    for generation in 0..params.max_generations {
        let iops = evolver.evaluate_local()?;
        total_ops += iops;
        ledger.charge(generation, CENTER, ChargeKind::InferenceCompute, iops as i64)?;
        let stat = evolver.stats();
        history.push(stat);
        if stat.best_fitness >= params.env.solved_threshold {
            solved = true;
            break;
        }
        if generation + 1 == params.max_generations {
            break;
        }
        let eops = evolver.evolution_step()?;
        total_ops += eops;
        ledger.charge(generation, CENTER, ChargeKind::EvolutionCompute, eops as i64)?;
    }
    Ok(RunResult {
        topology: Topology::Serial,
        history,
        best_genome: evolver.best.clone().expect("at least one generation ran"),
        final_population: evolver.population.clone(),
        ledger,
        generations_run: evolver.generation + 1,
        solved,
        model_seconds: total_ops as f64 * params.sec_per_gene_op,
    })
}

fn init_payload(params: &RunParams, clan_id: u32, agent_count: u16, clan_mode: bool) -> InitPayload {
    InitPayload {
        master_seed: params.master_seed,
        clan_id,
        agent_count,
        env: params.env.clone(),
        neat: params.neat.clone(),
        eval_mode: params.eval_mode,
        sec_per_gene_op: params.sec_per_gene_op,
        clan_mode,
    }
}

/// Farms the current population out for evaluation and installs the
/// reported fitness by slot.
fn distributed_evaluate<T: Transport>(
    t: &mut T,
    acc: &mut Accounting,
    evolver: &mut ClanEvolver,
    agents: &[NodeAddr],
    generation: u32,
) -> Result<(), RunError> {
    let sizes = split_sizes(evolver.population.len(), agents.len());
    let mut start = 0usize;
    for (&agent, &size) in agents.iter().zip(&sizes) {
        if size == 0 {
            continue;
        }
        let entries: Vec<GenomeEntry> = (start..start + size)
            .map(|slot| GenomeEntry {
                slot: slot as u32,
                genome: evolver.population[slot].clone(),
                innovation_log: Vec::new(),
            })
            .collect();
        send(
            t,
            acc,
            Message {
                sender: CENTER,
                receiver: agent,
                generation,
                payload: Payload::Genomes {
                    purpose: GenomePurpose::Evaluate,
                    entries,
                },
            },
        )?;
        start += size;
    }
    let mut remaining = evolver.population.len();
    while remaining > 0 {
        let msg = recv(t, acc)?;
        let Payload::FitnessReport(entries) = msg.payload else {
            return Err(TransportError::HandshakeRejected(format!(
                "unexpected payload from agent {} during evaluation",
                msg.sender
            ))
            .into());
        };
        for e in &entries {
            evolver.set_fitness(e.slot as usize, e.fitness);
            acc.ledger.charge(
                generation,
                msg.sender,
                ChargeKind::InferenceCompute,
                e.eval_gene_ops as i64,
            )?;
        }
        remaining -= entries.len();
    }
    evolver.refresh_best();
    Ok(())
}

fn broadcast_stop<T: Transport>(
    t: &mut T,
    acc: &mut Accounting,
    agents: &[NodeAddr],
    generation: u32,
) -> Result<(), RunError> {
    for &agent in agents {
        send(
            t,
            acc,
            Message {
                sender: CENTER,
                receiver: agent,
                generation,
                payload: Payload::Stop,
            },
        )?;
    }
    Ok(())
}

pub fn run_dcs<T: Transport + ModelClock>(
    t: &mut T,
    agents: &[NodeAddr],
    params: &RunParams,
) -> Result<RunResult, RunError> {
    assert!(!agents.is_empty());
    let mut acc = Accounting::new();
    for &agent in agents {
        send(
            t,
            &mut acc,
            Message {
                sender: CENTER,
                receiver: agent,
                generation: 0,
                payload: Payload::Init(init_payload(params, 0, agents.len() as u16, false)),
            },
        )?;
    }
    let mut evolver = ClanEvolver::new(
        0,
        params.neat.clone(),
        params.env.clone(),
        params.eval_mode,
        params.master_seed,
        params.neat.population_size,
    );
    let mut history = Vec::new();
    let mut solved = false;
    for generation in 0..params.max_generations {
        distributed_evaluate(t, &mut acc, &mut evolver, agents, generation)?;
        let stat = evolver.stats();
        history.push(stat);
        if stat.best_fitness >= params.env.solved_threshold {
            solved = true;
            break;
        }
        if generation + 1 == params.max_generations {
            break;
        }
        let eops = evolver.evolution_step()?;
        acc.ledger
            .charge(generation, CENTER, ChargeKind::EvolutionCompute, eops as i64)?;
        t.advance_center(eops as f64 * params.sec_per_gene_op);
    }
    broadcast_stop(t, &mut acc, agents, evolver.generation)?;
    Ok(RunResult {
        topology: Topology::Dcs,
        history,
        best_genome: evolver.best.clone().expect("at least one generation ran"),
        final_population: evolver.population.clone(),
        ledger: acc.ledger,
        generations_run: evolver.generation + 1,
        solved,
        model_seconds: t.model_now(),
    })
}

pub fn run_dds<T: Transport + ModelClock>(
    t: &mut T,
    agents: &[NodeAddr],
    params: &RunParams,
) -> Result<RunResult, RunError> {
    assert!(!agents.is_empty());
    let mut acc = Accounting::new();
    for &agent in agents {
        send(
            t,
            &mut acc,
            Message {
                sender: CENTER,
                receiver: agent,
                generation: 0,
                payload: Payload::Init(init_payload(params, 0, agents.len() as u16, false)),
            },
        )?;
    }
    let mut evolver = ClanEvolver::new(
        0,
        params.neat.clone(),
        params.env.clone(),
        params.eval_mode,
        params.master_seed,
        params.neat.population_size,
    );
    let mut history = Vec::new();
    let mut solved = false;
    for generation in 0..params.max_generations {
        distributed_evaluate(t, &mut acc, &mut evolver, agents, generation)?;
        let stat = evolver.stats();
        history.push(stat);
        if stat.best_fitness >= params.env.solved_threshold {
            solved = true;
            break;
        }
        if generation + 1 == params.max_generations {
            break;
        }

        // Plan centrally, breed remotely.
        let (plan, pcost) = evolver.plan()?;
        acc.ledger.charge(
            generation,
            CENTER,
            ChargeKind::EvolutionCompute,
            pcost.gene_ops as i64,
        )?;
        t.advance_center(pcost.gene_ops as f64 * params.sec_per_gene_op);
        let specs = evolver.child_specs(&plan);
        let mut next: Vec<Option<Genome>> = vec![None; specs.len()];

        // Elites are plain copies; keep them at the center.
        let mut center_ops = 0u64;
        for spec in &specs {
            if let ChildKind::Elite { parent } = spec.kind {
                let mut copy = evolver
                    .genome(parent)
                    .expect("elite parent in population")
                    .clone();
                copy.genome_id = spec.child_id;
                copy.fitness = None;
                copy.adjusted_fitness = None;
                center_ops += copy.gene_count();
                next[spec.index as usize] = Some(copy);
            }
        }
        acc.ledger
            .charge(generation, CENTER, ChargeKind::EvolutionCompute, center_ops as i64)?;

        // Ship parent pools and breeding assignments.
        let cross: Vec<_> = specs
            .iter()
            .filter(|s| matches!(s.kind, ChildKind::Cross { .. }))
            .collect();
        let sizes = split_sizes(cross.len(), agents.len());
        let mut cursor = 0usize;
        let mut outstanding = 0usize;
        for (&agent, &size) in agents.iter().zip(&sizes) {
            if size == 0 {
                continue;
            }
            let chunk = &cross[cursor..cursor + size];
            cursor += size;
            let mut slot_of: HashMap<u64, u32> = HashMap::new();
            let mut parents = Vec::new();
            let mut items = Vec::with_capacity(chunk.len());
            for spec in chunk {
                let ChildKind::Cross { parent_a, parent_b } = spec.kind else {
                    unreachable!()
                };
                for pid in [parent_a, parent_b] {
                    if !slot_of.contains_key(&pid) {
                        let slot = slot_of.len() as u32;
                        slot_of.insert(pid, slot);
                        parents.push(GenomeEntry {
                            slot,
                            genome: evolver
                                .genome(pid)
                                .expect("parent in population")
                                .clone(),
                            innovation_log: Vec::new(),
                        });
                    }
                }
                items.push(BreedItem {
                    child_slot: spec.index,
                    parent_a: slot_of[&parent_a],
                    parent_b: slot_of[&parent_b],
                    elite: false,
                    child_genome_id: spec.child_id,
                });
            }
            send(
                t,
                &mut acc,
                Message {
                    sender: CENTER,
                    receiver: agent,
                    generation,
                    payload: Payload::Genomes {
                        purpose: GenomePurpose::Parents,
                        entries: parents,
                    },
                },
            )?;
            send(
                t,
                &mut acc,
                Message {
                    sender: CENTER,
                    receiver: agent,
                    generation,
                    payload: Payload::WorkItems(items),
                },
            )?;
            outstanding += size;
        }

        // Collect bred children, then replay innovation logs in global
        // child order so ids match the serial assignment exactly.
        let mut received: HashMap<u32, GenomeEntry> = HashMap::new();
        while received.len() < outstanding {
            let msg = recv(t, &mut acc)?;
            let Payload::Genomes {
                purpose: GenomePurpose::Children,
                entries,
            } = msg.payload
            else {
                return Err(TransportError::HandshakeRejected(format!(
                    "unexpected payload from agent {} during breeding",
                    msg.sender
                ))
                .into());
            };
            let agent_ops: u64 = entries.iter().map(|e| e.genome.gene_count()).sum();
            acc.ledger.charge(
                generation,
                msg.sender,
                ChargeKind::EvolutionCompute,
                agent_ops as i64,
            )?;
            for e in entries {
                received.insert(e.slot, e);
            }
        }
        for spec in &specs {
            if !matches!(spec.kind, ChildKind::Cross { .. }) {
                continue;
            }
            let entry = received
                .remove(&spec.index)
                .expect("every assigned child was returned");
            let mut genome = entry.genome;
            let remap = replay_innovations(&mut evolver.tracker, &entry.innovation_log)
                .map_err(RunError::Neat)?;
            remap.apply(&mut genome).map_err(RunError::Neat)?;
            debug_assert_eq!(genome.genome_id, spec.child_id);
            debug_assert!(genome.validate().is_ok());
            next[spec.index as usize] = Some(genome);
        }
        evolver.install(next.into_iter().map(|g| g.expect("all slots bred")).collect());
    }
    broadcast_stop(t, &mut acc, agents, evolver.generation)?;
    Ok(RunResult {
        topology: Topology::Dds,
        history,
        best_genome: evolver.best.clone().expect("at least one generation ran"),
        final_population: evolver.population.clone(),
        ledger: acc.ledger,
        generations_run: evolver.generation + 1,
        solved,
        model_seconds: t.model_now(),
    })
}

pub fn run_dda<T: Transport + ModelClock>(
    t: &mut T,
    agents: &[NodeAddr],
    params: &RunParams,
) -> Result<RunResult, RunError> {
    assert!(!agents.is_empty());
    let clan_count = agents.len();
    let mut acc = Accounting::new();
    let sizes = split_sizes(params.neat.population_size, clan_count);

    // Build each clan's share centrally and ship it: the only genome
    // traffic in the whole run besides the final best collection.
    for (i, (&agent, &size)) in agents.iter().zip(&sizes).enumerate() {
        let clan_id = i as u32;
        let mut neat = params.neat.clone();
        neat.population_size = size.max(2);
        let clan_params = RunParams {
            neat: neat.clone(),
            ..params.clone()
        };
        send(
            t,
            &mut acc,
            Message {
                sender: CENTER,
                receiver: agent,
                generation: 0,
                payload: Payload::Init(init_payload(
                    &clan_params,
                    clan_id,
                    clan_count as u16,
                    true,
                )),
            },
        )?;
        let seeded = ClanEvolver::new(
            clan_id,
            neat.clone(),
            params.env.clone(),
            params.eval_mode,
            params.master_seed,
            neat.population_size,
        );
        let entries = seeded
            .population
            .into_iter()
            .enumerate()
            .map(|(slot, genome)| GenomeEntry {
                slot: slot as u32,
                genome,
                innovation_log: Vec::new(),
            })
            .collect();
        send(
            t,
            &mut acc,
            Message {
                sender: CENTER,
                receiver: agent,
                generation: 0,
                payload: Payload::Genomes {
                    purpose: GenomePurpose::Evaluate,
                    entries,
                },
            },
        )?;
    }

    let mut history = Vec::new();
    let mut solved = false;
    let mut rounds = 0u32;
    for round in 0..params.max_generations {
        for &agent in agents {
            send(
                t,
                &mut acc,
                Message {
                    sender: CENTER,
                    receiver: agent,
                    generation: round,
                    payload: Payload::Plan(PlanDecision::Continue),
                },
            )?;
        }
        let mut best = f64::NEG_INFINITY;
        let mut weighted_mean = 0.0;
        let mut species = 0u32;
        let mut population = 0u32;
        for _ in 0..clan_count {
            let msg = recv(t, &mut acc)?;
            let Payload::Telemetry(tel) = msg.payload else {
                return Err(TransportError::HandshakeRejected(format!(
                    "unexpected payload from agent {} during a clan round",
                    msg.sender
                ))
                .into());
            };
            acc.ledger.charge(
                round,
                msg.sender,
                ChargeKind::InferenceCompute,
                tel.inference_gene_ops as i64,
            )?;
            acc.ledger.charge(
                round,
                msg.sender,
                ChargeKind::EvolutionCompute,
                tel.evolution_gene_ops as i64,
            )?;
            best = best.max(tel.best_fitness);
            weighted_mean += tel.mean_fitness * tel.population_size as f64;
            species += tel.species_count;
            population += tel.population_size;
        }
        history.push(GenerationStat {
            generation: round,
            best_fitness: best,
            mean_fitness: weighted_mean / population.max(1) as f64,
            species_count: species,
            population_size: population,
        });
        rounds = round + 1;
        if best >= params.env.solved_threshold {
            solved = true;
            break;
        }
    }

    // Collect each clan's champion.
    for &agent in agents {
        send(
            t,
            &mut acc,
            Message {
                sender: CENTER,
                receiver: agent,
                generation: rounds,
                payload: Payload::Plan(PlanDecision::Stop),
            },
        )?;
    }
    let mut champions = Vec::new();
    for _ in 0..clan_count {
        let msg = recv(t, &mut acc)?;
        let Payload::Genomes { entries, .. } = msg.payload else {
            return Err(TransportError::HandshakeRejected(format!(
                "unexpected payload from agent {} during final collection",
                msg.sender
            ))
            .into());
        };
        for e in entries {
            champions.push(e.genome);
        }
    }
    // Replies arrive in transport order; sort before picking the winner so
    // the result (ties included) is identical across transports. Clan ids
    // live in the genome id's high bits, so this is the clan order.
    champions.sort_by_key(|g| g.genome_id);
    let mut best_genome: Option<Genome> = None;
    for g in &champions {
        let f = g.fitness.unwrap_or(f64::NEG_INFINITY);
        let better = best_genome
            .as_ref()
            .and_then(|b| b.fitness)
            .map_or(true, |bf| f > bf);
        if better {
            best_genome = Some(g.clone());
        }
    }
    Ok(RunResult {
        topology: Topology::Dda,
        history,
        best_genome: best_genome.ok_or(RunError::Neat(NeatError::TotalExtinction))?,
        final_population: champions,
        ledger: acc.ledger,
        generations_run: rounds,
        solved,
        model_seconds: t.model_now(),
    })
}
