//! The agent node: a reactive state machine shared by the simulated and
//! socket transports. Workers evaluate and breed on demand; clan agents
//! own a whole sub-population and evolve it autonomously, reporting only
//! telemetry.

use std::collections::HashMap;

use crate::error::NeatError;
use crate::neat::innovation::RecordingInnovations;
use crate::transport::sim::SimAgent;
use crate::transport::{
    FitnessEntry, GenomeEntry, GenomePurpose, InitPayload, Message, NodeAddr, Payload,
    PlanDecision, Telemetry, CENTER,
};

use super::evolver::{ClanEvolver, ChildSpec, ChildKind, Genome};

pub struct AgentNode {
    pub addr: NodeAddr,
    init: Option<InitPayload>,
    /// Parent pool for the current breeding round, keyed by wire slot.
    parents: HashMap<u32, Genome>,
    /// Present in clan mode only.
    clan: Option<ClanEvolver>,
    stopped: bool,
}

impl AgentNode {
    pub fn new(addr: NodeAddr) -> Self {
        AgentNode {
            addr,
            init: None,
            parents: HashMap::new(),
            clan: None,
            stopped: false,
        }
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    fn init(&self) -> &InitPayload {
        self.init.as_ref().expect("agent received work before INIT")
    }

    fn reply(&self, generation: u32, payload: Payload) -> Message {
        Message {
            sender: self.addr,
            receiver: CENTER,
            generation,
            payload,
        }
    }

    /// Handles one message; returns replies and the gene-ops spent.
    pub fn handle(&mut self, msg: Message) -> Result<(Vec<Message>, u64), NeatError> {
        let generation = msg.generation;
        match msg.payload {
            Payload::Init(init) => {
                self.init = Some(init);
                Ok((Vec::new(), 0))
            }
            Payload::Genomes { purpose, entries } => match purpose {
                GenomePurpose::Evaluate => {
                    if self.init().clan_mode {
                        self.install_clan(entries);
                        Ok((Vec::new(), 0))
                    } else {
                        self.evaluate(generation, entries)
                    }
                }
                GenomePurpose::Parents => {
                    self.parents = entries.into_iter().map(|e| (e.slot, e.genome)).collect();
                    Ok((Vec::new(), 0))
                }
                GenomePurpose::Children => Ok((Vec::new(), 0)),
            },
            Payload::WorkItems(items) => self.breed(generation, &items),
            Payload::Plan(PlanDecision::Continue) => self.clan_round(),
            Payload::Plan(PlanDecision::Stop) => {
                self.stopped = true;
                let best = self
                    .clan
                    .as_ref()
                    .and_then(|c| c.best.clone())
                    .into_iter()
                    .map(|genome| GenomeEntry {
                        slot: 0,
                        genome,
                        innovation_log: Vec::new(),
                    })
                    .collect();
                Ok((
                    vec![self.reply(
                        generation,
                        Payload::Genomes {
                            purpose: GenomePurpose::Children,
                            entries: best,
                        },
                    )],
                    0,
                ))
            }
            Payload::Stop => {
                self.stopped = true;
                Ok((Vec::new(), 0))
            }
            Payload::FitnessReport(_) | Payload::Telemetry(_) => Ok((Vec::new(), 0)),
        }
    }

    fn evaluate(
        &mut self,
        generation: u32,
        entries: Vec<GenomeEntry>,
    ) -> Result<(Vec<Message>, u64), NeatError> {
        let init = self.init().clone();
        let mut report = Vec::with_capacity(entries.len());
        let mut total_ops = 0u64;
        for e in entries {
            let eval = crate::env::evaluate_genome(
                &init.env,
                &e.genome,
                init.eval_mode,
                init.master_seed,
            )?;
            let ops = eval.forward_passes * e.genome.gene_count() * init.env.flop_scale;
            total_ops += ops;
            report.push(FitnessEntry {
                slot: e.slot,
                genome_id: e.genome.genome_id,
                fitness: eval.fitness,
                eval_gene_ops: ops,
            });
        }
        Ok((
            vec![self.reply(generation, Payload::FitnessReport(report))],
            total_ops,
        ))
    }

    fn breed(
        &mut self,
        generation: u32,
        items: &[crate::transport::BreedItem],
    ) -> Result<(Vec<Message>, u64), NeatError> {
        let init = self.init().clone();
        let mut entries = Vec::with_capacity(items.len());
        let mut total_ops = 0u64;
        for item in items {
            debug_assert!(!item.elite, "elites are copied at the center");
            let pa = self.parents.get(&item.parent_a).ok_or_else(|| {
                NeatError::MalformedGenome {
                    genome_id: item.child_genome_id,
                    reason: format!("missing parent slot {}", item.parent_a),
                }
            })?;
            let pb = self.parents.get(&item.parent_b).ok_or_else(|| {
                NeatError::MalformedGenome {
                    genome_id: item.child_genome_id,
                    reason: format!("missing parent slot {}", item.parent_b),
                }
            })?;
            let spec = ChildSpec {
                index: item.child_slot,
                child_id: item.child_genome_id,
                kind: ChildKind::Cross {
                    parent_a: pa.genome_id,
                    parent_b: pb.genome_id,
                },
            };
            let mut recorder = RecordingInnovations::new();
            let child = ClanEvolver::breed(
                &spec,
                pa,
                pb,
                &init.neat,
                init.master_seed,
                init.clan_id,
                generation,
                &mut recorder,
            )?;
            total_ops += child.gene_count();
            entries.push(GenomeEntry {
                slot: item.child_slot,
                genome: child,
                innovation_log: recorder.log,
            });
        }
        Ok((
            vec![self.reply(
                generation,
                Payload::Genomes {
                    purpose: GenomePurpose::Children,
                    entries,
                },
            )],
            total_ops,
        ))
    }

    fn install_clan(&mut self, entries: Vec<GenomeEntry>) {
        let init = self.init().clone();
        let mut entries = entries;
        entries.sort_by_key(|e| e.slot);
        let population = entries.into_iter().map(|e| e.genome).collect();
        self.clan = Some(ClanEvolver::with_population(
            init.clan_id,
            init.neat,
            init.env,
            init.eval_mode,
            init.master_seed,
            population,
        ));
    }

    /// One autonomous clan generation: evaluate, summarize, evolve.
    fn clan_round(&mut self) -> Result<(Vec<Message>, u64), NeatError> {
        let clan = self.clan.as_mut().expect("clan round before population install");
        let inference_ops = clan.evaluate_local()?;
        let stat = clan.stats();
        let generation = stat.generation;
        let best_genes = clan
            .best
            .as_ref()
            .map(|g| g.gene_count())
            .unwrap_or_default();
        let evolution_ops = clan.evolution_step()?;
        let telemetry = Telemetry {
            best_fitness: stat.best_fitness,
            mean_fitness: stat.mean_fitness,
            species_count: stat.species_count,
            population_size: stat.population_size,
            inference_gene_ops: inference_ops,
            evolution_gene_ops: evolution_ops,
            best_genome_genes: best_genes,
        };
        Ok((
            vec![self.reply(generation, Payload::Telemetry(telemetry))],
            inference_ops + evolution_ops,
        ))
    }
}

impl SimAgent for AgentNode {
    fn on_message(&mut self, msg: Message, out: &mut Vec<Message>) -> f64 {
        let sec_per_gene_op = self.init.as_ref().map(|i| i.sec_per_gene_op).unwrap_or(0.0);
        let (replies, ops) = self
            .handle(msg)
            .expect("agent failure inside simulation");
        out.extend(replies);
        ops as f64 * sec_per_gene_op
    }
}

/// Blocking agent main loop for the socket transport: serve messages until
/// the center says stop.
pub fn run_agent_loop<T: crate::transport::Transport>(
    transport: &mut T,
    addr: NodeAddr,
) -> Result<(), crate::error::RunError> {
    let mut node = AgentNode::new(addr);
    while !node.stopped() {
        let msg = transport.recv()?;
        let (replies, _ops) = node.handle(msg).map_err(crate::error::RunError::Neat)?;
        for r in replies {
            transport.send(r)?;
        }
    }
    Ok(())
}
