//! Binary wire format.
//!
//! Frame layout, all integers little-endian:
//!
//! ```text
//! "CLAN" | version u8 | msg_type u8 | sender u16 | receiver u16
//!        | generation u32 | payload_len u32 | payload | crc32 u32
//! ```
//!
//! The CRC covers everything before it. An empty-payload frame is exactly
//! 22 bytes. Payloads use fixed layouts except INIT, which is JSON.

use crate::error::WireError;
use crate::neat::activation::Activation;
use crate::neat::genome::{ConnectionGene, GenomeOf, NodeGene, NodeKind};
use crate::neat::innovation::InnovationRequest;

use super::{
    BreedItem, FitnessEntry, GenomeEntry, GenomePurpose, Message, Payload, PlanDecision, Telemetry,
};

pub const MAGIC: &[u8; 4] = b"CLAN";
pub const VERSION: u8 = 1;
/// Bytes in a frame beyond the payload.
pub const FRAME_OVERHEAD: usize = 22;

const MSG_INIT: u8 = 0;
const MSG_GENOMES: u8 = 1;
const MSG_WORK_ITEMS: u8 = 2;
const MSG_FITNESS_REPORT: u8 = 3;
const MSG_PLAN: u8 = 4;
const MSG_TELEMETRY: u8 = 5;
const MSG_STOP: u8 = 6;

fn msg_type(p: &Payload) -> u8 {
    match p {
        Payload::Init(_) => MSG_INIT,
        Payload::Genomes { .. } => MSG_GENOMES,
        Payload::WorkItems(_) => MSG_WORK_ITEMS,
        Payload::FitnessReport(_) => MSG_FITNESS_REPORT,
        Payload::Plan(_) => MSG_PLAN,
        Payload::Telemetry(_) => MSG_TELEMETRY,
        Payload::Stop => MSG_STOP,
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Truncated {
                needed: self.pos + n,
                had: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Canonical binary form of one genome, as used inside GENOMES payloads.
pub fn encode_genome(g: &GenomeOf<f64>) -> Vec<u8> {
    let mut out = Vec::new();
    put_genome(&mut out, g);
    out
}

pub fn decode_genome(buf: &[u8]) -> Result<GenomeOf<f64>, WireError> {
    let mut r = Reader::new(buf);
    let g = get_genome(&mut r)?;
    if !r.done() {
        return Err(WireError::LengthMismatch);
    }
    Ok(g)
}

fn put_genome(out: &mut Vec<u8>, g: &GenomeOf<f64>) {
    out.extend_from_slice(&g.genome_id.to_le_bytes());
    out.extend_from_slice(&(g.nodes.len() as u32).to_le_bytes());
    out.extend_from_slice(&(g.connections.len() as u32).to_le_bytes());
    for n in &g.nodes {
        out.extend_from_slice(&n.id.to_le_bytes());
        out.push(n.kind.to_wire());
        out.extend_from_slice(&n.bias.to_le_bytes());
        out.push(n.activation.to_wire());
    }
    for c in &g.connections {
        out.extend_from_slice(&c.innovation_id.to_le_bytes());
        out.extend_from_slice(&c.in_node.to_le_bytes());
        out.extend_from_slice(&c.out_node.to_le_bytes());
        out.extend_from_slice(&c.weight.to_le_bytes());
        out.push(c.enabled as u8);
    }
}

fn get_genome(r: &mut Reader) -> Result<GenomeOf<f64>, WireError> {
    let genome_id = r.u64()?;
    let node_count = r.u32()? as usize;
    let conn_count = r.u32()? as usize;
    let mut nodes = Vec::with_capacity(node_count);
    for _ in 0..node_count {
        let id = r.u32()?;
        let kind_tag = r.u8()?;
        let kind = NodeKind::from_wire(kind_tag).ok_or(WireError::BadTag {
            what: "node kind",
            tag: kind_tag,
        })?;
        let bias = r.f64()?;
        let act_tag = r.u8()?;
        let activation = Activation::from_wire(act_tag).ok_or(WireError::BadTag {
            what: "activation",
            tag: act_tag,
        })?;
        nodes.push(NodeGene {
            id,
            kind,
            bias,
            activation,
        });
    }
    let mut connections = Vec::with_capacity(conn_count);
    for _ in 0..conn_count {
        connections.push(ConnectionGene {
            innovation_id: r.u32()?,
            in_node: r.u32()?,
            out_node: r.u32()?,
            weight: r.f64()?,
            enabled: match r.u8()? {
                0 => false,
                1 => true,
                tag => return Err(WireError::BadTag { what: "enabled flag", tag }),
            },
        });
    }
    Ok(GenomeOf {
        genome_id,
        nodes,
        connections,
        fitness: None,
        adjusted_fitness: None,
    })
}

fn put_log(out: &mut Vec<u8>, log: &[InnovationRequest]) {
    out.extend_from_slice(&(log.len() as u32).to_le_bytes());
    for req in log {
        match *req {
            InnovationRequest::Connection { in_node, out_node } => {
                out.push(0);
                out.extend_from_slice(&in_node.to_le_bytes());
                out.extend_from_slice(&out_node.to_le_bytes());
            }
            InnovationRequest::NodeSplit { split_innovation } => {
                out.push(1);
                out.extend_from_slice(&split_innovation.to_le_bytes());
            }
        }
    }
}

fn get_log(r: &mut Reader) -> Result<Vec<InnovationRequest>, WireError> {
    let count = r.u32()? as usize;
    let mut log = Vec::with_capacity(count);
    for _ in 0..count {
        log.push(match r.u8()? {
            0 => InnovationRequest::Connection {
                in_node: r.u32()?,
                out_node: r.u32()?,
            },
            1 => InnovationRequest::NodeSplit {
                split_innovation: r.u32()?,
            },
            tag => {
                return Err(WireError::BadTag {
                    what: "innovation request",
                    tag,
                })
            }
        });
    }
    Ok(log)
}

fn encode_payload(p: &Payload) -> Vec<u8> {
    let mut out = Vec::new();
    match p {
        Payload::Init(init) => {
            out = serde_json::to_vec(init).expect("init payload serializes");
        }
        Payload::Genomes { purpose, entries } => {
            out.push(match purpose {
                GenomePurpose::Evaluate => 0,
                GenomePurpose::Parents => 1,
                GenomePurpose::Children => 2,
            });
            out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
            for e in entries {
                out.extend_from_slice(&e.slot.to_le_bytes());
                let has_fitness = e.genome.fitness.is_some();
                out.push(has_fitness as u8);
                if let Some(f) = e.genome.fitness {
                    out.extend_from_slice(&f.to_le_bytes());
                }
                put_genome(&mut out, &e.genome);
                put_log(&mut out, &e.innovation_log);
            }
        }
        Payload::WorkItems(items) => {
            out.extend_from_slice(&(items.len() as u32).to_le_bytes());
            for i in items {
                out.extend_from_slice(&i.child_slot.to_le_bytes());
                out.extend_from_slice(&i.parent_a.to_le_bytes());
                out.extend_from_slice(&i.parent_b.to_le_bytes());
                out.push(i.elite as u8);
                out.extend_from_slice(&i.child_genome_id.to_le_bytes());
            }
        }
        Payload::FitnessReport(entries) => {
            out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
            for e in entries {
                out.extend_from_slice(&e.slot.to_le_bytes());
                out.extend_from_slice(&e.genome_id.to_le_bytes());
                out.extend_from_slice(&e.fitness.to_le_bytes());
                out.extend_from_slice(&e.eval_gene_ops.to_le_bytes());
            }
        }
        Payload::Plan(d) => out.push(match d {
            PlanDecision::Continue => 0,
            PlanDecision::Stop => 1,
        }),
        Payload::Telemetry(t) => {
            out.extend_from_slice(&t.best_fitness.to_le_bytes());
            out.extend_from_slice(&t.mean_fitness.to_le_bytes());
            out.extend_from_slice(&t.species_count.to_le_bytes());
            out.extend_from_slice(&t.population_size.to_le_bytes());
            out.extend_from_slice(&t.inference_gene_ops.to_le_bytes());
            out.extend_from_slice(&t.evolution_gene_ops.to_le_bytes());
            out.extend_from_slice(&t.best_genome_genes.to_le_bytes());
        }
        Payload::Stop => {}
    }
    out
}

fn decode_payload(msg_type: u8, buf: &[u8]) -> Result<Payload, WireError> {
    let mut r = Reader::new(buf);
    let payload = match msg_type {
        MSG_INIT => Payload::Init(
            serde_json::from_slice(buf).map_err(|_| WireError::LengthMismatch)?,
        ),
        MSG_GENOMES => {
            let purpose = match r.u8()? {
                0 => GenomePurpose::Evaluate,
                1 => GenomePurpose::Parents,
                2 => GenomePurpose::Children,
                tag => return Err(WireError::BadTag { what: "genome purpose", tag }),
            };
            let count = r.u32()? as usize;
            let mut entries = Vec::with_capacity(count);
            for _ in 0..count {
                let slot = r.u32()?;
                let fitness = match r.u8()? {
                    0 => None,
                    1 => Some(r.f64()?),
                    tag => return Err(WireError::BadTag { what: "fitness flag", tag }),
                };
                let mut genome = get_genome(&mut r)?;
                genome.fitness = fitness;
                let innovation_log = get_log(&mut r)?;
                entries.push(GenomeEntry {
                    slot,
                    genome,
                    innovation_log,
                });
            }
            Payload::Genomes { purpose, entries }
        }
        MSG_WORK_ITEMS => {
            let count = r.u32()? as usize;
            let mut items = Vec::with_capacity(count);
            for _ in 0..count {
                items.push(BreedItem {
                    child_slot: r.u32()?,
                    parent_a: r.u32()?,
                    parent_b: r.u32()?,
                    elite: r.u8()? != 0,
                    child_genome_id: r.u64()?,
                });
            }
            Payload::WorkItems(items)
        }
        MSG_FITNESS_REPORT => {
            let count = r.u32()? as usize;
            let mut entries = Vec::with_capacity(count);
            for _ in 0..count {
                entries.push(FitnessEntry {
                    slot: r.u32()?,
                    genome_id: r.u64()?,
                    fitness: r.f64()?,
                    eval_gene_ops: r.u64()?,
                });
            }
            Payload::FitnessReport(entries)
        }
        MSG_PLAN => Payload::Plan(match r.u8()? {
            0 => PlanDecision::Continue,
            1 => PlanDecision::Stop,
            tag => return Err(WireError::BadTag { what: "plan decision", tag }),
        }),
        MSG_TELEMETRY => Payload::Telemetry(Telemetry {
            best_fitness: r.f64()?,
            mean_fitness: r.f64()?,
            species_count: r.u32()?,
            population_size: r.u32()?,
            inference_gene_ops: r.u64()?,
            evolution_gene_ops: r.u64()?,
            best_genome_genes: r.u64()?,
        }),
        MSG_STOP => Payload::Stop,
        tag => return Err(WireError::UnknownMsgType(tag)),
    };
    if msg_type != MSG_INIT && !r.done() {
        return Err(WireError::LengthMismatch);
    }
    Ok(payload)
}

/// Serializes a message into one self-delimiting frame.
pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let payload = encode_payload(&msg.payload);
    let mut out = Vec::with_capacity(FRAME_OVERHEAD + payload.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(msg_type(&msg.payload));
    out.extend_from_slice(&msg.sender.to_le_bytes());
    out.extend_from_slice(&msg.receiver.to_le_bytes());
    out.extend_from_slice(&msg.generation.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Parses one frame from the front of `buf`, returning the message and the
/// number of bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(Message, usize), WireError> {
    if buf.len() < FRAME_OVERHEAD {
        return Err(WireError::Truncated {
            needed: FRAME_OVERHEAD,
            had: buf.len(),
        });
    }
    if &buf[0..4] != MAGIC {
        return Err(WireError::BadMagic);
    }
    if buf[4] != VERSION {
        return Err(WireError::BadVersion(buf[4]));
    }
    let msg_type = buf[5];
    let sender = u16::from_le_bytes(buf[6..8].try_into().unwrap());
    let receiver = u16::from_le_bytes(buf[8..10].try_into().unwrap());
    let generation = u32::from_le_bytes(buf[10..14].try_into().unwrap());
    let payload_len = u32::from_le_bytes(buf[14..18].try_into().unwrap()) as usize;
    let total = FRAME_OVERHEAD + payload_len;
    if buf.len() < total {
        return Err(WireError::Truncated {
            needed: total,
            had: buf.len(),
        });
    }
    let crc_offset = total - 4;
    let expected = u32::from_le_bytes(buf[crc_offset..total].try_into().unwrap());
    if crc32fast::hash(&buf[..crc_offset]) != expected {
        return Err(WireError::BadCrc);
    }
    let payload = decode_payload(msg_type, &buf[18..crc_offset])?;
    Ok((
        Message {
            sender,
            receiver,
            generation,
            payload,
        },
        total,
    ))
}

/// Frame size in bytes without building the frame.
pub fn frame_len(msg: &Message) -> usize {
    FRAME_OVERHEAD + encode_payload(&msg.payload).len()
}
