//! Innovation id allocation.
//!
//! The canonical [`InnovationTracker`] memoizes structural keys within a
//! generation and hands out monotonically increasing ids from a namespace
//! base. When reproduction runs on a remote agent, the agent allocates from
//! a provisional range with a [`RecordingInnovations`] source and ships the
//! ordered request log home; the center replays logs in global child order
//! against the canonical tracker, which reproduces exactly the ids a serial
//! run would have assigned.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::NeatError;
use crate::neat::genome::{GenomeOf, InnovationId, NodeId};
use crate::scalar::Scalar;

/// Ids at or above this value are provisional and must never leave an
/// agent -> center reply.
pub const PROVISIONAL_BASE: u32 = 1 << 31;

/// Anything that can hand out ids for new structural genes.
pub trait InnovationSource {
    /// Id for a new connection gene keyed by the ordered `(in, out)` pair.
    fn connection_innovation(&mut self, in_node: NodeId, out_node: NodeId) -> InnovationId;
    /// Id for the node created by splitting the given connection.
    fn split_node_id(&mut self, split_innovation: InnovationId) -> NodeId;
}

/// Canonical per-clan tracker. Same key within one generation yields the
/// same id; the memo resets at generation boundaries.
#[derive(Debug, Clone)]
pub struct InnovationTracker {
    base: u32,
    next_connection: u32,
    next_node: u32,
    conn_memo: HashMap<(NodeId, NodeId), InnovationId>,
    node_memo: HashMap<InnovationId, NodeId>,
}

impl InnovationTracker {
    pub fn new(namespace_base: u32) -> Self {
        assert!(
            namespace_base < PROVISIONAL_BASE,
            "namespace base collides with provisional id range"
        );
        InnovationTracker {
            base: namespace_base,
            next_connection: namespace_base,
            next_node: namespace_base,
            conn_memo: HashMap::new(),
            node_memo: HashMap::new(),
        }
    }

    pub fn namespace_base(&self) -> u32 {
        self.base
    }

    /// Clears the same-structure memo. Call once per generation before any
    /// reproduction.
    pub fn begin_generation(&mut self) {
        self.conn_memo.clear();
        self.node_memo.clear();
    }
}

impl InnovationSource for InnovationTracker {
    fn connection_innovation(&mut self, in_node: NodeId, out_node: NodeId) -> InnovationId {
        if let Some(&id) = self.conn_memo.get(&(in_node, out_node)) {
            return id;
        }
        let id = self.next_connection;
        assert!(id < PROVISIONAL_BASE, "innovation id namespace exhausted");
        self.next_connection += 1;
        self.conn_memo.insert((in_node, out_node), id);
        id
    }

    fn split_node_id(&mut self, split_innovation: InnovationId) -> NodeId {
        if let Some(&id) = self.node_memo.get(&split_innovation) {
            return id;
        }
        let id = self.next_node;
        assert!(id < PROVISIONAL_BASE, "node id namespace exhausted");
        self.next_node += 1;
        self.node_memo.insert(split_innovation, id);
        id
    }
}

/// One structural-gene request, in the order the mutation made it. Key
/// components are recorded as the requesting side saw them, which may be
/// provisional ids from earlier requests of the same child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnovationRequest {
    Connection { in_node: NodeId, out_node: NodeId },
    NodeSplit { split_innovation: InnovationId },
}

/// Agent-side source: allocates from the provisional range and logs every
/// request. One instance per bred child.
#[derive(Debug, Default)]
pub struct RecordingInnovations {
    alloc: ProvisionalAlloc,
    pub log: Vec<InnovationRequest>,
}

impl RecordingInnovations {
    pub fn new() -> Self {
        Self::default()
    }
}

impl InnovationSource for RecordingInnovations {
    fn connection_innovation(&mut self, in_node: NodeId, out_node: NodeId) -> InnovationId {
        self.log.push(InnovationRequest::Connection { in_node, out_node });
        self.alloc.connection(in_node, out_node)
    }

    fn split_node_id(&mut self, split_innovation: InnovationId) -> NodeId {
        self.log.push(InnovationRequest::NodeSplit { split_innovation });
        self.alloc.node(split_innovation)
    }
}

/// Deterministic provisional allocation shared by the recording source and
/// the replay below, so the center can reconstruct which provisional id the
/// agent used for each request without it being transmitted.
#[derive(Debug)]
struct ProvisionalAlloc {
    next_connection: u32,
    next_node: u32,
    conn_memo: HashMap<(NodeId, NodeId), InnovationId>,
    node_memo: HashMap<InnovationId, NodeId>,
}

impl Default for ProvisionalAlloc {
    fn default() -> Self {
        ProvisionalAlloc {
            next_connection: PROVISIONAL_BASE,
            next_node: PROVISIONAL_BASE,
            conn_memo: HashMap::new(),
            node_memo: HashMap::new(),
        }
    }
}

impl ProvisionalAlloc {
    fn connection(&mut self, in_node: NodeId, out_node: NodeId) -> InnovationId {
        *self.conn_memo.entry((in_node, out_node)).or_insert_with(|| {
            let id = self.next_connection;
            self.next_connection += 1;
            id
        })
    }

    fn node(&mut self, split: InnovationId) -> NodeId {
        *self.node_memo.entry(split).or_insert_with(|| {
            let id = self.next_node;
            self.next_node += 1;
            id
        })
    }
}

/// Provisional-to-canonical id mapping for one child.
#[derive(Debug, Default)]
pub struct IdRemap {
    conn: HashMap<InnovationId, InnovationId>,
    node: HashMap<NodeId, NodeId>,
}

impl IdRemap {
    fn map_conn(&self, id: InnovationId) -> Result<InnovationId, NeatError> {
        if id < PROVISIONAL_BASE {
            return Ok(id);
        }
        self.conn.get(&id).copied().ok_or(NeatError::MalformedGenome {
            genome_id: 0,
            reason: format!("unmapped provisional innovation id {id}"),
        })
    }

    fn map_node(&self, id: NodeId) -> Result<NodeId, NeatError> {
        if id < PROVISIONAL_BASE {
            return Ok(id);
        }
        self.node.get(&id).copied().ok_or(NeatError::MalformedGenome {
            genome_id: 0,
            reason: format!("unmapped provisional node id {id}"),
        })
    }

    /// Rewrites every provisional id in the genome to its canonical value.
    pub fn apply<S: Scalar>(&self, genome: &mut GenomeOf<S>) -> Result<(), NeatError> {
        for n in &mut genome.nodes {
            n.id = self.map_node(n.id)?;
        }
        for c in &mut genome.connections {
            c.innovation_id = self.map_conn(c.innovation_id)?;
            c.in_node = self.map_node(c.in_node)?;
            c.out_node = self.map_node(c.out_node)?;
        }
        Ok(())
    }
}

/// Replays an agent's request log against the canonical tracker, producing
/// the provisional-to-canonical remap for that child. Must be called in
/// global child order to match the serial assignment.
pub fn replay_innovations(
    tracker: &mut InnovationTracker,
    log: &[InnovationRequest],
) -> Result<IdRemap, NeatError> {
    let mut alloc = ProvisionalAlloc::default();
    let mut remap = IdRemap::default();
    for req in log {
        match *req {
            InnovationRequest::Connection { in_node, out_node } => {
                let provisional = alloc.connection(in_node, out_node);
                let canonical = tracker.connection_innovation(
                    remap.map_node(in_node)?,
                    remap.map_node(out_node)?,
                );
                remap.conn.insert(provisional, canonical);
            }
            InnovationRequest::NodeSplit { split_innovation } => {
                let provisional = alloc.node(split_innovation);
                let canonical = tracker.split_node_id(remap.map_conn(split_innovation)?);
                remap.node.insert(provisional, canonical);
            }
        }
    }
    Ok(remap)
}
