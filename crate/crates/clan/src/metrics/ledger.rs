//! The cost ledger: one row per (node, generation), every charge recorded
//! with an audit trail of what was charged where.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::transport::NodeAddr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeGeneration {
    pub generation: u32,
    pub node: NodeAddr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChargeKind {
    /// Gene-ops spent running networks forward.
    InferenceCompute,
    /// Gene-ops spent on speciation, selection and reproduction.
    EvolutionCompute,
    /// Payload bytes put on the wire by this node.
    CommBytes,
    /// Genome genes contained in sent payloads.
    GenomeGenesSent,
    /// Frames sent.
    MessagesSent,
}

impl ChargeKind {
    fn name(self) -> &'static str {
        match self {
            ChargeKind::InferenceCompute => "inference_compute",
            ChargeKind::EvolutionCompute => "evolution_compute",
            ChargeKind::CommBytes => "comm_bytes",
            ChargeKind::GenomeGenesSent => "genome_genes_sent",
            ChargeKind::MessagesSent => "messages_sent",
        }
    }
}

/// Accumulated totals for one node in one generation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub inference_gene_ops: u64,
    pub evolution_gene_ops: u64,
    pub comm_bytes: u64,
    pub genome_genes_sent: u64,
    pub messages_sent: u64,
}

impl LedgerRow {
    /// Communication in gene-equivalents: one gene per 4 payload bytes,
    /// rounded up.
    pub fn comm_gene_equivalents(&self) -> u64 {
        self.comm_bytes.div_ceil(4)
    }
}

/// Append-only cost record. Charges are whole gene units; a negative
/// amount is an accounting bug and is rejected.
#[derive(Debug, Default, Clone)]
pub struct CostLedger {
    rows: BTreeMap<NodeGeneration, LedgerRow>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(
        &mut self,
        generation: u32,
        node: NodeAddr,
        kind: ChargeKind,
        amount: i64,
    ) -> Result<(), MetricsError> {
        if amount < 0 {
            return Err(MetricsError::NegativeCharge(format!(
                "{} on node {} in generation {}",
                kind.name(),
                node,
                generation
            )));
        }
        let row = self
            .rows
            .entry(NodeGeneration { generation, node })
            .or_default();
        let amount = amount as u64;
        match kind {
            ChargeKind::InferenceCompute => row.inference_gene_ops += amount,
            ChargeKind::EvolutionCompute => row.evolution_gene_ops += amount,
            ChargeKind::CommBytes => row.comm_bytes += amount,
            ChargeKind::GenomeGenesSent => row.genome_genes_sent += amount,
            ChargeKind::MessagesSent => row.messages_sent += amount,
        }
        Ok(())
    }

    pub fn row(&self, generation: u32, node: NodeAddr) -> LedgerRow {
        self.rows
            .get(&NodeGeneration { generation, node })
            .copied()
            .unwrap_or_default()
    }

    /// Rows in (generation, node) order.
    pub fn rows(&self) -> impl Iterator<Item = (NodeGeneration, &LedgerRow)> {
        self.rows.iter().map(|(k, v)| (*k, v))
    }

    pub fn generations(&self) -> Vec<u32> {
        let mut gens: Vec<u32> = self.rows.keys().map(|k| k.generation).collect();
        gens.dedup();
        gens
    }

    /// Sum over all nodes of one generation.
    pub fn generation_total(&self, generation: u32) -> LedgerRow {
        let mut total = LedgerRow::default();
        for (k, r) in &self.rows {
            if k.generation == generation {
                total.inference_gene_ops += r.inference_gene_ops;
                total.evolution_gene_ops += r.evolution_gene_ops;
                total.comm_bytes += r.comm_bytes;
                total.genome_genes_sent += r.genome_genes_sent;
                total.messages_sent += r.messages_sent;
            }
        }
        total
    }

    /// Sum over every row.
    pub fn grand_total(&self) -> LedgerRow {
        let mut total = LedgerRow::default();
        for r in self.rows.values() {
            total.inference_gene_ops += r.inference_gene_ops;
            total.evolution_gene_ops += r.evolution_gene_ops;
            total.comm_bytes += r.comm_bytes;
            total.genome_genes_sent += r.genome_genes_sent;
            total.messages_sent += r.messages_sent;
        }
        total
    }

    /// Writes the ledger as RFC-4180 CSV, rows sorted by (generation,
    /// node). An empty ledger still gets the header line.
    pub fn emit_csv<W: Write>(&self, out: W) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "generation",
            "node",
            "inference_gene_ops",
            "evolution_gene_ops",
            "comm_bytes",
            "comm_gene_equivalents",
            "genome_genes_sent",
            "messages_sent",
        ])
        .map_err(csv_io)?;
        for (k, r) in &self.rows {
            w.write_record([
                k.generation.to_string(),
                k.node.to_string(),
                r.inference_gene_ops.to_string(),
                r.evolution_gene_ops.to_string(),
                r.comm_bytes.to_string(),
                r.comm_gene_equivalents().to_string(),
                r.genome_genes_sent.to_string(),
                r.messages_sent.to_string(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> MetricsError {
    MetricsError::Io(std::io::Error::other(e))
}

/// Cluster-wide summary of one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub generation: u32,
    pub inference_gene_ops: u64,
    pub evolution_gene_ops: u64,
    pub comm_gene_equivalents: u64,
    pub genome_genes_sent: u64,
    /// Communication as a fraction of all gene units moved or processed.
    pub comm_share: f64,
    /// Inference compute per unit of evolution compute.
    pub inference_evolution_ratio: f64,
}

pub fn generation_report(
    ledger: &CostLedger,
    generation: u32,
) -> Result<GenerationReport, MetricsError> {
    let total = ledger.generation_total(generation);
    if total == LedgerRow::default()
        && !ledger.rows().any(|(k, _)| k.generation == generation)
    {
        return Err(MetricsError::IncompleteGeneration(generation));
    }
    let comm = total.comm_gene_equivalents();
    let compute = total.inference_gene_ops + total.evolution_gene_ops;
    let comm_share = if comm + compute == 0 {
        0.0
    } else {
        comm as f64 / (comm + compute) as f64
    };
    let inference_evolution_ratio = if total.evolution_gene_ops == 0 {
        f64::INFINITY
    } else {
        total.inference_gene_ops as f64 / total.evolution_gene_ops as f64
    };
    Ok(GenerationReport {
        generation,
        inference_gene_ops: total.inference_gene_ops,
        evolution_gene_ops: total.evolution_gene_ops,
        comm_gene_equivalents: comm,
        genome_genes_sent: total.genome_genes_sent,
        comm_share,
        inference_evolution_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charges_accumulate_per_node_generation() {
        let mut ledger = CostLedger::new();
        ledger.charge(0, 1, ChargeKind::InferenceCompute, 100).unwrap();
        ledger.charge(0, 1, ChargeKind::InferenceCompute, 50).unwrap();
        ledger.charge(0, 2, ChargeKind::CommBytes, 10).unwrap();
        ledger.charge(1, 1, ChargeKind::EvolutionCompute, 7).unwrap();
        assert_eq!(ledger.row(0, 1).inference_gene_ops, 150);
        assert_eq!(ledger.row(0, 2).comm_bytes, 10);
        // 10 bytes -> 3 gene-equivalents (ceiling division)
        assert_eq!(ledger.row(0, 2).comm_gene_equivalents(), 3);
        assert_eq!(ledger.row(1, 1).evolution_gene_ops, 7);
        assert_eq!(ledger.row(5, 9), LedgerRow::default());
    }

    #[test]
    fn negative_charge_rejected_zero_is_noop() {
        let mut ledger = CostLedger::new();
        assert!(matches!(
            ledger.charge(0, 1, ChargeKind::CommBytes, -1),
            Err(MetricsError::NegativeCharge(_))
        ));
        ledger.charge(0, 1, ChargeKind::CommBytes, 0).unwrap();
        assert_eq!(ledger.row(0, 1), LedgerRow::default());
    }

    #[test]
    fn generation_report_shares_and_ratio() {
        let mut ledger = CostLedger::new();
        ledger.charge(3, 0, ChargeKind::EvolutionCompute, 100).unwrap();
        ledger.charge(3, 1, ChargeKind::InferenceCompute, 900).unwrap();
        // 1000 bytes -> 250 gene-equivalents
        ledger.charge(3, 0, ChargeKind::CommBytes, 1000).unwrap();
        let r = generation_report(&ledger, 3).unwrap();
        assert_eq!(r.comm_gene_equivalents, 250);
        assert!((r.comm_share - 250.0 / 1250.0).abs() < 1e-12);
        assert!((r.inference_evolution_ratio - 9.0).abs() < 1e-12);
    }

    #[test]
    fn missing_generation_is_an_error() {
        let ledger = CostLedger::new();
        assert!(matches!(
            generation_report(&ledger, 7),
            Err(MetricsError::IncompleteGeneration(7))
        ));
    }

    #[test]
    fn csv_is_sorted_and_deterministic() {
        let mut ledger = CostLedger::new();
        ledger.charge(1, 2, ChargeKind::MessagesSent, 4).unwrap();
        ledger.charge(0, 3, ChargeKind::GenomeGenesSent, 55).unwrap();
        ledger.charge(0, 1, ChargeKind::InferenceCompute, 10).unwrap();
        let mut buf = Vec::new();
        ledger.emit_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("generation,node,"));
        assert!(lines[1].starts_with("0,1,"));
        assert!(lines[2].starts_with("0,3,"));
        assert!(lines[3].starts_with("1,2,"));

        let mut again = Vec::new();
        ledger.emit_csv(&mut again).unwrap();
        assert_eq!(text, String::from_utf8(again).unwrap());
    }

    #[test]
    fn empty_ledger_emits_header_only() {
        let mut buf = Vec::new();
        CostLedger::new().emit_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
    }
}
