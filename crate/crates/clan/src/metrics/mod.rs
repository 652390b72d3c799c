//! Cost accounting in the gene-denominated metric, per-generation reports,
//! CSV emission, and least-squares scaling analysis.
//!
//! Everything is counted in genes: a gene is one 32-bit datastructure, so
//! communication converts as one gene-equivalent per 4 payload bytes, and
//! compute is counted in gene-ops (one processed gene).

mod ledger;
mod scaling;

pub use ledger::{
    generation_report, ChargeKind, CostLedger, GenerationReport, LedgerRow, NodeGeneration,
};
pub use scaling::{fit_scaling, ScalingFit, ScalingPoint};
