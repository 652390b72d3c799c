//! Feed-forward network evaluation by topological-order propagation.

use std::collections::HashMap;

use crate::error::NeatError;
use crate::neat::genome::{GenomeOf, NodeKind};
use crate::scalar::Scalar;

/// A genome compiled into a flat evaluation plan. Compile once, evaluate
/// many times per episode.
pub struct Network<S> {
    input_slots: Vec<usize>,
    output_slots: Vec<usize>,
    // (slot, bias, activation, incoming (source slot, weight))
    steps: Vec<Step<S>>,
    slot_count: usize,
}

struct Step<S> {
    slot: usize,
    bias: S,
    activation: crate::neat::activation::Activation,
    incoming: Vec<(usize, S)>,
}

impl<S: Scalar> Network<S> {
    pub fn compile(genome: &GenomeOf<S>) -> Result<Self, NeatError> {
        let order = genome.topo_order_enabled()?;
        let pos: HashMap<u32, usize> = genome
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, i))
            .collect();
        let mut incoming: Vec<Vec<(usize, S)>> = vec![Vec::new(); genome.nodes.len()];
        for c in genome.connections.iter().filter(|c| c.enabled) {
            incoming[pos[&c.out_node]].push((pos[&c.in_node], c.weight));
        }
        let mut steps = Vec::new();
        for &slot in &order {
            let n = &genome.nodes[slot];
            if n.kind == NodeKind::Input {
                continue;
            }
            steps.push(Step {
                slot,
                bias: n.bias,
                activation: n.activation,
                incoming: std::mem::take(&mut incoming[slot]),
            });
        }
        Ok(Network {
            input_slots: genome
                .nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| n.kind == NodeKind::Input)
                .map(|(i, _)| i)
                .collect(),
            output_slots: genome
                .nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| n.kind == NodeKind::Output)
                .map(|(i, _)| i)
                .collect(),
            steps,
            slot_count: genome.nodes.len(),
        })
    }

    pub fn input_count(&self) -> usize {
        self.input_slots.len()
    }

    pub fn output_count(&self) -> usize {
        self.output_slots.len()
    }

    /// One forward pass. Input nodes take their value directly (no bias, no
    /// activation); every other node computes
    /// `activation(bias + Σ weight·source)`.
    pub fn evaluate(&self, inputs: &[S]) -> Result<Vec<S>, NeatError> {
        if inputs.len() != self.input_slots.len() {
            return Err(NeatError::ArityMismatch {
                expected: self.input_slots.len(),
                got: inputs.len(),
            });
        }
        let mut values = vec![S::zero(); self.slot_count];
        for (&slot, &v) in self.input_slots.iter().zip(inputs) {
            values[slot] = v;
        }
        for step in &self.steps {
            let mut acc = step.bias;
            for &(src, w) in &step.incoming {
                acc = acc + w * values[src];
            }
            values[step.slot] = step.activation.apply(acc);
        }
        Ok(self.output_slots.iter().map(|&s| values[s]).collect())
    }
}

/// Convenience single-shot evaluation: compile + one forward pass.
pub fn evaluate_network<S: Scalar>(
    genome: &GenomeOf<S>,
    inputs: &[S],
) -> Result<Vec<S>, NeatError> {
    Network::compile(genome)?.evaluate(inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neat::activation::Activation;
    use crate::neat::genome::{ConnectionGene, NodeGene};

    fn node(id: u32, kind: NodeKind, bias: f64, activation: Activation) -> NodeGene<f64> {
        NodeGene {
            id,
            kind,
            bias,
            activation,
        }
    }

    #[test]
    fn all_zero_weights_sigmoid_gives_half() {
        let g = GenomeOf {
            genome_id: 0,
            nodes: vec![
                node(0, NodeKind::Input, 0.0, Activation::Identity),
                node(1, NodeKind::Input, 0.0, Activation::Identity),
                node(2, NodeKind::Output, 0.0, Activation::Sigmoid),
                node(3, NodeKind::Output, 0.0, Activation::Sigmoid),
            ],
            connections: vec![
                ConnectionGene {
                    innovation_id: 0,
                    in_node: 0,
                    out_node: 2,
                    weight: 0.0,
                    enabled: true,
                },
                ConnectionGene {
                    innovation_id: 1,
                    in_node: 1,
                    out_node: 3,
                    weight: 0.0,
                    enabled: true,
                },
            ],
            fitness: None,
            adjusted_fitness: None,
        };
        assert_eq!(evaluate_network(&g, &[0.9, -4.2]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn identity_pass_through() {
        let g = GenomeOf {
            genome_id: 0,
            nodes: vec![
                node(0, NodeKind::Input, 0.0, Activation::Identity),
                node(1, NodeKind::Output, 0.0, Activation::Identity),
            ],
            connections: vec![ConnectionGene {
                innovation_id: 0,
                in_node: 0,
                out_node: 1,
                weight: 1.0,
                enabled: true,
            }],
            fitness: None,
            adjusted_fitness: None,
        };
        assert_eq!(evaluate_network(&g, &[0.7]).unwrap(), vec![0.7]);
    }

    #[test]
    fn hand_evaluated_hidden_layer_oracle() {
        // 2 inputs, 1 hidden (tanh), 1 output (identity), hand-chosen weights.
        // Straight-line oracle computed independently below.
        let g = GenomeOf {
            genome_id: 0,
            nodes: vec![
                node(0, NodeKind::Input, 0.0, Activation::Identity),
                node(1, NodeKind::Input, 0.0, Activation::Identity),
                node(2, NodeKind::Hidden, 0.25, Activation::Tanh),
                node(3, NodeKind::Output, -0.5, Activation::Identity),
            ],
            connections: vec![
                ConnectionGene {
                    innovation_id: 0,
                    in_node: 0,
                    out_node: 2,
                    weight: 0.8,
                    enabled: true,
                },
                ConnectionGene {
                    innovation_id: 1,
                    in_node: 1,
                    out_node: 2,
                    weight: -1.1,
                    enabled: true,
                },
                ConnectionGene {
                    innovation_id: 2,
                    in_node: 2,
                    out_node: 3,
                    weight: 2.0,
                    enabled: true,
                },
                ConnectionGene {
                    innovation_id: 3,
                    in_node: 0,
                    out_node: 3,
                    weight: 0.5,
                    enabled: true,
                },
                // disabled connections must not contribute
                ConnectionGene {
                    innovation_id: 4,
                    in_node: 1,
                    out_node: 3,
                    weight: 100.0,
                    enabled: false,
                },
            ],
            fitness: None,
            adjusted_fitness: None,
        };
        let (x0, x1) = (0.3, -0.6);
        let hidden = (0.25f64 + 0.8 * x0 + (-1.1) * x1).tanh();
        let expected = -0.5 + 2.0 * hidden + 0.5 * x0;
        let got = evaluate_network(&g, &[x0, x1]).unwrap();
        assert_eq!(got.len(), 1);
        assert!((got[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn arity_mismatch_errors() {
        let g = GenomeOf::<f64> {
            genome_id: 0,
            nodes: vec![
                node(0, NodeKind::Input, 0.0, Activation::Identity),
                node(1, NodeKind::Output, 0.0, Activation::Sigmoid),
            ],
            connections: vec![],
            fitness: None,
            adjusted_fitness: None,
        };
        assert!(matches!(
            evaluate_network(&g, &[0.1, 0.2]),
            Err(NeatError::ArityMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn cyclic_genome_errors() {
        let g = GenomeOf {
            genome_id: 9,
            nodes: vec![
                node(0, NodeKind::Input, 0.0, Activation::Identity),
                node(1, NodeKind::Hidden, 0.0, Activation::Tanh),
                node(2, NodeKind::Hidden, 0.0, Activation::Tanh),
                node(3, NodeKind::Output, 0.0, Activation::Sigmoid),
            ],
            connections: vec![
                ConnectionGene {
                    innovation_id: 0,
                    in_node: 1,
                    out_node: 2,
                    weight: 1.0,
                    enabled: true,
                },
                ConnectionGene {
                    innovation_id: 1,
                    in_node: 2,
                    out_node: 1,
                    weight: 1.0,
                    enabled: true,
                },
            ],
            fitness: None,
            adjusted_fitness: None,
        };
        assert!(matches!(
            evaluate_network(&g, &[0.0]),
            Err(NeatError::MalformedGenome { genome_id: 9, .. })
        ));
    }

    #[test]
    fn f32_path_matches_f64_shape() {
        let g = GenomeOf::<f32> {
            genome_id: 0,
            nodes: vec![
                node32(0, NodeKind::Input),
                node32(1, NodeKind::Output),
            ],
            connections: vec![ConnectionGene {
                innovation_id: 0,
                in_node: 0,
                out_node: 1,
                weight: 1.0f32,
                enabled: true,
            }],
            fitness: None,
            adjusted_fitness: None,
        };
        let out = evaluate_network(&g, &[0.7f32]).unwrap();
        assert_eq!(out, vec![0.7f32]);
    }

    fn node32(id: u32, kind: NodeKind) -> NodeGene<f32> {
        NodeGene {
            id,
            kind,
            bias: 0.0f32,
            activation: Activation::Identity,
        }
    }
}
