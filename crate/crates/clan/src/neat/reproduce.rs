//! Reproduction: initial genome construction, crossover and the five
//! mutation operators.
//!
//! Every random choice indexes genes by their position in the storage
//! vectors, never by id value, so a child bred remotely with provisional
//! ids takes exactly the same decisions as the serial baseline.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use std::collections::HashMap;

use crate::error::NeatError;
use crate::neat::activation::Activation;
use crate::neat::config::NeatConfig;
use crate::neat::genome::{ConnectionGene, GenomeId, GenomeOf, NodeGene, NodeKind};
use crate::neat::innovation::InnovationSource;
use crate::scalar::Scalar;

/// Builds a starting genome: inputs and outputs, optionally a fully
/// connected hidden layer, weights drawn from a unit normal clamped to the
/// configured range. Initial node ids and innovation ids are fixed by
/// construction so they coincide across clans.
pub fn initial_genome<S: Scalar>(
    genome_id: GenomeId,
    inputs: usize,
    outputs: usize,
    hidden: usize,
    config: &NeatConfig,
    rng: &mut ChaCha8Rng,
) -> GenomeOf<S> {
    let mut nodes = Vec::with_capacity(inputs + outputs + hidden);
    for i in 0..inputs {
        nodes.push(NodeGene {
            id: i as u32,
            kind: NodeKind::Input,
            bias: S::zero(),
            activation: Activation::Identity,
        });
    }
    let draw_bias = |rng: &mut ChaCha8Rng| clamp_weight(S::standard_normal(rng), config);
    for o in 0..outputs {
        nodes.push(NodeGene {
            id: (inputs + o) as u32,
            kind: NodeKind::Output,
            bias: draw_bias(rng),
            activation: Activation::SteepSigmoid,
        });
    }
    for h in 0..hidden {
        nodes.push(NodeGene {
            id: (inputs + outputs + h) as u32,
            kind: NodeKind::Hidden,
            bias: draw_bias(rng),
            activation: Activation::SteepSigmoid,
        });
    }

    let mut connections = Vec::new();
    let mut innovation = 0u32;
    let connect = |connections: &mut Vec<ConnectionGene<S>>,
                       innovation: &mut u32,
                       in_node: u32,
                       out_node: u32,
                       rng: &mut ChaCha8Rng| {
        connections.push(ConnectionGene {
            innovation_id: *innovation,
            in_node,
            out_node,
            weight: clamp_weight(S::standard_normal(rng), config),
            enabled: true,
        });
        *innovation += 1;
    };
    if hidden == 0 {
        for i in 0..inputs {
            for o in 0..outputs {
                connect(
                    &mut connections,
                    &mut innovation,
                    i as u32,
                    (inputs + o) as u32,
                    rng,
                );
            }
        }
    } else {
        for i in 0..inputs {
            for h in 0..hidden {
                connect(
                    &mut connections,
                    &mut innovation,
                    i as u32,
                    (inputs + outputs + h) as u32,
                    rng,
                );
            }
        }
        for h in 0..hidden {
            for o in 0..outputs {
                connect(
                    &mut connections,
                    &mut innovation,
                    (inputs + outputs + h) as u32,
                    (inputs + o) as u32,
                    rng,
                );
            }
        }
    }

    GenomeOf {
        genome_id,
        nodes,
        connections,
        fitness: None,
        adjusted_fitness: None,
    }
}

/// Number of innovation and node ids consumed by initial genome
/// construction; the canonical tracker namespace must start above this.
pub const INITIAL_ID_SPACE: u32 = 1 << 16;

fn clamp_weight<S: Scalar>(w: S, config: &NeatConfig) -> S {
    let lo = S::from_config(config.weight_range[0]);
    let hi = S::from_config(config.weight_range[1]);
    if w < lo {
        lo
    } else if w > hi {
        hi
    } else {
        w
    }
}

/// Crossover: matching connection genes (same innovation id) take weight and
/// enabled flag from either parent with equal probability; disjoint and
/// excess genes come from the fitter parent only (ties favor `parent_a`).
/// Node genes are those referenced by inherited connections plus all inputs
/// and outputs, with attributes from the fitter parent.
pub fn crossover<S: Scalar>(
    parent_a: &GenomeOf<S>,
    parent_b: &GenomeOf<S>,
    child_id: GenomeId,
    rng: &mut ChaCha8Rng,
) -> Result<GenomeOf<S>, NeatError> {
    let fa = parent_a
        .fitness
        .ok_or(NeatError::UnevaluatedGenome(parent_a.genome_id))?;
    let fb = parent_b
        .fitness
        .ok_or(NeatError::UnevaluatedGenome(parent_b.genome_id))?;
    let (fitter, other) = if fb > fa {
        (parent_b, parent_a)
    } else {
        (parent_a, parent_b)
    };

    let other_conns: HashMap<u32, &ConnectionGene<S>> = other
        .connections
        .iter()
        .map(|c| (c.innovation_id, c))
        .collect();

    let mut connections = Vec::with_capacity(fitter.connections.len());
    for gene in &fitter.connections {
        let mut inherited = *gene;
        if let Some(matched) = other_conns.get(&gene.innovation_id) {
            if rng.random_bool(0.5) {
                inherited.weight = matched.weight;
                inherited.enabled = matched.enabled;
            }
        }
        connections.push(inherited);
    }

    let mut referenced: std::collections::HashSet<u32> = std::collections::HashSet::new();
    for c in &connections {
        referenced.insert(c.in_node);
        referenced.insert(c.out_node);
    }
    let nodes = fitter
        .nodes
        .iter()
        .filter(|n| n.kind != NodeKind::Hidden || referenced.contains(&n.id))
        .copied()
        .collect();

    Ok(GenomeOf {
        genome_id: child_id,
        nodes,
        connections,
        fitness: None,
        adjusted_fitness: None,
    })
}

/// Applies the mutation operators in a fixed order: add-node,
/// add-connection, delete-connection, delete-node, then weight
/// perturbation. Operators that cannot apply are skipped silently.
pub fn mutate<S: Scalar>(
    genome: &mut GenomeOf<S>,
    config: &NeatConfig,
    innovations: &mut dyn InnovationSource,
    rng: &mut ChaCha8Rng,
) {
    if rng.random::<f64>() < config.p_add_node {
        mutate_add_node(genome, innovations, rng);
    }
    if rng.random::<f64>() < config.p_add_conn {
        mutate_add_connection(genome, config, innovations, rng);
    }
    if rng.random::<f64>() < config.p_del_conn {
        if !genome.connections.is_empty() {
            let idx = rng.random_range(0..genome.connections.len());
            genome.connections.remove(idx);
        }
    }
    if rng.random::<f64>() < config.p_del_node {
        mutate_delete_node(genome, rng);
    }
    mutate_weights(genome, config, rng);
}

/// Splits a random enabled connection `i -> o` into `i -> new` (weight 1)
/// and `new -> o` (original weight), disabling the original gene.
fn mutate_add_node<S: Scalar>(
    genome: &mut GenomeOf<S>,
    innovations: &mut dyn InnovationSource,
    rng: &mut ChaCha8Rng,
) {
    let enabled: Vec<usize> = genome
        .connections
        .iter()
        .enumerate()
        .filter(|(_, c)| c.enabled)
        .map(|(i, _)| i)
        .collect();
    if enabled.is_empty() {
        return;
    }
    let idx = enabled[rng.random_range(0..enabled.len())];
    let (split_innovation, in_node, out_node, weight) = {
        let c = &genome.connections[idx];
        (c.innovation_id, c.in_node, c.out_node, c.weight)
    };
    let new_node = innovations.split_node_id(split_innovation);
    if genome.nodes.iter().any(|n| n.id == new_node) {
        // The memoized split id already lives in this genome (same split
        // performed on an ancestor this generation); skip rather than
        // duplicate the node.
        return;
    }
    genome.connections[idx].enabled = false;
    genome.nodes.push(NodeGene {
        id: new_node,
        kind: NodeKind::Hidden,
        bias: S::zero(),
        activation: Activation::SteepSigmoid,
    });
    let first = innovations.connection_innovation(in_node, new_node);
    genome.connections.push(ConnectionGene {
        innovation_id: first,
        in_node,
        out_node: new_node,
        weight: S::one(),
        enabled: true,
    });
    let second = innovations.connection_innovation(new_node, out_node);
    genome.connections.push(ConnectionGene {
        innovation_id: second,
        in_node: new_node,
        out_node,
        weight,
        enabled: true,
    });
}

/// Adds a new enabled connection between a random valid pair that does not
/// close a cycle in the full connection graph.
fn mutate_add_connection<S: Scalar>(
    genome: &mut GenomeOf<S>,
    config: &NeatConfig,
    innovations: &mut dyn InnovationSource,
    rng: &mut ChaCha8Rng,
) {
    let mut candidates = Vec::new();
    for (ui, u) in genome.nodes.iter().enumerate() {
        if u.kind == NodeKind::Output {
            continue;
        }
        for (vi, v) in genome.nodes.iter().enumerate() {
            if v.kind == NodeKind::Input || ui == vi {
                continue;
            }
            if genome.has_connection(u.id, v.id) {
                continue;
            }
            if genome.would_create_cycle(u.id, v.id) {
                continue;
            }
            candidates.push((u.id, v.id));
        }
    }
    if candidates.is_empty() {
        return;
    }
    let (in_node, out_node) = candidates[rng.random_range(0..candidates.len())];
    let weight = S::from_config(rng.random_range(config.weight_range[0]..=config.weight_range[1]));
    let innovation_id = innovations.connection_innovation(in_node, out_node);
    if genome
        .connections
        .iter()
        .any(|c| c.innovation_id == innovation_id)
    {
        return;
    }
    genome.connections.push(ConnectionGene {
        innovation_id,
        in_node,
        out_node,
        weight,
        enabled: true,
    });
}

/// Removes a random hidden node together with its incident connections.
fn mutate_delete_node<S: Scalar>(genome: &mut GenomeOf<S>, rng: &mut ChaCha8Rng) {
    let hidden: Vec<usize> = genome
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.kind == NodeKind::Hidden)
        .map(|(i, _)| i)
        .collect();
    if hidden.is_empty() {
        return;
    }
    let idx = hidden[rng.random_range(0..hidden.len())];
    let id = genome.nodes[idx].id;
    genome.nodes.remove(idx);
    genome
        .connections
        .retain(|c| c.in_node != id && c.out_node != id);
}

/// Per-weight Gaussian perturbation or uniform replacement; connection
/// weights first in storage order, then non-input biases.
fn mutate_weights<S: Scalar>(genome: &mut GenomeOf<S>, config: &NeatConfig, rng: &mut ChaCha8Rng) {
    let sigma = S::from_config(config.perturb_sigma);
    let lo = config.weight_range[0];
    let hi = config.weight_range[1];
    let touch = |value: &mut S, rng: &mut ChaCha8Rng| {
        let r = rng.random::<f64>();
        if r < config.p_perturb {
            let next = *value + S::standard_normal(rng) * sigma;
            *value = clamp_weight(next, config);
        } else if r < config.p_perturb + config.p_replace_weight {
            *value = S::from_config(rng.random_range(lo..=hi));
        }
    };
    for c in &mut genome.connections {
        touch(&mut c.weight, rng);
    }
    for n in &mut genome.nodes {
        if n.kind != NodeKind::Input {
            touch(&mut n.bias, rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neat::innovation::InnovationTracker;
    use crate::rng::derive_rng;

    fn cfg() -> NeatConfig {
        NeatConfig::default()
    }

    fn seeded(tag: u64) -> ChaCha8Rng {
        derive_rng(99, &[tag])
    }

    fn base_genome(id: GenomeId) -> GenomeOf<f64> {
        initial_genome(id, 2, 1, 0, &cfg(), &mut seeded(id))
    }

    #[test]
    fn initial_genome_is_valid_and_fully_connected() {
        let g = base_genome(0);
        g.validate().unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.connections.len(), 2);
        assert_eq!(g.gene_count(), 5);
    }

    #[test]
    fn crossover_of_identical_parents_is_identity() {
        let mut g = base_genome(0);
        g.fitness = Some(1.0);
        let child = crossover(&g, &g, 42, &mut seeded(1)).unwrap();
        assert_eq!(child.genome_id, 42);
        assert_eq!(child.nodes, g.nodes);
        assert_eq!(child.connections, g.connections);
    }

    #[test]
    fn fitter_parent_contributes_excess_genes() {
        let mut a = base_genome(0);
        let mut b = base_genome(1);
        // Align structural genes; give a an extra hidden path.
        b.connections = a.connections.clone();
        b.nodes = a.nodes.clone();
        let mut tracker = InnovationTracker::new(INITIAL_ID_SPACE);
        let h = tracker.split_node_id(0);
        a.nodes.push(NodeGene {
            id: h,
            kind: NodeKind::Hidden,
            bias: 0.0,
            activation: Activation::SteepSigmoid,
        });
        let extra = tracker.connection_innovation(0, h);
        a.connections.push(ConnectionGene {
            innovation_id: extra,
            in_node: 0,
            out_node: h,
            weight: 0.5,
            enabled: true,
        });
        a.fitness = Some(2.0);
        b.fitness = Some(1.0);
        let child = crossover(&a, &b, 7, &mut seeded(2)).unwrap();
        assert!(child
            .connections
            .iter()
            .any(|c| c.innovation_id == extra));
        assert!(child.nodes.iter().any(|n| n.id == h));

        // And the reverse: b fitter means a's excess genes are absent.
        a.fitness = Some(1.0);
        b.fitness = Some(2.0);
        let child = crossover(&a, &b, 8, &mut seeded(3)).unwrap();
        assert!(!child.connections.iter().any(|c| c.innovation_id == extra));
    }

    #[test]
    fn equal_fitness_ties_go_to_parent_a() {
        let mut a = base_genome(0);
        let mut b = base_genome(1);
        b.nodes = a.nodes.clone();
        b.connections = a.connections.clone();
        // b gets a disjoint gene that a lacks.
        let mut tracker = InnovationTracker::new(INITIAL_ID_SPACE);
        let h = tracker.split_node_id(1);
        b.nodes.push(NodeGene {
            id: h,
            kind: NodeKind::Hidden,
            bias: 0.0,
            activation: Activation::SteepSigmoid,
        });
        b.connections.push(ConnectionGene {
            innovation_id: tracker.connection_innovation(1, h),
            in_node: 1,
            out_node: h,
            weight: 1.0,
            enabled: true,
        });
        a.fitness = Some(3.0);
        b.fitness = Some(3.0);
        let child = crossover(&a, &b, 9, &mut seeded(4)).unwrap();
        let a_structure: Vec<u32> = a.connections.iter().map(|c| c.innovation_id).collect();
        let child_structure: Vec<u32> =
            child.connections.iter().map(|c| c.innovation_id).collect();
        assert_eq!(child_structure, a_structure);
    }

    #[test]
    fn zero_probability_mutation_is_identity() {
        let mut c = cfg();
        c.p_add_conn = 0.0;
        c.p_del_conn = 0.0;
        c.p_add_node = 0.0;
        c.p_del_node = 0.0;
        c.p_perturb = 0.0;
        c.p_replace_weight = 0.0;
        let mut g = base_genome(0);
        let before = g.clone();
        let mut tracker = InnovationTracker::new(INITIAL_ID_SPACE);
        mutate(&mut g, &c, &mut tracker, &mut seeded(5));
        assert_eq!(g, before);
    }

    #[test]
    fn add_node_splits_connection() {
        let mut c = cfg();
        c.p_add_node = 1.0;
        c.p_add_conn = 0.0;
        c.p_del_conn = 0.0;
        c.p_del_node = 0.0;
        c.p_perturb = 0.0;
        c.p_replace_weight = 0.0;
        let mut g = initial_genome::<f64>(0, 1, 1, 0, &c, &mut seeded(6));
        g.connections[0].weight = 0.6;
        let before_count = g.gene_count();
        let mut tracker = InnovationTracker::new(INITIAL_ID_SPACE);
        mutate(&mut g, &c, &mut tracker, &mut seeded(7));
        g.validate().unwrap();
        // original disabled, i->h weight 1.0, h->o weight 0.6
        assert!(!g.connections[0].enabled);
        let hidden = g
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::Hidden)
            .expect("hidden node added");
        let first = g
            .connections
            .iter()
            .find(|c| c.out_node == hidden.id)
            .unwrap();
        let second = g
            .connections
            .iter()
            .find(|c| c.in_node == hidden.id)
            .unwrap();
        assert_eq!(first.weight, 1.0);
        assert_eq!(second.weight, 0.6);
        // gene count grows by exactly 3: one node, two connections, the
        // disabled original is kept.
        assert_eq!(g.gene_count(), before_count + 3);
    }

    #[test]
    fn perturb_only_mean_delta_is_centered() {
        let mut c = cfg();
        c.p_add_conn = 0.0;
        c.p_del_conn = 0.0;
        c.p_add_node = 0.0;
        c.p_del_node = 0.0;
        c.p_perturb = 0.8;
        c.perturb_sigma = 0.1;
        c.p_replace_weight = 0.0;
        let mut sum = 0.0;
        let mut count = 0u64;
        let mut tracker = InnovationTracker::new(INITIAL_ID_SPACE);
        for i in 0..10_000u64 {
            let mut g = base_genome(0);
            let before: Vec<f64> = g.connections.iter().map(|c| c.weight).collect();
            mutate(&mut g, &c, &mut tracker, &mut derive_rng(1234, &[i]));
            for (c, b) in g.connections.iter().zip(&before) {
                sum += c.weight - b;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!(mean.abs() < 0.01, "mean delta {mean}");
    }

    #[test]
    fn mutation_preserves_invariants_over_many_steps() {
        let mut c = cfg();
        c.p_add_conn = 0.5;
        c.p_add_node = 0.3;
        c.p_del_conn = 0.2;
        c.p_del_node = 0.2;
        let mut g = initial_genome::<f64>(0, 3, 2, 0, &c, &mut seeded(8));
        let mut tracker = InnovationTracker::new(INITIAL_ID_SPACE);
        for i in 0..300u64 {
            if i % 10 == 0 {
                tracker.begin_generation();
            }
            mutate(&mut g, &c, &mut tracker, &mut derive_rng(5, &[i]));
            g.validate().unwrap();
        }
    }
}
