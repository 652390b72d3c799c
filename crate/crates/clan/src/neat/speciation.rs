//! Speciation and explicit fitness sharing.

use std::collections::HashMap;

use crate::error::NeatError;
use crate::neat::config::NeatConfig;
use crate::neat::genome::{compatibility_distance, GenomeId, GenomeOf};
use crate::scalar::Scalar;

/// A fitness-sharing group of structurally similar genomes.
#[derive(Debug, Clone)]
pub struct SpeciesOf<S> {
    pub species_id: u32,
    /// A member carried over from the previous generation this species
    /// survived; new genomes are matched against it.
    pub representative: GenomeOf<S>,
    pub members: Vec<GenomeId>,
    /// Best raw fitness per generation, appended during planning.
    pub best_fitness_history: Vec<f64>,
    pub age: u32,
}

/// Tracks gene-ops spent by an evolution phase, in the genes-processed
/// cost metric.
#[derive(Debug, Default, Clone, Copy)]
pub struct EvolutionCost {
    pub gene_ops: u64,
}

/// Assigns each genome to the first species (ascending `species_id`) whose
/// representative lies within the compatibility threshold; unmatched genomes
/// found a new species with themselves as representative. Empty species are
/// dropped, and each surviving species' representative becomes its
/// lowest-id current member.
pub fn speciate<S: Scalar>(
    population: &[GenomeOf<S>],
    previous_species: Vec<SpeciesOf<S>>,
    config: &NeatConfig,
    next_species_id: &mut u32,
    cost: &mut EvolutionCost,
) -> Vec<SpeciesOf<S>> {
    let mut species = previous_species;
    species.sort_by_key(|s| s.species_id);
    for s in &mut species {
        s.members.clear();
    }
    for genome in population {
        let mut assigned = false;
        for s in &mut species {
            cost.gene_ops +=
                (genome.connections.len() + s.representative.connections.len()) as u64;
            let distance = compatibility_distance(
                genome,
                &s.representative,
                config.c1,
                config.c2,
                config.c3,
            );
            if distance < config.compatibility_threshold {
                s.members.push(genome.genome_id);
                assigned = true;
                break;
            }
        }
        if !assigned {
            let id = *next_species_id;
            *next_species_id += 1;
            species.push(SpeciesOf {
                species_id: id,
                representative: genome.clone(),
                members: vec![genome.genome_id],
                best_fitness_history: Vec::new(),
                age: 0,
            });
        }
    }
    species.retain(|s| !s.members.is_empty());
    // Re-anchor each representative on a current member for next generation.
    let by_id: HashMap<GenomeId, &GenomeOf<S>> =
        population.iter().map(|g| (g.genome_id, g)).collect();
    for s in &mut species {
        let rep_id = *s.members.iter().min().expect("non-empty species");
        s.representative = (*by_id[&rep_id]).clone();
    }
    species
}

/// Explicit fitness sharing: each member's adjusted fitness is its raw
/// fitness divided by the species size.
pub fn share_fitness<S: Scalar>(
    species: &[SpeciesOf<S>],
    population: &mut [GenomeOf<S>],
    cost: &mut EvolutionCost,
) -> Result<(), NeatError> {
    let mut index: HashMap<GenomeId, usize> = population
        .iter()
        .enumerate()
        .map(|(i, g)| (g.genome_id, i))
        .collect();
    for s in species {
        let size = s.members.len() as f64;
        for &id in &s.members {
            let slot = index
                .remove(&id)
                .expect("species member missing from population");
            let genome = &mut population[slot];
            let raw = genome.fitness.ok_or(NeatError::UnevaluatedGenome(id))?;
            genome.adjusted_fitness = Some(raw / size);
            cost.gene_ops += 1;
        }
    }
    Ok(())
}
