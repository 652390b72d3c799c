//! Generation planning: stagnation culling, spawn-count allotment by
//! adjusted-fitness share with largest-remainder rounding, parent pools and
//! elites.

use std::collections::{BTreeMap, HashMap};

use crate::error::NeatError;
use crate::neat::config::NeatConfig;
use crate::neat::genome::{GenomeId, GenomeOf};
use crate::neat::speciation::{EvolutionCost, SpeciesOf};
use crate::scalar::Scalar;

/// Per-species spawn counts, parent pools and elites for the next
/// generation. Keys are species ids; only species with spawn > 0 appear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationPlan {
    pub spawn_counts: BTreeMap<u32, usize>,
    pub parent_pools: BTreeMap<u32, Vec<GenomeId>>,
    pub elites: BTreeMap<u32, Vec<GenomeId>>,
}

impl GenerationPlan {
    pub fn total_spawn(&self) -> usize {
        self.spawn_counts.values().sum()
    }
}

/// Builds the plan for the next generation. Updates species ages and
/// best-fitness histories, removes stagnant species, and errors with
/// [`NeatError::TotalExtinction`] when every species is stagnant.
///
/// Species whose allotment rounds to zero are removed from `species` so the
/// plan and the species list stay consistent.
pub fn plan_generation<S: Scalar>(
    species: &mut Vec<SpeciesOf<S>>,
    population: &[GenomeOf<S>],
    config: &NeatConfig,
    cost: &mut EvolutionCost,
) -> Result<GenerationPlan, NeatError> {
    let by_id: HashMap<GenomeId, &GenomeOf<S>> =
        population.iter().map(|g| (g.genome_id, g)).collect();

    // Update history and age.
    for s in species.iter_mut() {
        let best = s
            .members
            .iter()
            .map(|id| by_id[id].fitness.expect("planning requires evaluated fitness"))
            .fold(f64::NEG_INFINITY, f64::max);
        s.best_fitness_history.push(best);
        s.age += 1;
        cost.gene_ops += s.members.len() as u64;
    }

    let stagnant = |s: &SpeciesOf<S>| -> bool {
        let h = &s.best_fitness_history;
        if h.len() <= config.stagnation_limit {
            return false;
        }
        let recent_best = h[h.len() - config.stagnation_limit..]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let earlier_best = h[..h.len() - config.stagnation_limit]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        recent_best <= earlier_best
    };

    if species.iter().all(|s| stagnant(s)) {
        return Err(NeatError::TotalExtinction);
    }
    species.retain(|s| !stagnant(s));
    species.sort_by_key(|s| s.species_id);

    // Adjusted-fitness shares. Sharing can produce negative scores (e.g.
    // step-penalty environments); shift so every member contributes >= 0
    // while leaving already non-negative runs untouched.
    let min_adjusted = species
        .iter()
        .flat_map(|s| s.members.iter())
        .map(|id| by_id[id].adjusted_fitness.expect("planning requires shared fitness"))
        .fold(f64::INFINITY, f64::min);
    let offset = if min_adjusted < 0.0 { -min_adjusted } else { 0.0 };
    let scores: Vec<f64> = species
        .iter()
        .map(|s| {
            s.members
                .iter()
                .map(|id| by_id[id].adjusted_fitness.unwrap() + offset)
                .sum()
        })
        .collect();
    let total: f64 = scores.iter().sum();

    let pop_size = config.population_size;
    let n = species.len();
    let mut counts = largest_remainder(&scores, total, pop_size, species);

    // Guarantee a minimum spawn per surviving species where feasible.
    let min_spawn = config.elitism_per_species.min(pop_size / n.max(1)).max(
        if pop_size >= n { 1 } else { 0 },
    );
    enforce_minimum(&mut counts, species, min_spawn, pop_size);

    // Assemble plan entries; species rounding to zero die.
    let mut plan = GenerationPlan {
        spawn_counts: BTreeMap::new(),
        parent_pools: BTreeMap::new(),
        elites: BTreeMap::new(),
    };
    let mut survivors = Vec::new();
    for (s, &count) in species.iter().zip(&counts) {
        if count == 0 {
            continue;
        }
        let mut ranked: Vec<GenomeId> = s.members.clone();
        ranked.sort_by(|a, b| {
            let fa = by_id[a].fitness.unwrap();
            let fb = by_id[b].fitness.unwrap();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(b))
        });
        cost.gene_ops += ranked.len() as u64;
        let pool_size = ((config.survival_threshold * ranked.len() as f64).ceil() as usize)
            .clamp(1, ranked.len());
        let elite_count = config.elitism_per_species.min(count).min(ranked.len());
        plan.spawn_counts.insert(s.species_id, count);
        plan.parent_pools
            .insert(s.species_id, ranked[..pool_size].to_vec());
        plan.elites
            .insert(s.species_id, ranked[..elite_count].to_vec());
        survivors.push(s.species_id);
    }
    species.retain(|s| survivors.contains(&s.species_id));

    debug_assert_eq!(plan.total_spawn(), pop_size);
    Ok(plan)
}

/// Proportional allotment with largest-remainder rounding; remainder ties go
/// to the lower species id. A zero score total splits evenly.
fn largest_remainder<S: Scalar>(
    scores: &[f64],
    total: f64,
    pop_size: usize,
    species: &[SpeciesOf<S>],
) -> Vec<usize> {
    let n = scores.len();
    let quotas: Vec<f64> = if total > 0.0 {
        scores.iter().map(|s| pop_size as f64 * s / total).collect()
    } else {
        vec![pop_size as f64 / n as f64; n]
    };
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra)
            .unwrap()
            .then(species[a].species_id.cmp(&species[b].species_id))
    });
    for i in 0..pop_size.saturating_sub(assigned) {
        counts[order[i % n]] += 1;
    }
    counts
}

/// Raises each species to `min_spawn`, paying by decrementing the currently
/// largest allotment (ties: higher species id pays first).
fn enforce_minimum<S: Scalar>(
    counts: &mut [usize],
    species: &[SpeciesOf<S>],
    min_spawn: usize,
    pop_size: usize,
) {
    for c in counts.iter_mut() {
        if *c < min_spawn {
            *c = min_spawn;
        }
    }
    while counts.iter().sum::<usize>() > pop_size {
        let donor = (0..counts.len())
            .filter(|&i| counts[i] > min_spawn)
            .max_by(|&a, &b| {
                counts[a]
                    .cmp(&counts[b])
                    .then(species[a].species_id.cmp(&species[b].species_id))
            });
        match donor {
            Some(i) => counts[i] -= 1,
            None => break,
        }
    }
}
