use serde::{Deserialize, Serialize};

/// All NEAT hyperparameters. Defaults follow the canonical open-source
/// implementations of the algorithm; everything is overridable from the
/// experiment config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeatConfig {
    pub population_size: usize,
    pub compatibility_threshold: f64,
    /// Excess gene coefficient in the compatibility distance.
    pub c1: f64,
    /// Disjoint gene coefficient.
    pub c2: f64,
    /// Mean weight difference coefficient.
    pub c3: f64,
    /// Fraction of each species eligible as parents.
    pub survival_threshold: f64,
    pub elitism_per_species: usize,
    /// Generations without best-fitness improvement before a species is
    /// removed.
    pub stagnation_limit: usize,
    pub p_add_conn: f64,
    pub p_del_conn: f64,
    pub p_add_node: f64,
    pub p_del_node: f64,
    /// Per-weight probability of Gaussian perturbation.
    pub p_perturb: f64,
    pub perturb_sigma: f64,
    /// Per-weight probability of uniform replacement.
    pub p_replace_weight: f64,
    pub weight_range: [f64; 2],
    pub rng_seed: u64,
}

impl Default for NeatConfig {
    fn default() -> Self {
        NeatConfig {
            population_size: 150,
            compatibility_threshold: 3.0,
            c1: 1.0,
            c2: 1.0,
            c3: 0.4,
            survival_threshold: 0.2,
            elitism_per_species: 2,
            stagnation_limit: 15,
            p_add_conn: 0.15,
            p_del_conn: 0.1,
            p_add_node: 0.05,
            p_del_node: 0.03,
            p_perturb: 0.8,
            perturb_sigma: 0.5,
            p_replace_weight: 0.1,
            weight_range: [-8.0, 8.0],
            rng_seed: 0,
        }
    }
}

impl NeatConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.population_size < 2 {
            return Err("neat.population_size must be at least 2".into());
        }
        if self.compatibility_threshold <= 0.0 {
            return Err("neat.compatibility_threshold must be positive".into());
        }
        for (name, p) in [
            ("p_add_conn", self.p_add_conn),
            ("p_del_conn", self.p_del_conn),
            ("p_add_node", self.p_add_node),
            ("p_del_node", self.p_del_node),
            ("p_perturb", self.p_perturb),
            ("p_replace_weight", self.p_replace_weight),
            ("survival_threshold", self.survival_threshold),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("neat.{name} must lie in [0, 1]"));
            }
        }
        if self.p_perturb + self.p_replace_weight > 1.0 {
            return Err("neat.p_perturb + neat.p_replace_weight must not exceed 1".into());
        }
        if self.perturb_sigma < 0.0 {
            return Err("neat.perturb_sigma must be non-negative".into());
        }
        if self.weight_range[0] >= self.weight_range[1] {
            return Err("neat.weight_range must be a non-empty interval".into());
        }
        Ok(())
    }
}
