use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{apply_frozen, Evaluator};
use crate::error::Result;
use crate::genome::{crossover, random_genome, KernelGenome, SearchSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneticParams {
    pub population: usize,
    pub mutation_rate: f64,
    pub tournament: usize,
    pub elitism: usize,
    pub max_generations: usize,
}

impl Default for GeneticParams {
    fn default() -> Self {
        Self {
            population: 20,
            mutation_rate: 0.1,
            tournament: 2,
            elitism: 1,
            max_generations: 1000,
        }
    }
}

fn tournament<R: Rng>(costs: &[f64], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..costs.len());
    for _ in 1..size {
        let c = rng.random_range(0..costs.len());
        if costs[c] < costs[best] || (costs[c] == costs[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Evaluates a population, keeping only members that received a cost.
fn score(ev: &mut Evaluator<'_>, pop: Vec<KernelGenome>) -> Result<(Vec<KernelGenome>, Vec<f64>)> {
    let costs = ev.evaluate_batch(&pop)?;
    Ok(pop
        .into_iter()
        .zip(costs)
        .filter_map(|(g, c)| c.map(|c| (g, c)))
        .unzip())
}

pub fn genetic_search(
    space: &SearchSpace,
    ev: &mut Evaluator<'_>,
    params: &GeneticParams,
    frozen_mask: Option<u64>,
    seed: u64,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = (0..params.population)
        .map(|_| random_genome(space, &mut rng).map(|g| apply_frozen(g, frozen_mask)))
        .collect::<Result<Vec<_>>>()?;
    evolve(initial, ev, params, frozen_mask, &mut rng)
}

/// Runs generations starting from `population`.
pub(crate) fn evolve(
    population: Vec<KernelGenome>,
    ev: &mut Evaluator<'_>,
    params: &GeneticParams,
    frozen_mask: Option<u64>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let (mut pop, mut costs) = score(ev, population)?;
    for _ in 0..params.max_generations {
        if ev.exhausted() || pop.len() < 2 {
            break;
        }
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
        let mut next: Vec<KernelGenome> = order[..params.elitism.min(pop.len())]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        while next.len() < params.population {
            let a = tournament(&costs, params.tournament, rng);
            let b = tournament(&costs, params.tournament, rng);
            let point = rng.random_range(0..=pop[a].m());
            let child = crossover(&pop[a], &pop[b], point)?;
            let child = child.mutate(params.mutation_rate, rng)?;
            next.push(apply_frozen(child, frozen_mask));
        }
        let (p, c) = score(ev, next)?;
        pop = p;
        costs = c;
    }
    Ok(())
}
