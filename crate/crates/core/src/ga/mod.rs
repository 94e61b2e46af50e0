//! Two-stage genetic algorithm: the VRP stage evolves order-to-vehicle
//! assignments, the nested TSP stage evolves each vehicle's visit order.

pub(crate) mod tsp;
mod vrp;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Problem, Solution};
use crate::score::Score;

pub use tsp::{
    is_precedence_valid, nearest_neighbor_chain, ordered_crossover_at, repair_precedence, run_tsp_ga,
    run_tsp_ga_until, swap_visits, tsp_crossover, tsp_mutate, tsp_mutate_with, tsp_population_size, GaTsp,
    TspCrossover, TspGaParams, TspMutator,
};
pub use vrp::{
    initial_assignment, initial_individual, place_by_distance, run_vrp_ga, run_vrp_ga_observed, vrp_crossover,
    vrp_mutate, VrpCrossover, VrpMutator, MAX_MUTATION_RETRIES,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    /// `None` uses [`default_population_size`].
    pub population_size: Option<usize>,
    pub mutation_prob: f64,
    pub max_unimproved: usize,
    /// Seconds.
    pub max_runtime: f64,
    pub rng_seed: u64,
    /// Optional hard cap on generations; makes runs independent of wall time.
    pub max_generations: Option<usize>,
    pub tsp: TspGaParams,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population_size: None,
            mutation_prob: 0.5,
            max_unimproved: 500,
            max_runtime: 300.0,
            rng_seed: 0,
            max_generations: None,
            tsp: TspGaParams::default(),
        }
    }
}

/// A solution with its score; the GA's unit of selection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Individual {
    pub solution: Solution,
    pub score: Score,
}

/// `ceil(0.1·|O| + |V|^1.25 + PD orders + 2·multi-option stops)`, at least 4.
/// Every order is a pickup-and-delivery order in this model.
pub fn default_population_size(problem: &Problem) -> usize {
    population_formula(
        problem.n_orders(),
        (problem.n_vehicles() as f64).powf(1.25),
        problem.n_orders(),
        problem.multi_option_stops(),
    )
}

pub(crate) fn population_formula(items: usize, fleet_term: f64, pd: usize, multi: usize) -> usize {
    let raw = 0.1 * items as f64 + fleet_term + pd as f64 + 2.0 * multi as f64;
    // guard against 0.1·n landing a hair above an integer
    ((raw - 1e-9).ceil().max(0.0) as usize).max(4)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionKind {
    Uniform,
    RankWeighted,
    Tournament,
}

impl SelectionKind {
    pub const ALL: [SelectionKind; 3] = [SelectionKind::Uniform, SelectionKind::RankWeighted, SelectionKind::Tournament];

    pub fn random(rng: &mut impl Rng) -> Self {
        Self::ALL[rng.gen_range(0..Self::ALL.len())]
    }
}

pub const TOURNAMENT_SIZE: usize = 10;

/// Picks one index from a population sorted best-first (`scores[0]` best).
pub fn select_one(scores: &[Score], kind: SelectionKind, rng: &mut impl Rng) -> usize {
    let n = scores.len();
    match kind {
        SelectionKind::Uniform => rng.gen_range(0..n),
        SelectionKind::RankWeighted => {
            // weight n - rank; total n(n+1)/2
            let total = n * (n + 1) / 2;
            let mut r = rng.gen_range(0..total);
            for rank in 0..n {
                let w = n - rank;
                if r < w {
                    return rank;
                }
                r -= w;
            }
            n - 1
        }
        SelectionKind::Tournament => {
            let mut round: Vec<usize> = sample(rng, n, TOURNAMENT_SIZE.min(n)).into_vec();
            while round.len() > 1 {
                round = round
                    .chunks(2)
                    .map(|pair| match pair {
                        [a, b] => {
                            if (scores[*b], *b) < (scores[*a], *a) {
                                *b
                            } else {
                                *a
                            }
                        }
                        [a] => *a,
                        _ => unreachable!(),
                    })
                    .collect();
            }
            round[0]
        }
    }
}

/// Two distinct parents (the same one twice only if the population has one member).
pub fn select_parents(scores: &[Score], kind: SelectionKind, rng: &mut impl Rng) -> (usize, usize) {
    let a = select_one(scores, kind, rng);
    if scores.len() < 2 {
        return (a, a);
    }
    for _ in 0..32 {
        let b = select_one(scores, kind, rng);
        if b != a {
            return (a, b);
        }
    }
    let b = (a + 1 + rng.gen_range(0..scores.len() - 1)) % scores.len();
    (a, b)
}

/// Keeps the best `size` members, ties resolved by insertion order.
pub(crate) fn truncate<T>(pop: &mut Vec<(T, Score)>, size: usize) {
    pop.sort_by(|a, b| a.1.cmp(&b.1));
    pop.truncate(size);
}

/// [`truncate`] that ranks repeated genomes behind every distinct one, so
/// clones only survive when there are too few distinct members.
pub(crate) fn truncate_distinct<T: Eq + std::hash::Hash + Clone>(pop: &mut Vec<(T, Score)>, size: usize) {
    pop.sort_by(|a, b| a.1.cmp(&b.1));
    let mut seen = std::collections::HashSet::new();
    let (mut keep, clones): (Vec<_>, Vec<_>) = pop.drain(..).partition(|m| seen.insert(m.0.clone()));
    keep.extend(clones);
    keep.truncate(size);
    *pop = keep;
}
