//! Ant colony TSP stage for a single vehicle.
//!
//! Pheromone lives on stop pairs of the vehicle's own stop set and starts
//! flat; the diagonal holds the pheromone for starting the tour at that stop. Ants choose the
//! next visible stop by roulette over `tau · eta^beta`, where `eta` is
//! `1 / (1 + km)` to the nearest option. Every walk deposits for itself, the
//! best of the recent walks and the best ever.

use std::collections::VecDeque;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{roulette, LevelRange, PHEROMONE_FLOOR};
use crate::ga::tsp::{join, nearest_option, partner};
use crate::model::{Problem, StopVisit};
use crate::score::{evaluate_tour, Score};
use crate::solver::{rng_from, TspStage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcoTspParams {
    pub max_unimproved: usize,
    pub max_walks: usize,
    /// Exponent on the distance heuristic.
    pub beta: f64,
    pub evaporation: f64,
    pub evaporation_prob: f64,
    /// Walks compared for convergence and recent-best elitism.
    pub window: usize,
}

impl Default for AcoTspParams {
    fn default() -> Self {
        Self {
            max_unimproved: 100,
            max_walks: 2000,
            beta: 2.0,
            evaporation: 0.05,
            evaporation_prob: 0.05,
            window: 10,
        }
    }
}

/// A stop may be entered once its partner pickup (if part of `left`) is done.
pub fn walk_is_visible(problem: &Problem, s: usize, left: &[usize]) -> bool {
    problem.stop(s).kind != crate::model::StopKind::Delivery || partner(problem, s).is_none_or(|p| !left.contains(&p))
}

fn closeness(meters: i64) -> f64 {
    1.0 / (1.0 + meters as f64 / 1000.0)
}

struct Colony<'a> {
    problem: &'a Problem,
    v: usize,
    stops: &'a [usize],
    /// Row-major over positions in `stops`.
    tau: Vec<f64>,
}

impl Colony<'_> {
    fn walk(&self, beta: f64, rng: &mut impl Rng) -> (Vec<usize>, Vec<StopVisit>) {
        let p = self.problem;
        let n = self.stops.len();
        let begin = StopVisit::new(p.tour_begin(self.v), 0);
        let mut here = p.location(begin);
        let mut prev: Option<usize> = None;
        let mut left: Vec<usize> = self.stops.to_vec();
        let mut path = Vec::with_capacity(n);
        let mut inner = Vec::with_capacity(n);
        while !left.is_empty() {
            let cands: Vec<usize> = (0..n)
                .filter(|&k| left.contains(&self.stops[k]) && walk_is_visible(p, self.stops[k], &left))
                .collect();
            let weights: Vec<f64> = cands
                .iter()
                .map(|&k| {
                    let s = self.stops[k];
                    let loc = p.stop(s).options[nearest_option(p, s, here)];
                    let t = self.tau[prev.unwrap_or(k) * n + k];
                    t * closeness(p.matrix().dist(here, loc)).powf(beta)
                })
                .collect();
            let k = cands[roulette(&weights, rng)];
            let s = self.stops[k];
            let visit = StopVisit::new(s, nearest_option(p, s, here));
            here = p.location(visit);
            inner.push(visit);
            path.push(k);
            left.retain(|&x| x != s);
            prev = Some(k);
        }
        let end_stop = p.tour_end(self.v);
        let end = StopVisit::new(end_stop, nearest_option(p, end_stop, here));
        (path, join(begin, inner, end))
    }

    fn deposit(&mut self, path: &[usize], amount: f64) {
        let n = self.stops.len();
        if let Some(&first) = path.first() {
            self.tau[first * n + first] += amount;
        }
        for w in path.windows(2) {
            self.tau[w[0] * n + w[1]] += amount;
        }
    }
}

pub fn run_tsp_aco(problem: &Problem, v: usize, stops: &[usize], params: &AcoTspParams, rng: &mut ChaCha8Rng) -> Vec<StopVisit> {
    run_tsp_aco_until(problem, v, stops, params, rng, None)
}

/// Best chain found for vehicle `v` over `stops`; stops early at `deadline`
/// once at least one walk is done.
pub fn run_tsp_aco_until(
    problem: &Problem,
    v: usize,
    stops: &[usize],
    params: &AcoTspParams,
    rng: &mut ChaCha8Rng,
    deadline: Option<Instant>,
) -> Vec<StopVisit> {
    let n = stops.len();
    if n == 0 {
        return problem.empty_chain(v);
    }
    // distance enters through the heuristic only
    let tau = vec![1.0; n * n];
    let mut colony = Colony { problem, v, stops, tau };
    let mut range = LevelRange::default();
    let mut recent: VecDeque<(Vec<usize>, Score)> = VecDeque::new();
    let mut best: Option<(Vec<usize>, Vec<StopVisit>, Score)> = None;
    let mut unimproved = 0;
    for _ in 0..params.max_walks.max(1) {
        let (path, chain) = colony.walk(params.beta, rng);
        let (score, _) = evaluate_tour(problem, v, &chain);
        range.observe(&score);
        if best.as_ref().is_none_or(|b| score < b.2) {
            best = Some((path.clone(), chain, score));
            unimproved = 0;
        } else {
            unimproved += 1;
        }
        recent.push_back((path.clone(), score));
        if recent.len() > params.window.max(1) {
            recent.pop_front();
        }
        colony.deposit(&path, range.amount(&score));
        let (rp, rs) = recent.iter().min_by_key(|r| r.1).expect("non-empty window").clone();
        colony.deposit(&rp, range.amount(&rs));
        let (bp, _, bs) = best.as_ref().expect("set above");
        let (bp, bs) = (bp.clone(), *bs);
        colony.deposit(&bp, range.amount(&bs));
        if rng.gen_bool(params.evaporation_prob.clamp(0.0, 1.0)) {
            for t in &mut colony.tau {
                *t = (*t * (1.0 - params.evaporation)).max(PHEROMONE_FLOOR);
            }
        }
        let converged = recent.len() >= params.window.max(1) && recent.iter().all(|r| r.0 == recent[0].0);
        if converged || unimproved >= params.max_unimproved || deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
    }
    best.expect("at least one walk").1
}

/// [`TspStage`] backed by the ant colony.
#[derive(Clone, Debug, Default)]
pub struct AcoTsp(pub AcoTspParams);

impl TspStage for AcoTsp {
    fn solve(&self, problem: &Problem, v: usize, orders: &[usize], seed: u64, deadline: Instant) -> Vec<StopVisit> {
        let stops: Vec<usize> = orders.iter().flat_map(|&o| [problem.pickup(o), problem.delivery(o)]).collect();
        run_tsp_aco_until(problem, v, &stops, &self.0, &mut rng_from(seed), Some(deadline))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::TravelMatrix;
    use crate::ga::is_precedence_valid;
    use crate::model::*;

    fn line(xs: &[f64]) -> Problem {
        let mut locations = vec![Location { id: "d".into(), x: 0.0, y: 0.0 }];
        for (i, &x) in xs.iter().enumerate() {
            locations.push(Location { id: format!("c{i}"), x, y: 0.0 });
            locations.push(Location { id: format!("p{i}"), x: -x, y: 500.0 });
        }
        let inst = Instance {
            name: None,
            locations,
            vehicles: vec![Vehicle::simple("v", "d", Amount::new(100, 100.0, 100.0))],
            trailers: vec![],
            drivers: vec![],
            orders: (0..xs.len())
                .map(|i| Order::simple(&format!("o{i}"), &format!("p{i}"), &format!("c{i}"), Amount::new(1, 0.0, 0.0)))
                .collect(),
            pause_rules: vec![],
            max_runtime_s: 1,
            distance: Default::default(),
        };
        let m = TravelMatrix::build_euclidean(&inst.locations, 10.0).unwrap();
        Problem::new(inst, m).unwrap()
    }

    #[test]
    fn walks_respect_precedence() {
        let p = line(&[1000.0, 4000.0, 2500.0, 7000.0]);
        let stops: Vec<usize> = (0..4).flat_map(|o| [p.pickup(o), p.delivery(o)]).collect();
        let mut rng = rng_from(5);
        for _ in 0..20 {
            let c = run_tsp_aco(&p, 0, &stops, &AcoTspParams { max_walks: 3, ..Default::default() }, &mut rng);
            assert_eq!(c.len(), stops.len() + 2);
            assert!(is_precedence_valid(&p, &c));
        }
    }

    #[test]
    fn close_to_brute_force_optimum() {
        let p = line(&[1000.0, 4000.0, 2500.0]);
        let stops: Vec<usize> = (0..3).flat_map(|o| [p.pickup(o), p.delivery(o)]).collect();
        let opt = crate::baselines::brute_force_tsp(&p, 0, &stops, Default::default()).unwrap().1;
        let c = run_tsp_aco(&p, 0, &stops, &AcoTspParams::default(), &mut rng_from(1));
        let got = evaluate_tour(&p, 0, &c).0;
        assert!(got.is_feasible());
        assert!(got.s2 as f64 <= opt.s2 as f64 * 1.05, "{got} vs {opt}");
    }

    #[test]
    fn deterministic_per_seed() {
        let p = line(&[1000.0, 4000.0, 2500.0, 300.0]);
        let stops: Vec<usize> = (0..4).flat_map(|o| [p.pickup(o), p.delivery(o)]).collect();
        let a = run_tsp_aco(&p, 0, &stops, &AcoTspParams::default(), &mut rng_from(9));
        let b = run_tsp_aco(&p, 0, &stops, &AcoTspParams::default(), &mut rng_from(9));
        assert_eq!(a, b);
    }
}
