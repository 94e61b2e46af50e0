//! Tabu search over complete solutions.
//!
//! Neighborhood: relocate an order (to another vehicle or back into its own
//! chain) at its best-scoring insertion, move all orders of one vehicle to
//! another, move, swap or reverse visits within a chain, and change a visit's
//! location option. Each step takes the best admissible neighbor even when it
//! is worse. A moved order may not return to its old vehicle, and a moved
//! visit may not move again, for `tabu_tenure` steps unless the move beats
//! the best-ever score.

use std::collections::HashMap;

use log::debug;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ga::{is_precedence_valid, nearest_neighbor_chain};
use crate::model::{chain_orders, Problem, Solution, StopVisit};
use crate::score::{evaluate_tour, evaluate_with, EvaluatedSolution};
use crate::solver::{rng_from, Clock, Observer, Reporter};
use crate::timeline::{schedule_tour, ScheduledTour};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabuParams {
    pub tabu_tenure: usize,
    pub max_unimproved: usize,
    /// Seconds.
    pub max_runtime: f64,
    pub rng_seed: u64,
    /// Neighborhoods larger than this are sampled.
    pub sample_size: usize,
    pub max_iterations: Option<usize>,
}

impl Default for TabuParams {
    fn default() -> Self {
        Self {
            tabu_tenure: 7,
            max_unimproved: 500,
            max_runtime: 300.0,
            rng_seed: 0,
            sample_size: 200,
            max_iterations: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Move {
    Relocate { order: usize, from: usize, to: usize },
    Clear { from: usize, to: usize },
    Reverse { v: usize, i: usize, j: usize },
    Shift { v: usize, from: usize, to: usize },
    Swap { v: usize, i: usize, j: usize },
    Option { v: usize, pos: usize, option: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Attr {
    OrderOn(usize, usize),
    Stop(usize),
}

fn neighborhood(problem: &Problem, chains: &[Vec<StopVisit>]) -> Vec<Move> {
    let mut moves = Vec::new();
    let nv = chains.len();
    for (v, chain) in chains.iter().enumerate() {
        let orders = chain_orders(problem, chain);
        for &order in &orders {
            for to in 0..nv {
                moves.push(Move::Relocate { order, from: v, to });
            }
        }
        if !orders.is_empty() {
            for to in (0..nv).filter(|&w| w != v) {
                moves.push(Move::Clear { from: v, to });
            }
        }
        let n = chain.len();
        for from in 1..n.saturating_sub(1) {
            for to in 1..n - 1 {
                if to != from {
                    moves.push(Move::Shift { v, from, to });
                }
            }
            for j in from + 1..n - 1 {
                moves.push(Move::Swap { v, i: from, j });
                moves.push(Move::Reverse { v, i: from, j });
            }
        }
        for pos in 0..n {
            for option in 0..problem.stop(chain[pos].stop).options.len() {
                if option != chain[pos].option {
                    moves.push(Move::Option { v, pos, option });
                }
            }
        }
    }
    moves
}

/// Applies a move; `None` if the result breaks precedence.
fn apply(problem: &Problem, chains: &[Vec<StopVisit>], mv: Move) -> Option<Vec<Vec<StopVisit>>> {
    let mut out = chains.to_vec();
    match mv {
        Move::Relocate { order, from, to } => {
            let (p, d) = (problem.pickup(order), problem.delivery(order));
            out[from].retain(|x| x.stop != p && x.stop != d);
            out[to] = best_insertion(problem, to, &out[to], order);
        }
        Move::Clear { from, to } => {
            for order in chain_orders(problem, &chains[from]) {
                out[to] = best_insertion(problem, to, &out[to], order);
            }
            out[from] = vec![chains[from][0], *chains[from].last().expect("bracketed chain")];
        }
        Move::Reverse { v, i, j } => {
            out[v][i..=j].reverse();
            if !is_precedence_valid(problem, &out[v]) {
                return None;
            }
        }
        Move::Shift { v, from, to } => {
            let x = out[v].remove(from);
            out[v].insert(to, x);
            if !is_precedence_valid(problem, &out[v]) {
                return None;
            }
        }
        Move::Swap { v, i, j } => {
            out[v].swap(i, j);
            if !is_precedence_valid(problem, &out[v]) {
                return None;
            }
        }
        Move::Option { v, pos, option } => out[v][pos].option = option,
    }
    Some(out)
}

/// `chain` with the order's pickup and delivery at the positions giving the
/// best tour score; the first such pair wins ties.
fn best_insertion(problem: &Problem, v: usize, chain: &[StopVisit], order: usize) -> Vec<StopVisit> {
    let (p, d) = (StopVisit::new(problem.pickup(order), 0), StopVisit::new(problem.delivery(order), 0));
    let mut best: Option<(crate::score::Score, Vec<StopVisit>)> = None;
    for i in 1..chain.len() {
        for j in i..chain.len() {
            let mut cand = chain.to_vec();
            cand.insert(j, d);
            cand.insert(i, p);
            let s = evaluate_tour(problem, v, &cand).0;
            if best.as_ref().is_none_or(|b| s < b.0) {
                best = Some((s, cand));
            }
        }
    }
    best.expect("chain has begin and end").1
}

fn attributes(problem: &Problem, chains: &[Vec<StopVisit>], mv: Move) -> Vec<Attr> {
    match mv {
        Move::Relocate { order, from, .. } => vec![Attr::OrderOn(order, from)],
        Move::Clear { from, .. } => chain_orders(problem, &chains[from]).into_iter().map(|o| Attr::OrderOn(o, from)).collect(),
        Move::Reverse { v, i, j } => (i..=j).map(|k| Attr::Stop(chains[v][k].stop)).collect(),
        Move::Shift { v, from, .. } => vec![Attr::Stop(chains[v][from].stop)],
        Move::Swap { v, i, j } => vec![Attr::Stop(chains[v][i].stop), Attr::Stop(chains[v][j].stop)],
        Move::Option { v, pos, .. } => vec![Attr::Stop(chains[v][pos].stop)],
    }
}

fn is_tabu(problem: &Problem, tabu: &HashMap<Attr, usize>, chains: &[Vec<StopVisit>], mv: Move, step: usize) -> bool {
    let blocked = |a: &Attr| tabu.get(a).is_some_and(|&until| step < until);
    match mv {
        Move::Relocate { order, to, .. } => blocked(&Attr::OrderOn(order, to)),
        Move::Clear { from, to } => chain_orders(problem, &chains[from]).iter().any(|&o| blocked(&Attr::OrderOn(o, to))),
        _ => attributes(problem, chains, mv).iter().any(blocked),
    }
}

/// Uniformly random assignment with nearest-neighbor chains; a start for
/// local search experiments.
pub fn random_solution(problem: &Problem, rng: &mut impl Rng) -> Solution {
    let nv = problem.n_vehicles();
    if nv == 0 {
        return problem.empty_solution();
    }
    let mut orders = vec![Vec::new(); nv];
    for o in 0..problem.n_orders() {
        orders[rng.gen_range(0..nv)].push(o);
    }
    let chains = orders
        .iter()
        .enumerate()
        .map(|(v, os)| {
            let stops: Vec<usize> = os.iter().flat_map(|&o| [problem.pickup(o), problem.delivery(o)]).collect();
            nearest_neighbor_chain(problem, v, &stops, rng)
        })
        .collect();
    Solution::from_chains(chains)
}

pub fn tabu_search(problem: &Problem, start: Solution, params: &TabuParams) -> EvaluatedSolution {
    tabu_search_observed(problem, start, params, &mut |_, _| {})
}

pub fn tabu_search_observed(
    problem: &Problem,
    start: Solution,
    params: &TabuParams,
    observer: &mut Observer<'_>,
) -> EvaluatedSolution {
    let clock = Clock::new(params.max_runtime);
    let mut reporter = Reporter::new(clock, Some(observer));
    let mut rng = rng_from(params.rng_seed);
    let mut schedules: HashMap<(usize, Vec<StopVisit>), ScheduledTour> = HashMap::new();
    let mut eval = |chains: Vec<Vec<StopVisit>>| {
        if schedules.len() > 200_000 {
            schedules.clear();
        }
        evaluate_with(problem, Solution::from_chains(chains), |v, c| {
            schedules.entry((v, c.to_vec())).or_insert_with(|| schedule_tour(problem, v, c)).clone()
        })
    };
    let mut current = eval(start.chains);
    let mut best = current.clone();
    reporter.offer(best.score);
    let mut tabu: HashMap<Attr, usize> = HashMap::new();
    let mut unimproved = 0;
    let mut step = 0;
    while unimproved < params.max_unimproved && !clock.expired() && params.max_iterations.is_none_or(|m| step < m) {
        step += 1;
        let chains = &current.solution.chains;
        let all = neighborhood(problem, chains);
        let picked: Vec<Move> = if all.len() > params.sample_size {
            let mut idx = sample(&mut rng, all.len(), params.sample_size).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| all[i]).collect()
        } else {
            all
        };
        let mut chosen: Option<(Move, EvaluatedSolution)> = None;
        for mv in picked {
            if clock.expired() {
                break;
            }
            let Some(next) = apply(problem, chains, mv) else { continue };
            let ev = eval(next);
            let admissible = !is_tabu(problem, &tabu, chains, mv, step) || ev.score < best.score;
            if admissible && chosen.as_ref().is_none_or(|c| ev.score < c.1.score) {
                chosen = Some((mv, ev));
            }
        }
        let Some((mv, next)) = chosen else { break };
        for a in attributes(problem, &current.solution.chains, mv) {
            tabu.insert(a, step + params.tabu_tenure);
        }
        current = next;
        if current.score < best.score {
            best = current.clone();
            unimproved = 0;
        } else {
            unimproved += 1;
        }
        reporter.offer(best.score);
    }
    debug!("tabu stopped after {step} steps, best {}", best.score);
    reporter.finish();
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{brute_force_vrp, BruteOptions};
    use crate::distance::TravelMatrix;
    use crate::model::*;

    fn problem() -> Problem {
        let loc = |id: &str, x: f64, y: f64| Location { id: id.into(), x, y };
        let inst = Instance {
            name: None,
            locations: vec![
                loc("A", 0.0, 0.0),
                loc("B", 20_000.0, 0.0),
                loc("a1", 500.0, 300.0),
                loc("a2", -400.0, 200.0),
                loc("b1", 20_300.0, 500.0),
            ],
            vehicles: vec![
                Vehicle::simple("vA", "A", Amount::new(10, 10.0, 100.0)),
                Vehicle::simple("vB", "B", Amount::new(10, 10.0, 100.0)),
            ],
            trailers: vec![],
            drivers: vec![],
            orders: vec![
                Order::simple("o1", "A", "a1", Amount::new(1, 1.0, 10.0)),
                Order::simple("o2", "B", "b1", Amount::new(1, 1.0, 10.0)),
                Order::simple("o3", "A", "a2", Amount::new(1, 1.0, 10.0)),
            ],
            pause_rules: vec![],
            max_runtime_s: 5,
            distance: Default::default(),
        };
        let m = TravelMatrix::build_euclidean(&inst.locations, 13.89).unwrap();
        Problem::new(inst, m).unwrap()
    }

    fn params(seed: u64) -> TabuParams {
        TabuParams {
            max_runtime: 10.0,
            max_unimproved: 50,
            rng_seed: seed,
            ..TabuParams::default()
        }
    }

    #[test]
    fn optimum_start_keeps_score() {
        let p = problem();
        let opt = brute_force_vrp(&p, BruteOptions::default()).unwrap();
        let out = tabu_search(&p, opt.solution.clone(), &params(1));
        assert_eq!(out.score, opt.score);
    }

    #[test]
    fn random_start_reaches_optimum() {
        let p = problem();
        let opt = brute_force_vrp(&p, BruteOptions::default()).unwrap();
        let start = random_solution(&p, &mut rng_from(4));
        check_solution(&p, &start).unwrap();
        let out = tabu_search(&p, start.clone(), &params(4));
        check_solution(&p, &out.solution).unwrap();
        assert_eq!(out.score, opt.score);
        assert_eq!(tabu_search(&p, start, &params(4)), out);
    }
}
