//! VRP stage: evolves which vehicle serves which order. Chains are produced
//! by the TSP stage through a per-run cache.

use std::time::Instant;

use log::debug;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{default_population_size, select_parents, truncate, GaParams, Individual, SelectionKind};
use crate::model::{Load, Problem, StopVisit};
use crate::score::{EvaluatedSolution, Score};
use crate::solver::{cheapest_insertion, chain_length, rng_from, Assignment, Clock, Observer, Reporter, TourCache, TspStage};

pub const MAX_MUTATION_RETRIES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VrpCrossover {
    Overlap,
    ScoreBased,
    Selection,
}

impl VrpCrossover {
    pub const ALL: [VrpCrossover; 3] = [VrpCrossover::Overlap, VrpCrossover::ScoreBased, VrpCrossover::Selection];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VrpMutator {
    ClearVehicle,
    SwapVehicle,
    Outlier,
    MoveOrder,
    CloseToOtherChain,
    Savings,
}

impl VrpMutator {
    pub const ALL: [VrpMutator; 6] = [
        VrpMutator::ClearVehicle,
        VrpMutator::SwapVehicle,
        VrpMutator::Outlier,
        VrpMutator::MoveOrder,
        VrpMutator::CloseToOtherChain,
        VrpMutator::Savings,
    ];
}

fn insert_sorted(list: &mut Vec<usize>, o: usize) {
    if let Err(at) = list.binary_search(&o) {
        list.insert(at, o);
    }
}

fn remove_order(list: &mut Vec<usize>, o: usize) {
    if let Ok(at) = list.binary_search(&o) {
        list.remove(at);
    }
}

fn vehicle_loads(problem: &Problem, asg: &Assignment) -> Vec<Load> {
    asg.iter()
        .map(|orders| orders.iter().fold(Load::default(), |acc, &o| acc + problem.demand(o)))
        .collect()
}

fn vehicle_of(asg: &Assignment, o: usize) -> Option<usize> {
    asg.iter().position(|orders| orders.binary_search(&o).is_ok())
}

/// Stops currently on vehicle `v`: its begin stop plus pickups and deliveries.
fn vehicle_stops(problem: &Problem, asg: &Assignment, v: usize) -> Vec<usize> {
    let mut stops = vec![problem.tour_begin(v)];
    for &o in &asg[v] {
        stops.push(problem.pickup(o));
        stops.push(problem.delivery(o));
    }
    stops
}

/// Nearest-stop distance of order `o` to a stop set: closest stop to the
/// pickup plus closest stop to the delivery.
fn order_distance(problem: &Problem, o: usize, stops: &[usize]) -> i64 {
    let (p, d) = (problem.pickup(o), problem.delivery(o));
    let near = |x: usize| stops.iter().filter(|&&s| s != p && s != d).map(|&s| problem.stop_dist(x, s)).min();
    near(p).unwrap_or(0) + near(d).unwrap_or(0)
}

/// Mean distance of the order's stops to the other stops of a stop set.
fn mean_distance(problem: &Problem, o: usize, stops: &[usize]) -> f64 {
    let (p, d) = (problem.pickup(o), problem.delivery(o));
    let others: Vec<usize> = stops.iter().copied().filter(|&s| s != p && s != d).collect();
    if others.is_empty() {
        return 0.0;
    }
    let sum: i64 = others.iter().map(|&s| problem.stop_dist(p, s) + problem.stop_dist(d, s)).sum();
    sum as f64 / (2 * others.len()) as f64
}

/// Vehicle preference tiers for order `o`: compatible with room, compatible,
/// anything. Returns the first non-empty tier.
fn candidate_vehicles(problem: &Problem, asg: &Assignment, loads: &[Load], o: usize, exclude: Option<usize>) -> Vec<usize> {
    let all: Vec<usize> = (0..asg.len()).filter(|&v| Some(v) != exclude).collect();
    let all = if all.is_empty() { (0..asg.len()).collect() } else { all };
    let compatible: Vec<usize> = all.iter().copied().filter(|&v| problem.compatible(o, v)).collect();
    let roomy: Vec<usize> = compatible
        .iter()
        .copied()
        .filter(|&v| (loads[v] + problem.demand(o)).fits_in(&problem.capacity(v)))
        .collect();
    [roomy, compatible, all].into_iter().find(|t| !t.is_empty()).unwrap_or_default()
}

/// Places `orders` one by one on the nearest suitable vehicle (other than
/// `exclude` when possible). An order follows an already placed co-location
/// partner.
pub fn place_by_distance(problem: &Problem, asg: &mut Assignment, orders: &[usize], exclude: Option<usize>) {
    let mut loads = vehicle_loads(problem, asg);
    for &o in orders {
        let partner = problem
            .colocated_pairs()
            .iter()
            .filter_map(|&(a, b)| if a == o { Some(b) } else if b == o { Some(a) } else { None })
            .find_map(|q| vehicle_of(asg, q));
        let v = match partner {
            Some(v) => v,
            None => {
                let cands = candidate_vehicles(problem, asg, &loads, o, exclude);
                *cands
                    .iter()
                    .min_by_key(|&&v| (order_distance(problem, o, &vehicle_stops(problem, asg, v)), v))
                    .expect("at least one vehicle")
            }
        };
        loads[v] = loads[v] + problem.demand(o);
        insert_sorted(&mut asg[v], o);
    }
}

/// Deterministic start assignment: restricted orders first, then repeatedly
/// the (order, vehicle) pair of minimum nearest-stop distance among vehicles
/// with room, then a pass moving orders to vehicles where their mean
/// stop-to-stop distance is lower.
pub fn initial_assignment(problem: &Problem) -> Assignment {
    let nv = problem.n_vehicles();
    let no = problem.n_orders();
    let mut asg: Assignment = vec![Vec::new(); nv];
    if nv == 0 {
        return asg;
    }
    let constrained: Vec<usize> = (0..no).filter(|&o| problem.is_constrained(o)).collect();
    place_by_distance(problem, &mut asg, &constrained, None);

    let mut loads = vehicle_loads(problem, &asg);
    let mut open: Vec<bool> = (0..no).map(|o| !problem.is_constrained(o)).collect();
    // nearest distance of each order's pickup / delivery to each vehicle's stops
    let mut near_p = vec![vec![i64::MAX; nv]; no];
    let mut near_d = vec![vec![i64::MAX; nv]; no];
    for (v, _) in asg.iter().enumerate() {
        let stops = vehicle_stops(problem, &asg, v);
        for o in (0..no).filter(|&o| open[o]) {
            for &s in &stops {
                near_p[o][v] = near_p[o][v].min(problem.stop_dist(problem.pickup(o), s));
                near_d[o][v] = near_d[o][v].min(problem.stop_dist(problem.delivery(o), s));
            }
        }
    }
    loop {
        let mut best: Option<(bool, i64, usize, usize)> = None;
        for o in (0..no).filter(|&o| open[o]) {
            for v in 0..nv {
                let room = (loads[v] + problem.demand(o)).fits_in(&problem.capacity(v)) && problem.compatible(o, v);
                let key = (!room, near_p[o][v] + near_d[o][v], o, v);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        let Some((_, _, o, v)) = best else { break };
        open[o] = false;
        insert_sorted(&mut asg[v], o);
        loads[v] = loads[v] + problem.demand(o);
        for q in (0..no).filter(|&q| open[q]) {
            for s in [problem.pickup(o), problem.delivery(o)] {
                near_p[q][v] = near_p[q][v].min(problem.stop_dist(problem.pickup(q), s));
                near_d[q][v] = near_d[q][v].min(problem.stop_dist(problem.delivery(q), s));
            }
        }
    }
    improve_mean_distance(problem, &mut asg);
    asg
}

fn improve_mean_distance(problem: &Problem, asg: &mut Assignment) {
    for _ in 0..5 {
        let mut moved = false;
        for o in 0..problem.n_orders() {
            if problem.is_constrained(o) {
                continue;
            }
            let Some(v) = vehicle_of(asg, o) else { continue };
            let loads = vehicle_loads(problem, asg);
            let here = mean_distance(problem, o, &vehicle_stops(problem, asg, v));
            let mut best: Option<(f64, usize)> = None;
            for w in (0..asg.len()).filter(|&w| w != v) {
                if !problem.compatible(o, w) || !(loads[w] + problem.demand(o)).fits_in(&problem.capacity(w)) {
                    continue;
                }
                let there = mean_distance(problem, o, &vehicle_stops(problem, asg, w));
                if there < here && best.is_none_or(|(b, _)| there < b) {
                    best = Some((there, w));
                }
            }
            if let Some((_, w)) = best {
                remove_order(&mut asg[v], o);
                insert_sorted(&mut asg[w], o);
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Start individual: [`initial_assignment`] ordered by the TSP stage.
pub fn initial_individual(problem: &Problem, tsp: &dyn TspStage, seed: u64) -> Individual {
    let mut cache = TourCache::new(problem, tsp, seed);
    let ev = cache.evaluate(&initial_assignment(problem), Clock::new(f64::MAX).deadline());
    Individual {
        solution: ev.solution,
        score: ev.score,
    }
}

/// Recombines two assignments; `a_better` says whether `a` scores at least as well as `b`.
pub fn vrp_crossover(
    problem: &Problem,
    kind: VrpCrossover,
    a: &Assignment,
    b: &Assignment,
    a_better: bool,
    rng: &mut impl Rng,
) -> Assignment {
    let nv = a.len();
    match kind {
        VrpCrossover::ScoreBased => {
            if a_better {
                a.clone()
            } else {
                b.clone()
            }
        }
        VrpCrossover::Overlap => {
            let mut child: Assignment = vec![Vec::new(); nv];
            let mut rest = Vec::new();
            for o in 0..problem.n_orders() {
                match (vehicle_of(a, o), vehicle_of(b, o)) {
                    (Some(va), Some(vb)) if va == vb => insert_sorted(&mut child[va], o),
                    _ => rest.push(o),
                }
            }
            place_by_distance(problem, &mut child, &rest, None);
            child
        }
        VrpCrossover::Selection => {
            let mut child: Assignment = vec![Vec::new(); nv];
            let mut taken = vec![false; problem.n_orders()];
            for v in 0..nv {
                let parent = if rng.gen_bool(0.5) { a } else { b };
                for &o in &parent[v] {
                    if !taken[o] {
                        taken[o] = true;
                        child[v].push(o);
                    }
                }
            }
            let rest: Vec<usize> = (0..problem.n_orders()).filter(|&o| !taken[o]).collect();
            place_by_distance(problem, &mut child, &rest, None);
            child
        }
    }
}

/// Order move with the largest positive distance saving, as `(order, from, to)`.
fn best_saving_move(problem: &Problem, chains: &[Vec<StopVisit>]) -> Option<(usize, usize, usize)> {
    let mut best: Option<(i64, usize, usize, usize)> = None;
    for (v, chain) in chains.iter().enumerate() {
        let base = chain_length(problem, chain);
        for o in crate::model::chain_orders(problem, chain) {
            let (p, d) = (problem.pickup(o), problem.delivery(o));
            let without: Vec<StopVisit> = chain.iter().copied().filter(|x| x.stop != p && x.stop != d).collect();
            let gain = base - chain_length(problem, &without);
            for (w, other) in chains.iter().enumerate() {
                if w == v {
                    continue;
                }
                let (cost, _, _) = cheapest_insertion(problem, other, o);
                let saving = gain - cost;
                if saving > 0 && best.is_none_or(|b| saving > b.0) {
                    best = Some((saving, o, v, w));
                }
            }
        }
    }
    best.map(|(_, o, v, w)| (o, v, w))
}

fn move_order(asg: &mut Assignment, o: usize, from: usize, to: usize) {
    remove_order(&mut asg[from], o);
    insert_sorted(&mut asg[to], o);
}

/// Applies one mutator. `None` when the operator cannot act on this
/// assignment or leaves it unchanged. `chains` supplies the current chains
/// (only the savings mutator needs them).
pub fn vrp_mutate(
    problem: &Problem,
    kind: VrpMutator,
    asg: &Assignment,
    chains: &mut dyn FnMut(&Assignment) -> Vec<Vec<StopVisit>>,
    rng: &mut impl Rng,
) -> Option<Assignment> {
    let nv = asg.len();
    if nv < 2 || asg.iter().all(|o| o.is_empty()) {
        return None;
    }
    let used: Vec<usize> = (0..nv).filter(|&v| !asg[v].is_empty()).collect();
    let mut out = asg.clone();
    match kind {
        VrpMutator::ClearVehicle => {
            let &v = used.choose(rng)?;
            let orders = std::mem::take(&mut out[v]);
            place_by_distance(problem, &mut out, &orders, Some(v));
        }
        VrpMutator::SwapVehicle => {
            let &v = used.choose(rng)?;
            let others: Vec<usize> = (0..nv).filter(|&w| w != v && out[w] != out[v]).collect();
            let &w = others.choose(rng)?;
            out.swap(v, w);
        }
        VrpMutator::Outlier => {
            let mut worst: Option<(f64, usize, usize)> = None;
            for &v in &used {
                let stops = vehicle_stops(problem, asg, v);
                for &o in &asg[v] {
                    let m = mean_distance(problem, o, &stops);
                    if worst.is_none_or(|(b, _, _)| m > b) {
                        worst = Some((m, o, v));
                    }
                }
            }
            let (_, o, v) = worst?;
            remove_order(&mut out[v], o);
            place_by_distance(problem, &mut out, &[o], Some(v));
        }
        VrpMutator::MoveOrder => {
            for _ in 0..rng.gen_range(1..=4) {
                let used: Vec<usize> = (0..nv).filter(|&v| !out[v].is_empty()).collect();
                let &v = used.choose(rng)?;
                let k = rng.gen_range(1..=out[v].len().min(3));
                let picked: Vec<usize> = out[v].choose_multiple(rng, k).copied().collect();
                let w = (v + rng.gen_range(1..nv)) % nv;
                for o in picked {
                    move_order(&mut out, o, v, w);
                }
            }
        }
        VrpMutator::CloseToOtherChain => {
            let &v = used.choose(rng)?;
            let &o = asg[v].choose(rng)?;
            let w = (0..nv)
                .filter(|&w| w != v)
                .min_by_key(|&w| (order_distance(problem, o, &vehicle_stops(problem, asg, w)), w))?;
            move_order(&mut out, o, v, w);
        }
        VrpMutator::Savings => {
            let (o, v, w) = best_saving_move(problem, &chains(asg))?;
            move_order(&mut out, o, v, w);
        }
    }
    (out != *asg).then_some(out)
}

/// Random mutators until one changes the assignment; `None` after
/// [`MAX_MUTATION_RETRIES`] failures.
fn mutate_any(
    problem: &Problem,
    asg: &Assignment,
    chains: &mut dyn FnMut(&Assignment) -> Vec<Vec<StopVisit>>,
    rng: &mut impl Rng,
) -> Option<Assignment> {
    for _ in 0..MAX_MUTATION_RETRIES {
        let kind = VrpMutator::ALL[rng.gen_range(0..VrpMutator::ALL.len())];
        if let Some(out) = vrp_mutate(problem, kind, asg, chains, rng) {
            return Some(out);
        }
    }
    debug!("no mutator changed the assignment after {MAX_MUTATION_RETRIES} tries");
    None
}

/// Runs the VRP-stage GA.
pub fn run_vrp_ga(problem: &Problem, params: &GaParams, tsp: &dyn TspStage) -> EvaluatedSolution {
    run_vrp_ga_observed(problem, params, tsp, &mut |_, _| {})
}

/// Caps on the per-run caches before they are reset.
const CACHE_LIMIT: usize = 200_000;

/// [`run_vrp_ga`] reporting `(elapsed, best score)` to `observer`.
pub fn run_vrp_ga_observed(
    problem: &Problem,
    params: &GaParams,
    tsp: &dyn TspStage,
    observer: &mut Observer<'_>,
) -> EvaluatedSolution {
    let clock = Clock::new(params.max_runtime);
    let deadline = clock.deadline();
    let mut reporter = Reporter::new(clock, Some(observer));
    let mut rng = rng_from(params.rng_seed);
    let mut cache = TourCache::new(problem, tsp, params.rng_seed);
    let size = params.population_size.unwrap_or_else(|| default_population_size(problem)).max(2);

    let start = initial_assignment(problem);
    let first = cache.evaluate(&start, deadline);
    reporter.offer(first.score);
    let mut best = first.clone();
    let mut pop: Vec<((Assignment, EvaluatedSolution), Score)> = vec![((start.clone(), first.clone()), first.score)];
    while pop.len() < size {
        let child = if clock.expired() {
            None
        } else {
            mutate_any(problem, &start, &mut |a| chains_of(&mut cache, a, deadline), &mut rng)
        };
        let member = match child {
            Some(a) => {
                let ev = cache.evaluate(&a, deadline);
                (a, ev)
            }
            None => (start.clone(), first.clone()),
        };
        if member.1.score < best.score {
            best = member.1.clone();
        }
        reporter.offer(member.1.score);
        let s = member.1.score;
        pop.push((member, s));
    }
    truncate(&mut pop, size);

    let mut unimproved = 0;
    let mut generation = 0;
    while unimproved < params.max_unimproved
        && !clock.expired()
        && params.max_generations.is_none_or(|g| generation < g)
    {
        generation += 1;
        let scores: Vec<Score> = pop.iter().map(|p| p.1).collect();
        let before = best.score;
        while pop.len() < 2 * size && !clock.expired() {
            let (i, j) = select_parents(&scores, SelectionKind::random(&mut rng), &mut rng);
            let kind = VrpCrossover::ALL[rng.gen_range(0..VrpCrossover::ALL.len())];
            let (a, b) = (&pop[i].0 .0, &pop[j].0 .0);
            let mut child = vrp_crossover(problem, kind, a, b, scores[i] <= scores[j], &mut rng);
            if rng.gen_bool(params.mutation_prob.clamp(0.0, 1.0)) {
                if let Some(m) = mutate_any(problem, &child, &mut |a| chains_of(&mut cache, a, deadline), &mut rng) {
                    child = m;
                }
            }
            let ev = cache.evaluate(&child, deadline);
            if ev.score < best.score {
                best = ev.clone();
            }
            reporter.offer(ev.score);
            let s = ev.score;
            pop.push(((child, ev), s));
        }
        truncate(&mut pop, size);
        if best.score < before {
            unimproved = 0;
        } else {
            unimproved += 1;
        }
        if cache.len() > CACHE_LIMIT {
            cache = TourCache::new(problem, tsp, params.rng_seed);
        }
    }
    debug!("ga stopped after {generation} generations, best {}", best.score);
    reporter.finish();
    best
}

fn chains_of<T: TspStage + ?Sized>(cache: &mut TourCache<'_, T>, asg: &Assignment, deadline: Instant) -> Vec<Vec<StopVisit>> {
    asg.iter().enumerate().map(|(v, orders)| cache.chain(v, orders, deadline)).collect()
}
