//! TSP stage: orders the visits of one vehicle.
//!
//! Chains keep `TourBegin` first and `TourEnd` last; operators work on the
//! inner visits and every output keeps each pickup ahead of its delivery.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{population_formula, select_parents, truncate_distinct, SelectionKind};
use crate::model::{Problem, StopKind, StopVisit};
use crate::score::{evaluate_tour, Score};
use crate::solver::{rng_from, TspStage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TspGaParams {
    /// `None` uses [`tsp_population_size`].
    pub population_size: Option<usize>,
    pub mutation_prob: f64,
    pub max_unimproved: usize,
    pub max_generations: usize,
}

impl Default for TspGaParams {
    fn default() -> Self {
        Self {
            population_size: None,
            mutation_prob: 0.5,
            max_unimproved: 50,
            max_generations: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TspCrossover {
    Random,
    Ordered,
    PartiallyMapped,
}

impl TspCrossover {
    pub const ALL: [TspCrossover; 3] = [TspCrossover::Random, TspCrossover::Ordered, TspCrossover::PartiallyMapped];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TspMutator {
    Reverse,
    SimpleMove,
    SimpleSwap,
    MultiOpt,
    NeighborhoodSwap,
    SavingsTsp,
    Options,
    OptionsChain,
}

impl TspMutator {
    pub const ALL: [TspMutator; 8] = [
        TspMutator::Reverse,
        TspMutator::SimpleMove,
        TspMutator::SimpleSwap,
        TspMutator::MultiOpt,
        TspMutator::NeighborhoodSwap,
        TspMutator::SavingsTsp,
        TspMutator::Options,
        TspMutator::OptionsChain,
    ];
}

/// `ceil(0.1·inner + 1 + PD pairs + 2·multi-option stops)`, at least 4.
pub fn tsp_population_size(problem: &Problem, v: usize, stops: &[usize]) -> usize {
    let pairs = stops.iter().filter(|&&s| problem.stop(s).kind == StopKind::Pickup).count();
    let multi = stops
        .iter()
        .chain([problem.tour_begin(v), problem.tour_end(v)].iter())
        .filter(|&&s| problem.stop(s).options.len() > 1)
        .count();
    population_formula(stops.len(), 1.0, pairs, multi)
}

pub(crate) fn partner(problem: &Problem, s: usize) -> Option<usize> {
    let stop = problem.stop(s);
    match stop.kind {
        StopKind::Pickup => Some(problem.delivery(stop.owner)),
        StopKind::Delivery => Some(problem.pickup(stop.owner)),
        _ => None,
    }
}

/// Every delivery on the chain follows its pickup, when both are present.
pub fn is_precedence_valid(problem: &Problem, chain: &[StopVisit]) -> bool {
    let mut pos = HashMap::with_capacity(chain.len());
    for (i, v) in chain.iter().enumerate() {
        pos.insert(v.stop, i);
    }
    chain.iter().enumerate().all(|(i, v)| {
        problem.stop(v.stop).kind != StopKind::Delivery
            || partner(problem, v.stop).and_then(|p| pos.get(&p)).is_none_or(|&pi| pi < i)
    })
}

/// Moves each delivery that precedes its pickup to right after the pickup,
/// leaving the relative order of everything else unchanged.
pub fn repair_precedence(problem: &Problem, inner: Vec<StopVisit>) -> Vec<StopVisit> {
    let present: HashMap<usize, ()> = inner.iter().map(|v| (v.stop, ())).collect();
    let mut done: HashMap<usize, ()> = HashMap::with_capacity(inner.len());
    let mut held: HashMap<usize, StopVisit> = HashMap::new();
    let mut out = Vec::with_capacity(inner.len());
    for visit in inner {
        let stop = problem.stop(visit.stop);
        match stop.kind {
            StopKind::Delivery => {
                let p = problem.pickup(stop.owner);
                if present.contains_key(&p) && !done.contains_key(&p) {
                    held.insert(p, visit);
                    continue;
                }
                out.push(visit);
            }
            _ => {
                out.push(visit);
                done.insert(visit.stop, ());
                if let Some(d) = held.remove(&visit.stop) {
                    out.push(d);
                }
            }
        }
    }
    out
}

fn split(chain: &[StopVisit]) -> (StopVisit, Vec<StopVisit>, StopVisit) {
    (chain[0], chain[1..chain.len() - 1].to_vec(), chain[chain.len() - 1])
}

pub(crate) fn join(begin: StopVisit, inner: Vec<StopVisit>, end: StopVisit) -> Vec<StopVisit> {
    let mut chain = Vec::with_capacity(inner.len() + 2);
    chain.push(begin);
    chain.extend(inner);
    chain.push(end);
    chain
}

/// Option of `stop` closest to location `from`.
pub(crate) fn nearest_option(problem: &Problem, stop: usize, from: usize) -> usize {
    let opts = &problem.stop(stop).options;
    (0..opts.len())
        .min_by_key(|&k| problem.matrix().dist(from, opts[k]))
        .unwrap_or(0)
}

/// Seed chain: a random visible first stop, then always the nearest visible
/// stop. Options are picked nearest to the previous location.
pub fn nearest_neighbor_chain(problem: &Problem, v: usize, stops: &[usize], rng: &mut impl Rng) -> Vec<StopVisit> {
    let begin = StopVisit::new(problem.tour_begin(v), 0);
    let mut left: Vec<usize> = stops.to_vec();
    let mut inner = Vec::with_capacity(stops.len());
    let mut here = problem.location(begin);
    let visible = |left: &[usize], s: usize| {
        problem.stop(s).kind != StopKind::Delivery || partner(problem, s).is_none_or(|p| !left.contains(&p))
    };
    let mut first = true;
    while !left.is_empty() {
        let cands: Vec<usize> = left.iter().copied().filter(|&s| visible(&left, s)).collect();
        let pick = if first {
            first = false;
            cands[rng.gen_range(0..cands.len())]
        } else {
            *cands
                .iter()
                .min_by_key(|&&s| {
                    let k = nearest_option(problem, s, here);
                    (problem.matrix().dist(here, problem.stop(s).options[k]), s)
                })
                .unwrap()
        };
        let option = nearest_option(problem, pick, here);
        let visit = StopVisit::new(pick, option);
        here = problem.location(visit);
        inner.push(visit);
        left.retain(|&s| s != pick);
    }
    let end_stop = problem.tour_end(v);
    let end = StopVisit::new(end_stop, nearest_option(problem, end_stop, here));
    join(begin, inner, end)
}

/// Classic two-point order crossover with cut points `i < j` on the inner
/// visits: `a[i..j]` stays in place, the rest follows `b` starting after `j`
/// and wrapping around.
pub fn ordered_crossover_at(a: &[StopVisit], b: &[StopVisit], i: usize, j: usize) -> Vec<StopVisit> {
    let n = a.len();
    let mut child: Vec<Option<StopVisit>> = vec![None; n];
    let kept: Vec<usize> = a[i..j].iter().map(|v| v.stop).collect();
    for k in i..j {
        child[k] = Some(a[k]);
    }
    let rest: Vec<StopVisit> = (0..n).map(|k| b[(j + k) % n]).filter(|v| !kept.contains(&v.stop)).collect();
    let slots: Vec<usize> = (j..n).chain(0..i).collect();
    for (slot, visit) in slots.into_iter().zip(rest) {
        child[slot] = Some(visit);
    }
    child.into_iter().map(|v| v.expect("order crossover fills every slot")).collect()
}

/// Segment `a[i..j]` kept in place; remaining stops fill the free slots left
/// to right in the order they appear in `b`.
fn mapped_crossover_at(a: &[StopVisit], b: &[StopVisit], i: usize, j: usize) -> Vec<StopVisit> {
    let kept: Vec<usize> = a[i..j].iter().map(|v| v.stop).collect();
    let mut rest = b.iter().filter(|v| !kept.contains(&v.stop)).copied();
    (0..a.len())
        .map(|k| if (i..j).contains(&k) { a[k] } else { rest.next().expect("same visit set") })
        .collect()
}

fn random_crossover(a: &[StopVisit], b: &[StopVisit], rng: &mut impl Rng) -> Vec<StopVisit> {
    let mut used: Vec<usize> = Vec::with_capacity(a.len());
    let (mut ia, mut ib) = (0, 0);
    let mut child = Vec::with_capacity(a.len());
    while child.len() < a.len() {
        let (src, idx) = if rng.gen_bool(0.5) { (a, &mut ia) } else { (b, &mut ib) };
        while used.contains(&src[*idx].stop) {
            *idx += 1;
        }
        used.push(src[*idx].stop);
        child.push(src[*idx]);
    }
    child
}

fn cut_points(n: usize, rng: &mut impl Rng) -> (usize, usize) {
    let i = rng.gen_range(0..n);
    let j = rng.gen_range(i + 1..=n);
    (i, j)
}

/// Recombines two chains over the same visit set. Begin and end are taken from `a`.
pub fn tsp_crossover(
    problem: &Problem,
    kind: TspCrossover,
    a: &[StopVisit],
    b: &[StopVisit],
    rng: &mut impl Rng,
) -> Vec<StopVisit> {
    let (begin, ia, end) = split(a);
    let (_, ib, _) = split(b);
    if ia.len() < 2 {
        return a.to_vec();
    }
    let inner = match kind {
        TspCrossover::Random => random_crossover(&ia, &ib, rng),
        TspCrossover::Ordered => {
            let (i, j) = cut_points(ia.len(), rng);
            ordered_crossover_at(&ia, &ib, i, j)
        }
        TspCrossover::PartiallyMapped => {
            let (i, j) = cut_points(ia.len(), rng);
            mapped_crossover_at(&ia, &ib, i, j)
        }
    };
    join(begin, repair_precedence(problem, inner), end)
}

/// Swaps positions `i` and `j`; applying it twice restores the chain.
pub fn swap_visits(chain: &mut [StopVisit], i: usize, j: usize) {
    chain.swap(i, j);
}

fn position_map(inner: &[StopVisit]) -> HashMap<usize, usize> {
    inner.iter().enumerate().map(|(i, v)| (v.stop, i)).collect()
}

/// Whether swapping inner positions `i` and `j` keeps precedence.
fn swap_ok(problem: &Problem, inner: &[StopVisit], pos: &HashMap<usize, usize>, i: usize, j: usize) -> bool {
    let (i, j) = (i.min(j), i.max(j));
    let a = inner[i].stop;
    let b = inner[j].stop;
    let a_late = problem.stop(a).kind == StopKind::Pickup
        && partner(problem, a).and_then(|d| pos.get(&d)).is_some_and(|&d| d <= j);
    let b_early = problem.stop(b).kind == StopKind::Delivery
        && partner(problem, b).and_then(|p| pos.get(&p)).is_some_and(|&p| p >= i);
    i != j && !a_late && !b_early
}

/// Insertion slots (in the chain with position `i` removed) that keep precedence.
fn move_range(problem: &Problem, inner: &[StopVisit], i: usize) -> (usize, usize) {
    let s = inner[i].stop;
    let reduced_len = inner.len() - 1;
    let other = partner(problem, s).and_then(|p| inner.iter().position(|v| v.stop == p));
    let adjust = |k: usize| if k > i { k - 1 } else { k };
    match (problem.stop(s).kind, other) {
        (StopKind::Pickup, Some(d)) => (0, adjust(d)),
        (StopKind::Delivery, Some(p)) => (adjust(p) + 1, reduced_len),
        _ => (0, reduced_len),
    }
}

fn simple_move(problem: &Problem, inner: &mut Vec<StopVisit>, rng: &mut impl Rng) -> bool {
    if inner.len() < 2 {
        return false;
    }
    let mut order: Vec<usize> = (0..inner.len()).collect();
    order.shuffle(rng);
    for i in order {
        let (lo, hi) = move_range(problem, inner, i);
        let slots: Vec<usize> = (lo..=hi).filter(|&k| k != i).collect();
        if let Some(&k) = slots.choose(rng) {
            let x = inner.remove(i);
            inner.insert(k, x);
            return true;
        }
    }
    false
}

fn simple_swap(problem: &Problem, inner: &mut [StopVisit], rng: &mut impl Rng) -> bool {
    let n = inner.len();
    if n < 2 {
        return false;
    }
    let pos = position_map(inner);
    for _ in 0..32 {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if swap_ok(problem, inner, &pos, i, j) {
            swap_visits(inner, i, j);
            return true;
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| swap_ok(problem, inner, &pos, i, j))
        .collect();
    match pairs.choose(rng) {
        Some(&(i, j)) => {
            swap_visits(inner, i, j);
            true
        }
        None => false,
    }
}

/// Distance-based relocation with the largest saving, if any is positive.
fn best_relocation(problem: &Problem, chain: &[StopVisit]) -> Option<Vec<StopVisit>> {
    let (begin, inner, end) = split(chain);
    let full = |inner: &[StopVisit]| {
        let mut c = Vec::with_capacity(inner.len() + 2);
        c.push(begin);
        c.extend_from_slice(inner);
        c.push(end);
        c
    };
    let mut best: Option<(i64, usize, usize)> = None;
    for i in 0..inner.len() {
        let c = full(&inner);
        // chain index of the inner visit is i + 1
        let gain = problem.dist(c[i], c[i + 1]) + problem.dist(c[i + 1], c[i + 2]) - problem.dist(c[i], c[i + 2]);
        let mut reduced = inner.clone();
        let x = reduced.remove(i);
        let r = full(&reduced);
        let (lo, hi) = move_range(problem, &inner, i);
        for k in lo..=hi {
            if k == i {
                continue;
            }
            // insert between r[k] and r[k + 1]
            let cost = problem.dist(r[k], x) + problem.dist(x, r[k + 1]) - problem.dist(r[k], r[k + 1]);
            let saving = gain - cost;
            if saving > 0 && best.is_none_or(|(b, _, _)| saving > b) {
                best = Some((saving, i, k));
            }
        }
    }
    best.map(|(_, i, k)| {
        let mut inner = inner;
        let x = inner.remove(i);
        inner.insert(k, x);
        join(begin, inner, end)
    })
}

fn multi_option_positions(problem: &Problem, chain: &[StopVisit]) -> Vec<usize> {
    (0..chain.len()).filter(|&i| problem.stop(chain[i].stop).options.len() > 1).collect()
}

/// Applies one mutator; `None` means it found nothing to change and the caller
/// should try another operator. `score` ranks candidate chains.
pub fn tsp_mutate_with(
    problem: &Problem,
    kind: TspMutator,
    chain: &[StopVisit],
    rng: &mut impl Rng,
    score: &mut dyn FnMut(&[StopVisit]) -> Score,
) -> Option<Vec<StopVisit>> {
    let (begin, mut inner, end) = split(chain);
    match kind {
        TspMutator::Reverse => {
            if inner.len() < 2 {
                return None;
            }
            for _ in 0..8 {
                let i = rng.gen_range(0..inner.len() - 1);
                let j = rng.gen_range(i + 1..inner.len());
                let mut cand = inner.clone();
                cand[i..=j].reverse();
                let cand = repair_precedence(problem, cand);
                if cand != inner {
                    return Some(join(begin, cand, end));
                }
            }
            None
        }
        TspMutator::SimpleMove => simple_move(problem, &mut inner, rng).then(|| join(begin, inner, end)),
        TspMutator::SimpleSwap => simple_swap(problem, &mut inner, rng).then(|| join(begin, inner, end)),
        TspMutator::MultiOpt => {
            let mut changed = false;
            for _ in 0..rng.gen_range(1..=3) {
                changed |= if rng.gen_bool(0.5) {
                    simple_move(problem, &mut inner, rng)
                } else {
                    simple_swap(problem, &mut inner, rng)
                };
            }
            changed.then(|| join(begin, inner, end))
        }
        TspMutator::NeighborhoodSwap => {
            if inner.len() < 2 {
                return None;
            }
            let i = rng.gen_range(0..inner.len());
            let pos = position_map(&inner);
            let mut best_score = score(chain);
            let mut best = None;
            for j in 0..inner.len() {
                if !swap_ok(problem, &inner, &pos, i, j) {
                    continue;
                }
                let mut cand = inner.clone();
                swap_visits(&mut cand, i, j);
                let cand = join(begin, cand, end);
                let s = score(&cand);
                if s < best_score {
                    best_score = s;
                    best = Some(cand);
                }
            }
            best
        }
        TspMutator::SavingsTsp => best_relocation(problem, chain),
        TspMutator::Options => {
            let slots = multi_option_positions(problem, chain);
            let &i = slots.choose(rng)?;
            let mut out = chain.to_vec();
            let n = problem.stop(out[i].stop).options.len();
            out[i].option = (out[i].option + rng.gen_range(1..n)) % n;
            Some(out)
        }
        TspMutator::OptionsChain => {
            let slots = multi_option_positions(problem, chain);
            if slots.is_empty() {
                return None;
            }
            let mut out = chain.to_vec();
            for i in slots {
                let n = problem.stop(out[i].stop).options.len();
                out[i].option = (out[i].option + 1) % n;
            }
            Some(out)
        }
    }
}

/// [`tsp_mutate_with`] ranking candidates by the vehicle's tour score.
pub fn tsp_mutate(
    problem: &Problem,
    v: usize,
    kind: TspMutator,
    chain: &[StopVisit],
    rng: &mut impl Rng,
) -> Option<Vec<StopVisit>> {
    tsp_mutate_with(problem, kind, chain, rng, &mut |c| evaluate_tour(problem, v, c).0)
}

/// Tries random mutators until one changes the chain, at most `tries` times.
fn mutate_any(
    problem: &Problem,
    chain: &[StopVisit],
    rng: &mut impl Rng,
    score: &mut dyn FnMut(&[StopVisit]) -> Score,
    tries: usize,
) -> Option<Vec<StopVisit>> {
    for _ in 0..tries {
        let kind = TspMutator::ALL[rng.gen_range(0..TspMutator::ALL.len())];
        if let Some(c) = tsp_mutate_with(problem, kind, chain, rng, score) {
            return Some(c);
        }
    }
    None
}

/// Orders `stops` (service stop ids) for vehicle `v`.
pub fn run_tsp_ga(problem: &Problem, v: usize, stops: &[usize], params: &TspGaParams, rng: &mut ChaCha8Rng) -> Vec<StopVisit> {
    run_tsp_ga_until(problem, v, stops, params, rng, None)
}

/// [`run_tsp_ga`] that also stops at `deadline`.
pub fn run_tsp_ga_until(
    problem: &Problem,
    v: usize,
    stops: &[usize],
    params: &TspGaParams,
    rng: &mut ChaCha8Rng,
    deadline: Option<Instant>,
) -> Vec<StopVisit> {
    let seed = nearest_neighbor_chain(problem, v, stops, rng);
    let has_options = seed.iter().any(|x| problem.stop(x.stop).options.len() > 1);
    if stops.len() <= 2 && !has_options {
        return seed;
    }
    let mut cache: HashMap<Vec<StopVisit>, Score> = HashMap::new();
    let mut score = |c: &[StopVisit]| -> Score {
        if let Some(s) = cache.get(c) {
            return *s;
        }
        let s = evaluate_tour(problem, v, c).0;
        cache.insert(c.to_vec(), s);
        s
    };
    let size = params.population_size.unwrap_or_else(|| tsp_population_size(problem, v, stops)).max(2);
    let mut pop: Vec<(Vec<StopVisit>, Score)> = Vec::with_capacity(2 * size);
    let s0 = score(&seed);
    pop.push((seed.clone(), s0));
    while pop.len() < size {
        let c = mutate_any(problem, &seed, rng, &mut score, 10).unwrap_or_else(|| seed.clone());
        let s = score(&c);
        pop.push((c, s));
    }
    truncate_distinct(&mut pop, size);
    let mut best = pop[0].clone();
    let mut unimproved = 0;
    let expired = || deadline.is_some_and(|d| Instant::now() >= d);
    for _ in 0..params.max_generations {
        if unimproved >= params.max_unimproved || expired() {
            break;
        }
        let scores: Vec<Score> = pop.iter().map(|p| p.1).collect();
        while pop.len() < 2 * size {
            let (i, j) = select_parents(&scores, SelectionKind::random(rng), rng);
            let kind = TspCrossover::ALL[rng.gen_range(0..TspCrossover::ALL.len())];
            let mut child = tsp_crossover(problem, kind, &pop[i].0, &pop[j].0, rng);
            if rng.gen_bool(params.mutation_prob.clamp(0.0, 1.0)) {
                if let Some(c) = mutate_any(problem, &child, rng, &mut score, 10) {
                    child = c;
                }
            }
            let s = score(&child);
            pop.push((child, s));
        }
        truncate_distinct(&mut pop, size);
        if pop[0].1 < best.1 {
            best = pop[0].clone();
            unimproved = 0;
        } else {
            unimproved += 1;
        }
    }
    best.0
}

/// The GA as a TSP stage for the VRP solvers.
#[derive(Clone, Debug, Default)]
pub struct GaTsp(pub TspGaParams);

impl TspStage for GaTsp {
    fn solve(&self, problem: &Problem, v: usize, orders: &[usize], seed: u64, deadline: Instant) -> Vec<StopVisit> {
        let stops: Vec<usize> = orders.iter().flat_map(|&o| [problem.pickup(o), problem.delivery(o)]).collect();
        run_tsp_ga_until(problem, v, &stops, &self.0, &mut rng_from(seed), Some(deadline))
    }
}
