//! Plumbing shared by the metaheuristics: run clock, progress reporting,
//! deterministic seed derivation and the memoized per-vehicle TSP stage.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{Problem, Solution, StopVisit};
use crate::score::{evaluate_with, EvaluatedSolution, Score};
use crate::timeline::{schedule_tour, ScheduledTour};

/// Observer invoked with `(elapsed seconds, best score so far)`.
pub type Observer<'a> = dyn FnMut(f64, &Score) + 'a;

/// Maximum silence between two progress emissions.
pub const PROGRESS_INTERVAL: Duration = Duration::from_millis(500);

/// Wall-clock budget of a run.
#[derive(Clone, Copy, Debug)]
pub struct Clock {
    start: Instant,
    deadline: Instant,
}

impl Clock {
    pub fn new(max_runtime_s: f64) -> Self {
        let start = Instant::now();
        let budget = Duration::from_secs_f64(max_runtime_s.clamp(0.0, 1e7));
        Self {
            start,
            deadline: start + budget,
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub fn expired(&self) -> bool {
        Instant::now() >= self.deadline
    }

    pub fn deadline(&self) -> Instant {
        self.deadline
    }
}

/// Tracks the best-ever score of a run and feeds the observer.
///
/// Emits on every strict improvement and otherwise at most
/// [`PROGRESS_INTERVAL`] apart, so the emitted scores never increase.
pub struct Reporter<'a, 'b> {
    clock: Clock,
    best: Option<Score>,
    last_emit: Instant,
    observer: Option<&'a mut Observer<'b>>,
}

impl<'a, 'b> Reporter<'a, 'b> {
    pub fn new(clock: Clock, observer: Option<&'a mut Observer<'b>>) -> Self {
        Self {
            clock,
            best: None,
            last_emit: Instant::now(),
            observer,
        }
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn best(&self) -> Option<Score> {
        self.best
    }

    /// Offers a candidate best; returns whether it strictly improved.
    pub fn offer(&mut self, score: Score) -> bool {
        if self.best.is_some_and(|b| score >= b) {
            self.tick();
            return false;
        }
        self.best = Some(score);
        self.emit();
        true
    }

    /// Re-emits the current best if the observer has been idle too long.
    pub fn tick(&mut self) {
        if self.best.is_some() && self.last_emit.elapsed() >= PROGRESS_INTERVAL {
            self.emit();
        }
    }

    fn emit(&mut self) {
        self.last_emit = Instant::now();
        if let (Some(obs), Some(best)) = (self.observer.as_deref_mut(), self.best) {
            obs(self.clock.elapsed(), &best);
        }
    }

    pub fn finish(&mut self) {
        if self.best.is_some() {
            self.emit();
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed`; stable across platforms and runs.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Orders a vehicle's stop set into a chain.
pub trait TspStage: Sync {
    /// Returns a chain for vehicle `v` visiting exactly the pickups and
    /// deliveries of `orders` (sorted ascending). Must not run past `deadline`
    /// by more than one evaluation.
    fn solve(&self, problem: &Problem, v: usize, orders: &[usize], seed: u64, deadline: Instant) -> Vec<StopVisit>;
}

/// Order sets per vehicle; the genome of both VRP stages.
pub type Assignment = Vec<Vec<usize>>;

/// Per-run cache of TSP results and schedules.
///
/// TSP seeds are derived from the run seed and the (vehicle, order set) key,
/// so a cached chain equals what a fresh solve would return.
pub struct TourCache<'p, T: TspStage + ?Sized> {
    problem: &'p Problem,
    tsp: &'p T,
    seed: u64,
    chains: HashMap<(usize, Vec<usize>), Vec<StopVisit>>,
    schedules: HashMap<(usize, Vec<StopVisit>), ScheduledTour>,
}

impl<'p, T: TspStage + ?Sized> TourCache<'p, T> {
    pub fn new(problem: &'p Problem, tsp: &'p T, seed: u64) -> Self {
        Self {
            problem,
            tsp,
            seed,
            chains: HashMap::new(),
            schedules: HashMap::new(),
        }
    }

    pub fn chain(&mut self, v: usize, orders: &[usize], deadline: Instant) -> Vec<StopVisit> {
        let key = (v, orders.to_vec());
        if let Some(c) = self.chains.get(&key) {
            return c.clone();
        }
        let mut parts = vec![v as u64];
        parts.extend(orders.iter().map(|&o| o as u64));
        let chain = if orders.is_empty() {
            self.problem.empty_chain(v)
        } else {
            self.tsp.solve(self.problem, v, orders, derive_seed(self.seed, &parts), deadline)
        };
        self.chains.insert(key, chain.clone());
        chain
    }

    /// Solves every tour of `assignment` anew with seeds that also depend on
    /// `round`, bypassing the chain memo; schedules are still shared.
    pub fn evaluate_round(&mut self, assignment: &Assignment, round: u64, deadline: Instant) -> EvaluatedSolution {
        let chains: Vec<Vec<StopVisit>> = assignment
            .iter()
            .enumerate()
            .map(|(v, orders)| {
                if orders.is_empty() {
                    return self.problem.empty_chain(v);
                }
                let mut parts = vec![round, v as u64];
                parts.extend(orders.iter().map(|&o| o as u64));
                self.tsp.solve(self.problem, v, orders, derive_seed(self.seed, &parts), deadline)
            })
            .collect();
        self.evaluate_chains(chains)
    }

    /// Builds and scores the solution of an assignment.
    pub fn evaluate(&mut self, assignment: &Assignment, deadline: Instant) -> EvaluatedSolution {
        let chains: Vec<Vec<StopVisit>> = assignment
            .iter()
            .enumerate()
            .map(|(v, orders)| self.chain(v, orders, deadline))
            .collect();
        self.evaluate_chains(chains)
    }

    pub fn evaluate_chains(&mut self, chains: Vec<Vec<StopVisit>>) -> EvaluatedSolution {
        let problem = self.problem;
        let schedules = &mut self.schedules;
        evaluate_with(problem, Solution::from_chains(chains), |v, chain| {
            schedules
                .entry((v, chain.to_vec()))
                .or_insert_with(|| schedule_tour(problem, v, chain))
                .clone()
        })
    }

    /// Memoized chains plus schedules.
    pub fn len(&self) -> usize {
        self.chains.len() + self.schedules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty() && self.schedules.is_empty()
    }
}

/// Order sets of a solution's chains, each sorted.
pub fn assignment_of(problem: &Problem, solution: &Solution) -> Assignment {
    solution
        .chains
        .iter()
        .map(|c| {
            let mut orders = crate::model::chain_orders(problem, c);
            orders.sort_unstable();
            orders
        })
        .collect()
}

/// Driven meters along a chain.
pub fn chain_length(problem: &Problem, chain: &[StopVisit]) -> i64 {
    chain.windows(2).map(|w| problem.dist(w[0], w[1])).sum()
}

/// Cheapest pickup-then-delivery insertion of order `o` into `chain`, as
/// `(added meters, pickup slot, delivery slot)`; slots index the chain before
/// insertion, the delivery slot counted after the pickup went in at or before it.
pub fn cheapest_insertion(problem: &Problem, chain: &[StopVisit], o: usize) -> (i64, usize, usize) {
    let p = StopVisit::new(problem.pickup(o), 0);
    let d = StopVisit::new(problem.delivery(o), 0);
    let mut best = (i64::MAX, 1, 1);
    // p goes before chain[i], d before chain[j] of the chain that already holds p
    for i in 1..chain.len() {
        let add_p = problem.dist(chain[i - 1], p) + problem.dist(p, chain[i]) - problem.dist(chain[i - 1], chain[i]);
        for j in i..chain.len() {
            let prev = if j == i { p } else { chain[j - 1] };
            let add_d = problem.dist(prev, d) + problem.dist(d, chain[j]) - problem.dist(prev, chain[j]);
            if add_p + add_d < best.0 {
                best = (add_p + add_d, i, j);
            }
        }
    }
    best
}
