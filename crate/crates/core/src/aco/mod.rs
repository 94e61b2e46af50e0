//! Two-stage ant colony optimization.
//!
//! The VRP stage keeps two pheromone matrices, vehicle-to-stop and
//! stop-to-stop, and builds order-to-vehicle assignments; the TSP stage keeps
//! one stop-to-stop matrix per vehicle solve. Deposits scale with how close a
//! score is to the best seen on each level.

mod tsp;

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Load, Problem, StopVisit};
use crate::score::{EvaluatedSolution, Score, NOT_EVALUATED};
use crate::solver::{rng_from, Assignment, Clock, Observer, Reporter, TourCache, TspStage};

pub use tsp::{run_tsp_aco, run_tsp_aco_until, walk_is_visible, AcoTsp, AcoTspParams};

/// Lower bound of every pheromone entry.
pub const PHEROMONE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcoParams {
    /// Decay applied when evaporation triggers.
    pub evaporation: f64,
    /// Chance per iteration that evaporation triggers.
    pub evaporation_prob: f64,
    pub best_set_size: usize,
    pub max_unimproved: usize,
    /// Seconds.
    pub max_runtime: f64,
    /// Share of constructions that choose the next stop by roulette.
    pub novelty_fraction: f64,
    pub rng_seed: u64,
    pub max_iterations: Option<usize>,
    pub tsp: AcoTspParams,
}

impl Default for AcoParams {
    fn default() -> Self {
        Self {
            evaporation: 0.05,
            evaporation_prob: 0.05,
            best_set_size: 10,
            max_unimproved: 500,
            max_runtime: 300.0,
            novelty_fraction: 0.1,
            rng_seed: 0,
            max_iterations: None,
            tsp: AcoTspParams::default(),
        }
    }
}

/// `|(ws - s)^3 / (ws - bs)^3|`; 1 when the level has not spread yet.
pub fn score_factor(ws: i64, bs: i64, s: i64) -> f64 {
    if ws == bs {
        return 1.0;
    }
    ((ws - s) as f64 / (ws - bs) as f64).powi(3).abs()
}

/// `Σ f_i · p_i / i` over levels `i = 1..=6`.
pub fn deposit_amount(factors: &[f64; 6], bases: &[f64; 6]) -> f64 {
    (0..6).map(|i| factors[i] * bases[i] / (i + 1) as f64).sum()
}

/// Per-level extremes over every score seen, skipping unevaluated levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelRange {
    pub worst: Score,
    pub best: Score,
}

impl Default for LevelRange {
    fn default() -> Self {
        Self {
            worst: Score::WORST,
            best: Score::WORST,
        }
    }
}

impl LevelRange {
    pub fn observe(&mut self, s: &Score) {
        let mut w = self.worst.levels();
        let mut b = self.best.levels();
        for (i, v) in s.levels().into_iter().enumerate() {
            if v == NOT_EVALUATED {
                continue;
            }
            w[i] = if w[i] == NOT_EVALUATED { v } else { w[i].max(v) };
            b[i] = b[i].min(v);
        }
        self.worst = Score::new(w);
        self.best = Score::new(b);
    }

    /// Deposit for a score: base 1 on levels better than the worst seen,
    /// 0.25 otherwise. Levels without data or without spread contribute nothing.
    pub fn amount(&self, s: &Score) -> f64 {
        let (w, b) = (self.worst.levels(), self.best.levels());
        let mut factors = [0.0; 6];
        let mut bases = [0.0; 6];
        for (i, v) in s.levels().into_iter().enumerate() {
            if v == NOT_EVALUATED || w[i] == NOT_EVALUATED {
                continue;
            }
            if w[i] == b[i] {
                // a level every score ties on rewards all walks alike
                continue;
            }
            factors[i] = score_factor(w[i], b[i], v);
            bases[i] = if v < w[i] { 1.0 } else { 0.25 };
        }
        deposit_amount(&factors, &bases)
    }
}

#[derive(Clone, Debug)]
pub struct PheromoneState {
    n_stops: usize,
    /// Row-major `vehicle × stop`.
    pub vehicle_stop: Vec<f64>,
    /// Row-major `stop × stop`.
    pub stop_stop: Vec<f64>,
    /// Sorted best-first, at most `best_set_size` entries, no duplicates.
    pub best_set: Vec<EvaluatedSolution>,
    pub best_set_size: usize,
    pub levels: LevelRange,
}

impl PheromoneState {
    pub fn vs(&self, v: usize, s: usize) -> f64 {
        self.vehicle_stop[v * self.n_stops + s]
    }

    pub fn ss(&self, a: usize, b: usize) -> f64 {
        self.stop_stop[a * self.n_stops + b]
    }

    pub fn worst_ever(&self) -> Score {
        self.levels.worst
    }

    pub fn best_ever(&self) -> Score {
        self.levels.best
    }

    /// Inserts `ev` if the set has room or `ev` beats its worst member.
    /// Returns whether it was inserted.
    pub fn try_add(&mut self, ev: &EvaluatedSolution) -> bool {
        if self.best_set.iter().any(|m| m.solution.chains == ev.solution.chains) {
            return false;
        }
        let full = self.best_set.len() >= self.best_set_size;
        if full && self.best_set.last().is_some_and(|w| ev.score >= w.score) {
            return false;
        }
        let at = self.best_set.partition_point(|m| m.score <= ev.score);
        self.best_set.insert(at, ev.clone());
        self.best_set.truncate(self.best_set_size);
        true
    }

    fn floor(&mut self) {
        for x in self.vehicle_stop.iter_mut().chain(self.stop_stop.iter_mut()) {
            *x = x.max(PHEROMONE_FLOOR);
        }
    }
}

/// Stop-to-stop entries start at `1 / (1 + km)`; vehicle-to-stop at 1.
pub fn init_pheromones(problem: &Problem, best_set_size: usize) -> PheromoneState {
    let ns = problem.stops().len();
    let nv = problem.n_vehicles();
    let mut stop_stop = vec![0.0; ns * ns];
    for a in 0..ns {
        for b in 0..ns {
            stop_stop[a * ns + b] = 1.0 / (1.0 + problem.stop_dist(a, b) as f64 / 1000.0);
        }
    }
    let mut state = PheromoneState {
        n_stops: ns,
        vehicle_stop: vec![1.0; nv * ns],
        stop_stop,
        best_set: Vec::new(),
        best_set_size: best_set_size.max(1),
        levels: LevelRange::default(),
    };
    state.floor();
    state
}

/// Adds the solution's deposit to every vehicle-stop pair and stop transition it uses.
pub fn deposit(state: &mut PheromoneState, solution: &EvaluatedSolution) {
    let amount = state.levels.amount(&solution.score);
    if amount == 0.0 {
        return;
    }
    let ns = state.n_stops;
    for (v, chain) in solution.solution.chains.iter().enumerate() {
        for visit in chain {
            state.vehicle_stop[v * ns + visit.stop] += amount;
        }
        for w in chain.windows(2) {
            state.stop_stop[w[0].stop * ns + w[1].stop] += amount;
        }
    }
}

/// With probability `prob`, scales both matrices by `1 - factor`.
pub fn evaporate(state: &mut PheromoneState, rng: &mut impl Rng, prob: f64, factor: f64) -> bool {
    if !rng.gen_bool(prob.clamp(0.0, 1.0)) {
        return false;
    }
    for x in state.vehicle_stop.iter_mut().chain(state.stop_stop.iter_mut()) {
        *x *= 1.0 - factor;
    }
    state.floor();
    true
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn roulette(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return rng.gen_range(0..weights.len());
    }
    let mut r = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if r < w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

/// One ant's order-to-vehicle assignment.
///
/// The ant repeatedly moves to an unassigned stop (highest stop-to-stop
/// pheromone from where it stands, or by roulette when `probabilistic`), then
/// draws a vehicle by roulette over vehicle-stop pheromone plus the stop-stop
/// pheromone to the stops already on that vehicle. Only compatible vehicles
/// with room qualify; if none does, the least loaded compatible (else any)
/// vehicle takes the order. Pickup and delivery go together. After each
/// placement the ant scales the vehicle's row by its remaining free share.
pub fn construct_assignment(problem: &Problem, state: &PheromoneState, rng: &mut impl Rng, probabilistic: bool) -> Assignment {
    let nv = problem.n_vehicles();
    let ns = state.n_stops;
    let no = problem.n_orders();
    let mut asg: Assignment = vec![Vec::new(); nv];
    if nv == 0 {
        return asg;
    }
    let mut row_scale = vec![1.0; nv];
    let mut loads = vec![Load::default(); nv];
    let mut owner: Vec<Option<usize>> = vec![None; no];
    let mut on_vehicle: Vec<Vec<usize>> = vec![Vec::new(); nv];
    let mut here = problem.tour_begin(0);
    let mut open: Vec<usize> = (0..no).flat_map(|o| [problem.pickup(o), problem.delivery(o)]).collect();
    while !open.is_empty() {
        let weights: Vec<f64> = open.iter().map(|&s| state.ss(here, s)).collect();
        let k = if probabilistic {
            roulette(&weights, rng)
        } else {
            // first maximum keeps ties deterministic
            (0..open.len()).fold(0, |b, i| if weights[i] > weights[b] { i } else { b })
        };
        let s = open[k];
        let o = problem.stop(s).owner;
        let partner = problem
            .colocated_pairs()
            .iter()
            .filter_map(|&(a, b)| if a == o { Some(b) } else if b == o { Some(a) } else { None })
            .find_map(|q| owner[q]);
        let v = match partner {
            Some(v) => v,
            None => {
                let compatible: Vec<usize> = (0..nv).filter(|&v| problem.compatible(o, v)).collect();
                let roomy: Vec<usize> = compatible
                    .iter()
                    .copied()
                    .filter(|&v| (loads[v] + problem.demand(o)).fits_in(&problem.capacity(v)))
                    .collect();
                if roomy.is_empty() {
                    let pool = if compatible.is_empty() { (0..nv).collect() } else { compatible };
                    let free = |v: usize| loads[v].free_ratio(&problem.capacity(v));
                    pool.into_iter()
                        .fold(None, |b: Option<usize>, v| match b {
                            Some(b) if free(b) >= free(v) => Some(b),
                            _ => Some(v),
                        })
                        .expect("non-empty pool")
                } else {
                    let w: Vec<f64> = roomy
                        .iter()
                        .map(|&v| {
                            state.vs(v, s) * row_scale[v] + on_vehicle[v].iter().map(|&t| state.ss(s, t)).sum::<f64>()
                        })
                        .collect();
                    roomy[roulette(&w, rng)]
                }
            }
        };
        owner[o] = Some(v);
        asg[v].push(o);
        loads[v] += problem.demand(o);
        on_vehicle[v].extend([problem.pickup(o), problem.delivery(o)]);
        row_scale[v] = loads[v].free_ratio(&problem.capacity(v)).max(PHEROMONE_FLOOR);
        open.retain(|&x| problem.stop(x).owner != o);
        here = s;
    }
    for orders in &mut asg {
        orders.sort_unstable();
    }
    debug_assert!(ns == problem.stops().len());
    asg
}

pub fn run_vrp_aco(problem: &Problem, params: &AcoParams, tsp: &dyn TspStage) -> EvaluatedSolution {
    run_vrp_aco_observed(problem, params, tsp, &mut |_, _| {})
}

pub fn run_vrp_aco_observed(
    problem: &Problem,
    params: &AcoParams,
    tsp: &dyn TspStage,
    observer: &mut Observer<'_>,
) -> EvaluatedSolution {
    let clock = Clock::new(params.max_runtime);
    let deadline = clock.deadline();
    let mut reporter = Reporter::new(clock, Some(observer));
    let mut rng = rng_from(params.rng_seed);
    let mut cache = TourCache::new(problem, tsp, params.rng_seed);
    let mut state = init_pheromones(problem, params.best_set_size);
    let mut best: Option<EvaluatedSolution> = None;
    let mut unimproved = 0;
    let mut iteration = 0;
    loop {
        if best.is_some()
            && (unimproved >= params.max_unimproved
                || clock.expired()
                || params.max_iterations.is_some_and(|m| iteration >= m))
        {
            break;
        }
        iteration += 1;
        let probabilistic = rng.gen_bool(params.novelty_fraction.clamp(0.0, 1.0));
        let asg = construct_assignment(problem, &state, &mut rng, probabilistic);
        let ev = cache.evaluate_round(&asg, iteration as u64, deadline);
        state.levels.observe(&ev.score);
        if best.as_ref().is_none_or(|b| ev.score < b.score) {
            best = Some(ev.clone());
            unimproved = 0;
        } else {
            unimproved += 1;
        }
        reporter.offer(ev.score);
        state.try_add(&ev);
        let members = state.best_set.clone();
        for m in &members {
            deposit(&mut state, m);
        }
        evaporate(&mut state, &mut rng, params.evaporation_prob, params.evaporation);
        if cache.len() > 200_000 {
            cache = TourCache::new(problem, tsp, params.rng_seed);
        }
    }
    debug!("aco stopped after {iteration} iterations");
    reporter.finish();
    best.expect("at least one iteration")
}

/// Stops of a chain in visiting order, for pheromone bookkeeping.
pub fn transitions(chain: &[StopVisit]) -> impl Iterator<Item = (usize, usize)> + '_ {
    chain.windows(2).map(|w| (w[0].stop, w[1].stop))
}
