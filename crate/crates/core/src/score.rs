//! Six-level lexicographic cost: hard levels `[h1, h2, h3]` gate
//! feasibility, soft levels `[s1, s2, s3]` rank quality. Smaller is better
//! and the first differing level decides.
//!
//! - `h1`: capacity excess (pieces + liters + kg, each clamped) plus 100 per
//!   order-restriction fault and 100 per violated (non-)co-location pair.
//! - `h2`: 100 per delivery not preceded by its pickup on the same chain, plus
//!   one per wrong tour start/end location, wrong-vehicle stop and forbidden
//!   return.
//! - `h3`: seconds over the maximum tour duration plus seconds past the tour
//!   end limit.
//! - `s1`: seconds a service start precedes its window start or follows its
//!   window end.
//! - `s2`: driven kilometers plus waiting, driving and service seconds
//!   (kilometers summed over all tours, then rounded). Units are mixed on
//!   purpose; [`S2Mode::Cost`] switches to currency-weighted cost.
//! - `s3`: `max(t_start - t_pstart, 0)` plus distinct visited locations plus
//!   serviced stops, per tour. The first term follows the formula literally,
//!   so it only fires when a tour would start before its window, which the
//!   timeline never does.
//!
//! `h3..s3` are only computed once `h1` and `h2` are zero; otherwise they
//! hold [`NOT_EVALUATED`], which compares worse than any value.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::model::{assign_drivers, chain_orders, Load, Problem, Solution, StopKind, StopVisit};
use crate::timeline::{schedule_tour, ScheduledTour};

/// Sentinel for a level skipped by short-circuit evaluation.
pub const NOT_EVALUATED: i64 = i64::MAX;

/// Points added per order-restriction, dependency or precedence fault.
pub const FAULT_WEIGHT: i64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Score {
    pub h1: i64,
    pub h2: i64,
    pub h3: i64,
    pub s1: i64,
    pub s2: i64,
    pub s3: i64,
}

impl Score {
    pub const ZERO: Score = Score::new([0; 6]);
    /// Worse than any score that can be produced by evaluation.
    pub const WORST: Score = Score::new([NOT_EVALUATED; 6]);

    pub const fn new(l: [i64; 6]) -> Self {
        Score {
            h1: l[0],
            h2: l[1],
            h3: l[2],
            s1: l[3],
            s2: l[4],
            s3: l[5],
        }
    }

    /// Score with only the first two hard levels evaluated.
    pub const fn infeasible(h1: i64, h2: i64) -> Self {
        Score::new([h1, h2, NOT_EVALUATED, NOT_EVALUATED, NOT_EVALUATED, NOT_EVALUATED])
    }

    pub fn levels(&self) -> [i64; 6] {
        [self.h1, self.h2, self.h3, self.s1, self.s2, self.s3]
    }

    /// All hard levels are zero.
    pub fn is_feasible(&self) -> bool {
        self.h1 == 0 && self.h2 == 0 && self.h3 == 0
    }

    /// S1 is zero, i.e. every time window is met.
    pub fn windows_met(&self) -> bool {
        self.s1 == 0
    }
}

impl Default for Score {
    fn default() -> Self {
        Score::WORST
    }
}

/// Lexicographic comparison over `(h1, h2, h3, s1, s2, s3)`.
pub fn compare(a: &Score, b: &Score) -> Ordering {
    a.cmp(b)
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = self.levels();
        let show = |v: i64| if v == NOT_EVALUATED { "-".to_string() } else { v.to_string() };
        write!(
            f,
            "Hard [{}, {}, {}], Soft [{}, {}, {}]",
            show(l[0]),
            show(l[1]),
            show(l[2]),
            show(l[3]),
            show(l[4]),
            show(l[5])
        )
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(6))?;
        for v in self.levels() {
            if v == NOT_EVALUATED {
                seq.serialize_element(&Option::<i64>::None)?;
            } else {
                seq.serialize_element(&v)?;
            }
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw: Vec<Option<i64>> = Vec::deserialize(d)?;
        if raw.len() != 6 {
            return Err(de::Error::invalid_length(raw.len(), &"six score levels"));
        }
        let mut l = [0; 6];
        for (slot, v) in l.iter_mut().zip(raw) {
            *slot = v.unwrap_or(NOT_EVALUATED);
        }
        Ok(Score::new(l))
    }
}

/// How the S2 level is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum S2Mode {
    /// Kilometers plus waiting, driving and service seconds.
    #[default]
    Raw,
    /// Vehicle cost rates applied to km, tour hours, tours and stops; in cents.
    Cost,
}

/// Sequence-dependent hard facts of one chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChainFacts {
    /// Per-dimension peak load along the chain.
    pub peak: Load,
    /// Order-restriction faults decided by the vehicle alone.
    pub static_faults: i64,
    /// Complete `h2` contribution of the chain.
    pub h2: i64,
}

impl ChainFacts {
    pub fn is_empty_load(&self) -> bool {
        self.peak == Load::default()
    }
}

/// Evaluates the capacity peak, vehicle restrictions and `h2` faults of a chain.
pub fn chain_facts(problem: &Problem, v: usize, chain: &[StopVisit]) -> ChainFacts {
    let vehicle = problem.vehicle(v);
    let mut load = Load::default();
    let mut peak = Load::default();
    let mut picked = vec![false; problem.n_orders()];
    let mut f_pd = 0;
    let mut f_sv = 0;
    let mut f_sr = 0;
    let mut static_faults = 0;
    let mut visited: Vec<usize> = Vec::new();
    let mut last_loc = chain.first().map(|c| problem.location(*c));
    if let Some(l) = last_loc {
        visited.push(l);
    }
    for visit in chain {
        let stop = problem.stop(visit.stop);
        let Some(o) = stop.order() else { continue };
        match stop.kind {
            StopKind::Pickup => {
                picked[o] = true;
                load += problem.demand(o);
                peak = peak.max(load);
                static_faults += problem.static_faults(o, v);
            }
            StopKind::Delivery => {
                if !picked[o] {
                    f_pd += 1;
                }
                load -= problem.demand(o);
            }
            _ => {}
        }
        if problem.required_vehicle(o).is_some_and(|rv| rv != v) {
            f_sv += 1;
        }
        if !vehicle.allow_return {
            let loc = problem.location(*visit);
            if Some(loc) != last_loc {
                if visited.contains(&loc) {
                    f_sr += 1;
                } else {
                    visited.push(loc);
                }
            }
            last_loc = Some(loc);
        }
    }
    let mut f_se = 0;
    let begin_opts = &problem.stop(problem.tour_begin(v)).options;
    let end_opts = &problem.stop(problem.tour_end(v)).options;
    match chain.first() {
        Some(&f) if problem.stop(f.stop).kind == StopKind::TourBegin && begin_opts.contains(&problem.location(f)) => {}
        _ => f_se += 1,
    }
    match chain.last() {
        Some(&l) if problem.stop(l.stop).kind == StopKind::TourEnd && end_opts.contains(&problem.location(l)) => {}
        _ => f_se += 1,
    }
    ChainFacts {
        peak,
        static_faults,
        h2: FAULT_WEIGHT * f_pd + f_se + f_sv + f_sr,
    }
}

/// Capacity excess per vehicle after first-fit trailer attachment.
///
/// A vehicle that allows trailers and overflows its own capacity takes the
/// first free trailer that makes the load fit, else the free trailer leaving
/// the smallest excess. Vehicles are processed in index order.
pub fn capacity_excess(problem: &Problem, peaks: &[Load]) -> Vec<i64> {
    let mut used = vec![false; problem.instance().trailers.len()];
    peaks
        .iter()
        .enumerate()
        .map(|(v, peak)| {
            let cap = problem.capacity(v);
            let own = peak.excess_over(&cap);
            if own == 0 || !problem.vehicle(v).trailer_allowed {
                return own;
            }
            let mut best: Option<(usize, i64)> = None;
            for t in (0..used.len()).filter(|&t| !used[t]) {
                let e = peak.excess_over(&(cap + problem.trailer_capacity(t)));
                if best.is_none_or(|(_, b)| e < b) {
                    best = Some((t, e));
                }
                if e == 0 {
                    break;
                }
            }
            match best {
                Some((t, e)) => {
                    used[t] = true;
                    e
                }
                None => own,
            }
        })
        .collect()
}

/// Vehicle of each order (by its pickup), `None` when unassigned.
fn order_vehicles(problem: &Problem, chains: &[Vec<StopVisit>]) -> Vec<Option<usize>> {
    let mut out = vec![None; problem.n_orders()];
    for (v, chain) in chains.iter().enumerate() {
        for visit in chain {
            if problem.stop(visit.stop).kind == StopKind::Pickup {
                out[problem.stop(visit.stop).owner] = Some(v);
            }
        }
    }
    out
}

/// Violated co-location and separation pairs.
pub fn dependency_faults(problem: &Problem, chains: &[Vec<StopVisit>]) -> i64 {
    let veh = order_vehicles(problem, chains);
    let split = problem.colocated_pairs().iter().filter(|&&(a, b)| veh[a] != veh[b]).count();
    let joined = problem
        .separated_pairs()
        .iter()
        .filter(|&&(a, b)| veh[a].is_some() && veh[a] == veh[b])
        .count();
    (split + joined) as i64
}

fn h1_from(problem: &Problem, solution: &Solution, facts: &[ChainFacts], driver_faults: u32) -> i64 {
    let peaks: Vec<Load> = facts.iter().map(|f| f.peak).collect();
    let excess: i64 = capacity_excess(problem, &peaks).iter().sum();
    let static_faults: i64 = facts.iter().map(|f| f.static_faults).sum();
    excess
        + FAULT_WEIGHT * (static_faults + driver_faults as i64)
        + FAULT_WEIGHT * dependency_faults(problem, &solution.chains)
}

pub fn eval_h1(problem: &Problem, solution: &Solution) -> i64 {
    let facts: Vec<ChainFacts> = solution
        .chains
        .iter()
        .enumerate()
        .map(|(v, c)| chain_facts(problem, v, c))
        .collect();
    let (_, driver_faults) = assign_drivers(problem, &solution.chains);
    h1_from(problem, solution, &facts, driver_faults)
}

pub fn eval_h2(problem: &Problem, solution: &Solution) -> i64 {
    solution
        .chains
        .iter()
        .enumerate()
        .map(|(v, c)| chain_facts(problem, v, c).h2)
        .sum()
}

pub fn eval_h3(problem: &Problem, schedules: &[ScheduledTour]) -> i64 {
    schedules
        .iter()
        .map(|t| {
            let v = problem.vehicle(t.vehicle);
            (t.duration - v.max_tour_duration).max(0) + (t.end_time - v.tour_end_limit).max(0)
        })
        .sum()
}

pub fn eval_s1(_problem: &Problem, schedules: &[ScheduledTour]) -> i64 {
    schedules.iter().map(|t| t.tw_penalty + t.tw_early).sum()
}

pub fn eval_s2(problem: &Problem, schedules: &[ScheduledTour]) -> i64 {
    match problem.s2_mode() {
        S2Mode::Raw => {
            let meters: i64 = schedules.iter().map(|t| t.total_dist).sum();
            let seconds: i64 = schedules.iter().map(|t| t.total_wait + t.total_drive + t.total_service).sum();
            (meters as f64 / 1000.0).round() as i64 + seconds
        }
        S2Mode::Cost => {
            let cost: f64 = schedules
                .iter()
                .map(|t| {
                    let r = problem.vehicle(t.vehicle).cost_rates;
                    r.per_km * t.total_dist as f64 / 1000.0
                        + r.per_hour * t.duration as f64 / 3600.0
                        + r.per_tour
                        + r.per_stop * t.chain_length as f64
                })
                .sum();
            (cost * 100.0).round() as i64
        }
    }
}

pub fn eval_s3(problem: &Problem, schedules: &[ScheduledTour]) -> i64 {
    schedules
        .iter()
        .map(|t| {
            let defined_start = problem.vehicle(t.vehicle).tour_start_window.start;
            (defined_start - t.start_time).max(0) + t.distinct_locations as i64 + t.chain_length as i64
        })
        .sum()
}

/// Scores a solution given the schedules of its non-empty chains.
pub fn evaluate(problem: &Problem, solution: &Solution, schedules: &[ScheduledTour]) -> Score {
    let h1 = eval_h1(problem, solution);
    let h2 = eval_h2(problem, solution);
    if h1 > 0 || h2 > 0 {
        return Score::infeasible(h1, h2);
    }
    soft_levels(problem, h1, h2, schedules)
}

fn soft_levels(problem: &Problem, h1: i64, h2: i64, schedules: &[ScheduledTour]) -> Score {
    Score::new([
        h1,
        h2,
        eval_h3(problem, schedules),
        eval_s1(problem, schedules),
        eval_s2(problem, schedules),
        eval_s3(problem, schedules),
    ])
}

/// A solution with its driver teams, schedules and score.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaluatedSolution {
    pub solution: Solution,
    pub schedules: Vec<ScheduledTour>,
    pub score: Score,
}

/// Whether a chain serves at least one stop.
pub fn is_used(problem: &Problem, chain: &[StopVisit]) -> bool {
    chain.iter().any(|v| problem.stop(v.stop).is_service())
}

/// Full evaluation: staffs drivers, scores hard levels and, when `h1` and `h2`
/// are zero, schedules every used chain with `schedule` and scores the rest.
pub fn evaluate_with(
    problem: &Problem,
    mut solution: Solution,
    mut schedule: impl FnMut(usize, &[StopVisit]) -> ScheduledTour,
) -> EvaluatedSolution {
    let facts: Vec<ChainFacts> = solution
        .chains
        .iter()
        .enumerate()
        .map(|(v, c)| chain_facts(problem, v, c))
        .collect();
    let (teams, driver_faults) = assign_drivers(problem, &solution.chains);
    solution.drivers = teams;
    let h1 = h1_from(problem, &solution, &facts, driver_faults);
    let h2: i64 = facts.iter().map(|f| f.h2).sum();
    if h1 > 0 || h2 > 0 {
        return EvaluatedSolution {
            solution,
            schedules: Vec::new(),
            score: Score::infeasible(h1, h2),
        };
    }
    let schedules: Vec<ScheduledTour> = solution
        .chains
        .iter()
        .enumerate()
        .filter(|(_, c)| is_used(problem, c))
        .map(|(v, c)| schedule(v, c))
        .collect();
    let score = soft_levels(problem, h1, h2, &schedules);
    EvaluatedSolution {
        solution,
        schedules,
        score,
    }
}

pub fn evaluate_solution(problem: &Problem, solution: Solution) -> EvaluatedSolution {
    evaluate_with(problem, solution, |v, c| schedule_tour(problem, v, c))
}

/// Score of a single vehicle's tour, used to rank chains in the TSP stage.
///
/// Cross-vehicle terms (drivers, co-location, trailers) are omitted; they do
/// not depend on the visit order.
pub fn evaluate_tour(problem: &Problem, v: usize, chain: &[StopVisit]) -> (Score, Option<ScheduledTour>) {
    let facts = chain_facts(problem, v, chain);
    let h1 = facts.peak.excess_over(&problem.capacity(v)) + FAULT_WEIGHT * facts.static_faults;
    if h1 > 0 || facts.h2 > 0 {
        return (Score::infeasible(h1, facts.h2), None);
    }
    if !is_used(problem, chain) {
        return (Score::new([0, 0, 0, 0, 0, 0]), None);
    }
    let tour = schedule_tour(problem, v, chain);
    let score = soft_levels(problem, h1, facts.h2, std::slice::from_ref(&tour));
    (score, Some(tour))
}

/// Chain order and options are immaterial to these orders.
pub fn orders_on(problem: &Problem, chain: &[StopVisit]) -> Vec<usize> {
    chain_orders(problem, chain)
}
