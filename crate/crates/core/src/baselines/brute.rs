//! Exhaustive enumeration. Exact, and only usable on tiny instances.

use std::collections::HashMap;
use std::ops::ControlFlow;

use thiserror::Error;

use crate::model::{Load, Problem, StopKind, StopVisit};
use crate::score::{chain_facts, evaluate_tour, evaluate_with, EvaluatedSolution, S2Mode, Score};
use crate::solver::Clock;
use crate::timeline::{schedule_tour, ScheduledTour};

pub const MAX_TSP_STOPS: usize = 10;
pub const MAX_VRP_ORDERS: usize = 4;
pub const MAX_VRP_VEHICLES: usize = 3;

#[derive(Debug, Error)]
pub enum BruteError<T: std::fmt::Debug> {
    #[error("{what} count {count} exceeds the brute-force guard of {limit}")]
    TooLarge { what: &'static str, count: usize, limit: usize },
    #[error("brute-force budget exhausted before the enumeration finished")]
    BudgetExceeded { best: Option<T> },
}

#[derive(Clone, Copy, Debug)]
pub struct BruteOptions {
    /// Seconds.
    pub budget: f64,
    /// Lifts the size guards.
    pub allow_huge: bool,
}

impl Default for BruteOptions {
    fn default() -> Self {
        Self {
            budget: 300.0,
            allow_huge: false,
        }
    }
}

/// Calls `f` with every precedence-valid chain over `stops` for vehicle `v`,
/// across all option combinations (begin and end included).
fn for_each_chain(
    problem: &Problem,
    v: usize,
    stops: &[usize],
    f: &mut dyn FnMut(&[StopVisit]) -> ControlFlow<()>,
) -> ControlFlow<()> {
    fn rec(
        problem: &Problem,
        left: &mut Vec<usize>,
        chain: &mut Vec<StopVisit>,
        end: usize,
        f: &mut dyn FnMut(&[StopVisit]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if left.is_empty() {
            for k in 0..problem.stop(end).options.len() {
                chain.push(StopVisit::new(end, k));
                let flow = f(chain);
                chain.pop();
                flow?;
            }
            return ControlFlow::Continue(());
        }
        for i in 0..left.len() {
            let s = left[i];
            let stop = problem.stop(s);
            if stop.kind == StopKind::Delivery && left.contains(&problem.pickup(stop.owner)) {
                continue;
            }
            left.remove(i);
            for k in 0..stop.options.len() {
                chain.push(StopVisit::new(s, k));
                let flow = rec(problem, left, chain, end, f);
                chain.pop();
                if flow.is_break() {
                    left.insert(i, s);
                    return flow;
                }
            }
            left.insert(i, s);
        }
        ControlFlow::Continue(())
    }
    let begin = problem.tour_begin(v);
    let mut left = stops.to_vec();
    for k in 0..problem.stop(begin).options.len() {
        let mut chain = vec![StopVisit::new(begin, k)];
        rec(problem, &mut left, &mut chain, problem.tour_end(v), f)?;
    }
    ControlFlow::Continue(())
}

/// Tour-optimal chain for vehicle `v` over `stops` (service stop ids), by
/// the single-tour score.
pub fn brute_force_tsp(
    problem: &Problem,
    v: usize,
    stops: &[usize],
    opts: BruteOptions,
) -> Result<(Vec<StopVisit>, Score), BruteError<(Vec<StopVisit>, Score)>> {
    if stops.len() > MAX_TSP_STOPS && !opts.allow_huge {
        return Err(BruteError::TooLarge {
            what: "inner stop",
            count: stops.len(),
            limit: MAX_TSP_STOPS,
        });
    }
    let clock = Clock::new(opts.budget);
    let mut best: Option<(Vec<StopVisit>, Score)> = None;
    let mut leaves = 0u64;
    let flow = for_each_chain(problem, v, stops, &mut |chain| {
        leaves += 1;
        if leaves % 1024 == 0 && clock.expired() {
            return ControlFlow::Break(());
        }
        let s = evaluate_tour(problem, v, chain).0;
        if best.as_ref().is_none_or(|b| s < b.1) {
            best = Some((chain.to_vec(), s));
        }
        ControlFlow::Continue(())
    });
    match (flow, best) {
        (ControlFlow::Continue(()), Some(b)) => Ok(b),
        (_, best) => Err(BruteError::BudgetExceeded { best }),
    }
}

/// Per-vehicle candidate chains for one order subset; every chain that can
/// appear in an optimal solution is kept.
struct Candidates {
    chains: Vec<Vec<StopVisit>>,
}

/// Soft-level key of one chain in comparable units; see [`vrp_candidates`].
fn chain_key(problem: &Problem, v: usize, chain: &[StopVisit]) -> (Load, [i64; 3], f64, ScheduledTour) {
    let facts = chain_facts(problem, v, chain);
    let t = schedule_tour(problem, v, chain);
    let veh = problem.vehicle(v);
    let h3 = (t.duration - veh.max_tour_duration).max(0) + (t.end_time - veh.tour_end_limit).max(0);
    let s1 = t.tw_penalty + t.tw_early;
    let s2 = match problem.s2_mode() {
        S2Mode::Raw => t.total_dist as f64 / 1000.0 + (t.total_wait + t.total_drive + t.total_service) as f64,
        S2Mode::Cost => {
            let r = veh.cost_rates;
            100.0
                * (r.per_km * t.total_dist as f64 / 1000.0
                    + r.per_hour * t.duration as f64 / 3600.0
                    + r.per_tour
                    + r.per_stop * t.chain_length as f64)
        }
    };
    (facts.peak, [facts.h2, h3, s1], s2, t)
}

/// Levels up to S1 add up over vehicles, so only chains minimal on them can
/// be optimal. S2 rounds the fleet sum, so a chain more than one unit above
/// the vehicle's minimum cannot be optimal either. Capacity excess leads the
/// key; chains are grouped by peak load instead when trailers make the excess
/// depend on the whole fleet.
fn vrp_candidates(
    problem: &Problem,
    v: usize,
    orders: &[usize],
    schedules: &mut HashMap<(usize, Vec<StopVisit>), ScheduledTour>,
    clock: &Clock,
) -> Option<Candidates> {
    let stops: Vec<usize> = orders.iter().flat_map(|&o| [problem.pickup(o), problem.delivery(o)]).collect();
    let group_by_peak = !problem.instance().trailers.is_empty();
    let mut all: Vec<(Load, [i64; 4], f64, Vec<StopVisit>, ScheduledTour)> = Vec::new();
    let mut leaves = 0u64;
    let flow = for_each_chain(problem, v, &stops, &mut |chain| {
        leaves += 1;
        if leaves % 1024 == 0 && clock.expired() {
            return ControlFlow::Break(());
        }
        let (peak, [h2, h3, s1], s2, t) = chain_key(problem, v, chain);
        let (peak, excess) = if group_by_peak {
            (peak, 0)
        } else {
            (Load::default(), peak.excess_over(&problem.capacity(v)))
        };
        all.push((peak, [excess, h2, h3, s1], s2, chain.to_vec(), t));
        ControlFlow::Continue(())
    });
    if flow.is_break() {
        return None;
    }
    let mut chains = Vec::new();
    let mut peaks: Vec<Load> = all.iter().map(|c| c.0).collect();
    peaks.dedup();
    let mut seen_peaks: Vec<Load> = Vec::new();
    for peak in peaks {
        if seen_peaks.contains(&peak) {
            continue;
        }
        seen_peaks.push(peak);
        let group: Vec<_> = all.iter().filter(|c| c.0 == peak).collect();
        let min_key = group.iter().map(|c| c.1).min().expect("non-empty group");
        let min_s2 = group.iter().filter(|c| c.1 == min_key).map(|c| c.2).fold(f64::INFINITY, f64::min);
        for c in group.into_iter().filter(|c| c.1 == min_key && c.2 < min_s2 + 1.0) {
            schedules.insert((v, c.3.clone()), c.4.clone());
            chains.push(c.3.clone());
        }
    }
    Some(Candidates { chains })
}

/// Exact optimum over all order-to-vehicle assignments and visit orders.
/// Ties keep the first assignment in enumeration order (order 0's vehicle
/// varies slowest).
pub fn brute_force_vrp(problem: &Problem, opts: BruteOptions) -> Result<EvaluatedSolution, BruteError<EvaluatedSolution>> {
    let no = problem.n_orders();
    let nv = problem.n_vehicles();
    if !opts.allow_huge {
        if no > MAX_VRP_ORDERS {
            return Err(BruteError::TooLarge {
                what: "order",
                count: no,
                limit: MAX_VRP_ORDERS,
            });
        }
        if nv > MAX_VRP_VEHICLES {
            return Err(BruteError::TooLarge {
                what: "vehicle",
                count: nv,
                limit: MAX_VRP_VEHICLES,
            });
        }
    }
    let clock = Clock::new(opts.budget);
    let mut schedules: HashMap<(usize, Vec<StopVisit>), ScheduledTour> = HashMap::new();
    let mut candidates: HashMap<(usize, u64), Candidates> = HashMap::new();
    let mut best: Option<EvaluatedSolution> = None;
    let total = (nv as u64).pow(no as u32);
    for code in 0..total {
        // digit for order o, most significant first
        let mut masks = vec![0u64; nv];
        let mut rest = code;
        for o in (0..no).rev() {
            masks[(rest % nv as u64) as usize] |= 1 << o;
            rest /= nv as u64;
        }
        for (v, &mask) in masks.iter().enumerate() {
            if let std::collections::hash_map::Entry::Vacant(e) = candidates.entry((v, mask)) {
                let orders: Vec<usize> = (0..no).filter(|o| mask & (1 << o) != 0).collect();
                match vrp_candidates(problem, v, &orders, &mut schedules, &clock) {
                    Some(c) => {
                        e.insert(c);
                    }
                    None => return Err(BruteError::BudgetExceeded { best }),
                }
            }
        }
        let lists: Vec<&Vec<Vec<StopVisit>>> = masks.iter().enumerate().map(|(v, &m)| &candidates[&(v, m)].chains).collect();
        let mut idx = vec![0usize; nv];
        'product: loop {
            if clock.expired() {
                return Err(BruteError::BudgetExceeded { best });
            }
            let chains: Vec<Vec<StopVisit>> = (0..nv).map(|v| lists[v][idx[v]].clone()).collect();
            let ev = evaluate_with(problem, crate::model::Solution::from_chains(chains), |v, c| {
                schedules.get(&(v, c.to_vec())).cloned().unwrap_or_else(|| schedule_tour(problem, v, c))
            });
            if best.as_ref().is_none_or(|b| ev.score < b.score) {
                best = Some(ev);
            }
            let mut k = nv;
            loop {
                if k == 0 {
                    break 'product;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < lists[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
    best.ok_or(BruteError::BudgetExceeded { best: None })
}
