//! Clarke-Wright style savings construction generalized to pickup and delivery.
//!
//! Every order starts as its own route out of the depot (the first vehicle's
//! start). Two routes merge by concatenation in either direction, or by
//! running all pickups of both before all their deliveries; the variant with
//! the largest saving wins. Merges must fit the largest vehicle. Once no
//! positive saving fits, routes are force-merged until they fit the fleet, and
//! finally handed to vehicles largest load first.

use crate::model::{Load, Problem, Solution, StopKind, StopVisit};

#[derive(Clone, Debug)]
struct Route {
    visits: Vec<StopVisit>,
    peak: Load,
    cost: i64,
}

fn route_cost(problem: &Problem, depot: usize, visits: &[StopVisit]) -> i64 {
    let m = problem.matrix();
    let mut here = depot;
    let mut total = 0;
    for v in visits {
        let loc = problem.location(*v);
        total += m.dist(here, loc);
        here = loc;
    }
    total + m.dist(here, depot)
}

fn route_peak(problem: &Problem, visits: &[StopVisit]) -> Load {
    let mut load = Load::default();
    let mut peak = Load::default();
    for v in visits {
        let stop = problem.stop(v.stop);
        match stop.kind {
            StopKind::Pickup => {
                load += problem.demand(stop.owner);
                peak = peak.max(load);
            }
            StopKind::Delivery => load -= problem.demand(stop.owner),
            _ => {}
        }
    }
    peak
}

fn build(problem: &Problem, depot: usize, visits: Vec<StopVisit>) -> Route {
    Route {
        peak: route_peak(problem, &visits),
        cost: route_cost(problem, depot, &visits),
        visits,
    }
}

fn merge_variants(problem: &Problem, a: &Route, b: &Route) -> [Vec<StopVisit>; 4] {
    let kind = |v: &StopVisit| problem.stop(v.stop).kind;
    let picks = |r: &Route| r.visits.iter().filter(|v| kind(v) == StopKind::Pickup).copied().collect::<Vec<_>>();
    let drops = |r: &Route| r.visits.iter().filter(|v| kind(v) != StopKind::Pickup).copied().collect::<Vec<_>>();
    let cat = |parts: &[Vec<StopVisit>]| parts.concat();
    [
        cat(&[a.visits.clone(), b.visits.clone()]),
        cat(&[b.visits.clone(), a.visits.clone()]),
        cat(&[picks(a), picks(b), drops(a), drops(b)]),
        cat(&[picks(a), picks(b), drops(b), drops(a)]),
    ]
}

/// Best merge of two routes as `(saving, merged)`; `cap` filters merges
/// whose peak load would not fit.
fn best_merge(problem: &Problem, depot: usize, a: &Route, b: &Route, cap: Option<&Load>) -> Option<(i64, Route)> {
    let mut best: Option<(i64, Route)> = None;
    for visits in merge_variants(problem, a, b) {
        let merged = build(problem, depot, visits);
        if cap.is_some_and(|c| !merged.peak.fits_in(c)) {
            continue;
        }
        let saving = a.cost + b.cost - merged.cost;
        if best.as_ref().is_none_or(|(s, _)| saving > *s) {
            best = Some((saving, merged));
        }
    }
    best
}

fn merge_round(problem: &Problem, depot: usize, routes: &mut Vec<Route>, cap: Option<&Load>, positive_only: bool) -> bool {
    let mut best: Option<(i64, usize, usize, Route)> = None;
    for i in 0..routes.len() {
        for j in i + 1..routes.len() {
            if let Some((s, r)) = best_merge(problem, depot, &routes[i], &routes[j], cap) {
                if (!positive_only || s > 0) && best.as_ref().is_none_or(|b| s > b.0) {
                    best = Some((s, i, j, r));
                }
            }
        }
    }
    match best {
        Some((_, i, j, r)) => {
            routes.remove(j);
            routes[i] = r;
            true
        }
        None => false,
    }
}

/// Deterministic savings construction.
pub fn savings_construct(problem: &Problem) -> Solution {
    let nv = problem.n_vehicles();
    let mut solution = problem.empty_solution();
    if nv == 0 || problem.n_orders() == 0 {
        return solution;
    }
    let depot = problem.location(StopVisit::new(problem.tour_begin(0), 0));
    let cap = (0..nv).map(|v| problem.capacity(v)).fold(Load::default(), Load::max);
    let mut routes: Vec<Route> = (0..problem.n_orders())
        .map(|o| {
            build(
                problem,
                depot,
                vec![StopVisit::new(problem.pickup(o), 0), StopVisit::new(problem.delivery(o), 0)],
            )
        })
        .collect();
    while merge_round(problem, depot, &mut routes, Some(&cap), true) {}
    while routes.len() > nv {
        if !merge_round(problem, depot, &mut routes, Some(&cap), false) {
            merge_round(problem, depot, &mut routes, None, false);
        }
    }
    let weight = |l: &Load| (l.kg, l.liters, l.pieces);
    let mut by_load: Vec<usize> = (0..routes.len()).collect();
    by_load.sort_by_key(|&r| std::cmp::Reverse(weight(&routes[r].peak)));
    let mut by_cap: Vec<usize> = (0..nv).collect();
    by_cap.sort_by_key(|&v| std::cmp::Reverse(weight(&problem.capacity(v))));
    for (r, v) in by_load.into_iter().zip(by_cap) {
        let chain = &mut solution.chains[v];
        let end = chain.pop().expect("bracketed chain");
        chain.extend(routes[r].visits.iter().copied());
        chain.push(end);
    }
    solution
}
