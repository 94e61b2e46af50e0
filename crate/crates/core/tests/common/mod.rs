//! Fixtures shared by the integration tests: random instances, chains and
//! an independent timeline simulator.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rvrp::distance::TravelMatrix;
use rvrp::model::*;
use rvrp::solver::rng_from;

/// Knobs of [`random_problem`].
#[derive(Clone, Debug)]
pub struct Gen {
    pub orders: usize,
    pub vehicles: usize,
    /// Distinct pickup points instead of the first vehicle's depot.
    pub pd: bool,
    /// Random delivery (and pickup) windows.
    pub windows: bool,
    /// Location options per pickup (PD only).
    pub pickup_options: usize,
    pub side_m: f64,
    pub speed_mps: f64,
    /// Pieces per vehicle; every order is one piece.
    pub capacity: i64,
    pub pauses: Vec<(Seconds, Seconds)>,
    /// Service seconds drawn from this range.
    pub service: (Seconds, Seconds),
    pub start_window: (Seconds, Seconds),
    /// Window opening range and width range.
    pub window_open: (Seconds, Seconds),
    pub window_width: (Seconds, Seconds),
    pub split_prob: f64,
    pub can_wait_prob: f64,
}

impl Default for Gen {
    fn default() -> Self {
        Gen {
            orders: 4,
            vehicles: 1,
            pd: true,
            windows: false,
            pickup_options: 1,
            side_m: 20_000.0,
            speed_mps: 13.89,
            capacity: 100,
            pauses: vec![],
            service: (300, 900),
            start_window: (8 * 3600, 8 * 3600),
            window_open: (8 * 3600, 15 * 3600),
            window_width: (3600, 4 * 3600),
            split_prob: 0.0,
            can_wait_prob: 1.0,
        }
    }
}

fn point(rng: &mut ChaCha8Rng, id: String, side: f64) -> Location {
    Location {
        id,
        x: rng.gen_range(0..=side as i64) as f64,
        y: rng.gen_range(0..=side as i64) as f64,
    }
}

pub fn random_instance(g: &Gen, rng: &mut ChaCha8Rng) -> Instance {
    let mut locations = Vec::new();
    for k in 0..g.vehicles.max(1) {
        locations.push(point(rng, format!("d{k}"), g.side_m));
    }
    let mut orders = Vec::new();
    for i in 0..g.orders {
        locations.push(point(rng, format!("c{i}"), g.side_m));
        let pickups: Vec<String> = if g.pd {
            (0..g.pickup_options.max(1))
                .map(|k| {
                    let id = format!("p{i}_{k}");
                    locations.push(point(rng, id.clone(), g.side_m));
                    id
                })
                .collect()
        } else {
            vec!["d0".to_string()]
        };
        let mut o = Order::simple(&format!("o{i}"), &pickups[0], &format!("c{i}"), Amount::new(1, 0.0, 0.0));
        o.pickup_options = pickups;
        o.service_duration_pickup = rng.gen_range(g.service.0..=g.service.1);
        o.service_duration_delivery = rng.gen_range(g.service.0..=g.service.1);
        o.split_allowed = rng.gen_bool(g.split_prob);
        if g.windows {
            let open = rng.gen_range(g.window_open.0..=g.window_open.1);
            let width = rng.gen_range(g.window_width.0..=g.window_width.1);
            o.tw_delivery = Some(TimeWindow::new(open, open + width));
            if g.pd && rng.gen_bool(0.5) {
                let po = (open - rng.gen_range(0..=2 * 3600)).max(0);
                o.tw_pickup = Some(TimeWindow::new(po, po + width));
            }
        }
        orders.push(o);
    }
    let vehicles = (0..g.vehicles)
        .map(|k| {
            let mut v = Vehicle::simple(&format!("v{k}"), &format!("d{k}"), Amount::new(g.capacity, 0.0, 0.0));
            v.tour_start_window = TimeWindow::new(g.start_window.0, g.start_window.1);
            v.can_wait = rng.gen_bool(g.can_wait_prob);
            v
        })
        .collect();
    Instance {
        name: Some("test fixture".into()),
        locations,
        vehicles,
        trailers: vec![],
        drivers: vec![],
        orders,
        pause_rules: g.pauses.iter().map(|&(s, e)| PauseRule::fixed(s, e)).collect(),
        max_runtime_s: 10,
        distance: Default::default(),
    }
}

pub fn random_problem(g: &Gen, seed: u64) -> Problem {
    let inst = random_instance(g, &mut rng_from(seed));
    let m = TravelMatrix::build_euclidean(&inst.locations, g.speed_mps).unwrap();
    Problem::new(inst, m).unwrap()
}

/// All pickups and deliveries of `orders`.
pub fn stops_of(problem: &Problem, orders: &[usize]) -> Vec<usize> {
    orders.iter().flat_map(|&o| [problem.pickup(o), problem.delivery(o)]).collect()
}

/// Uniform random precedence-valid chain with random options, built by
/// repeatedly drawing among the currently allowed stops.
pub fn random_chain(problem: &Problem, v: usize, stops: &[usize], rng: &mut impl Rng) -> Vec<StopVisit> {
    let mut left = stops.to_vec();
    let mut chain = vec![StopVisit::new(problem.tour_begin(v), 0)];
    while !left.is_empty() {
        let allowed: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&s| {
                let st = problem.stop(s);
                st.kind != StopKind::Delivery || !left.contains(&problem.pickup(st.owner))
            })
            .collect();
        let s = *allowed.choose(rng).unwrap();
        let opts = problem.stop(s).options.len();
        chain.push(StopVisit::new(s, rng.gen_range(0..opts)));
        left.retain(|&x| x != s);
    }
    chain.push(StopVisit::new(problem.tour_end(v), 0));
    chain
}

/// Any-order chain over `stops` (precedence ignored), for timeline tests.
pub fn shuffled_chain(problem: &Problem, v: usize, stops: &[usize], rng: &mut impl Rng) -> Vec<StopVisit> {
    let mut inner: Vec<usize> = stops.to_vec();
    inner.shuffle(rng);
    let mut chain = vec![StopVisit::new(problem.tour_begin(v), 0)];
    chain.extend(inner.into_iter().map(|s| StopVisit::new(s, 0)));
    chain.push(StopVisit::new(problem.tour_end(v), 0));
    chain
}

pub fn in_pause(pauses: &[(Seconds, Seconds)], t: Seconds) -> bool {
    pauses.iter().any(|&(s, e)| s <= t && t < e)
}

/// Seconds of `[a, b)` inside pauses, counted second by second.
pub fn pause_seconds(pauses: &[(Seconds, Seconds)], a: Seconds, b: Seconds) -> Seconds {
    (a..b).filter(|&t| in_pause(pauses, t)).count() as Seconds
}

/// `work` seconds of activity from `t`, sitting out every paused second.
fn tick_through(pauses: &[(Seconds, Seconds)], mut t: Seconds, mut work: Seconds) -> Seconds {
    while work > 0 {
        if let Some(&(_, e)) = pauses.iter().find(|&&(s, e)| s <= t && t < e) {
            t = e;
            continue;
        }
        let next = pauses.iter().map(|&(s, _)| s).filter(|&s| s > t).min().unwrap_or(Seconds::MAX);
        let step = work.min(next - t);
        t += step;
        work -= step;
    }
    t
}

/// Total lateness of `chain` when the tour starts exactly at `t0`.
pub fn lateness_from(problem: &Problem, v: usize, chain: &[StopVisit], t0: Seconds) -> Seconds {
    let pauses = problem.pauses();
    let vehicle = problem.vehicle(v);
    let mut t = t0;
    let mut late = 0;
    for k in 1..chain.len() {
        let arrival = tick_through(pauses, t, problem.time(chain[k - 1], chain[k]));
        let stop = problem.stop(chain[k].stop);
        if !stop.is_service() {
            t = arrival;
            continue;
        }
        let mut s = arrival;
        if let (Some(tw), true) = (stop.tw, vehicle.can_wait) {
            s = s.max(tw.start);
        }
        let d = stop.service_duration;
        let end = if stop.split_allowed {
            if let Some(&(_, e)) = pauses.iter().find(|&&(ps, pe)| ps <= s && s < pe) {
                s = e;
            }
            tick_through(pauses, s, d)
        } else {
            while let Some(&(_, pe)) = pauses.iter().find(|&&(ps, pe)| s < pe && ps < s + d.max(1)) {
                s = pe;
            }
            s + d
        };
        if let Some(tw) = stop.tw {
            late += (s - tw.end).max(0);
        }
        t = end;
    }
    late
}

/// Minimum lateness over every whole-second tour start in the vehicle's
/// start window.
pub fn grid_min_lateness(problem: &Problem, v: usize, chain: &[StopVisit]) -> Seconds {
    let w = problem.vehicle(v).tour_start_window;
    (w.start..=w.end.max(w.start))
        .map(|t0| lateness_from(problem, v, chain, t0))
        .min()
        .unwrap()
}

/// Pause violations of a scheduled tour: non-split service overlapping a
/// pause, split service not extended by exactly its pause time, or a leg
/// whose pause-free time cannot hold its drive.
pub fn pause_violations(problem: &Problem, v: usize, chain: &[StopVisit]) -> Vec<String> {
    let pauses = problem.pauses();
    let tour = rvrp::timeline::schedule_tour(problem, v, chain);
    let mut bad = Vec::new();
    for (k, sv) in tour.visits.iter().enumerate() {
        let stop = problem.stop(sv.visit.stop);
        if k > 0 {
            let depart = tour.visits[k - 1].service_end;
            let free = (sv.arrival - depart) - pause_seconds(pauses, depart, sv.arrival);
            let need = problem.time(tour.visits[k - 1].visit, sv.visit);
            if free < need {
                bad.push(format!("leg {k}: {free}s free for {need}s of driving"));
            }
        }
        if !stop.is_service() {
            continue;
        }
        let d = stop.service_duration;
        let inside = pause_seconds(pauses, sv.service_start, sv.service_end);
        if stop.split_allowed {
            if in_pause(pauses, sv.service_start) || sv.service_end - sv.service_start != d + inside {
                bad.push(format!("split service {k} mis-scheduled"));
            }
        } else if inside > 0 || sv.service_end - sv.service_start != d || (d > 0 && in_pause(pauses, sv.service_start)) {
            bad.push(format!("service {k} overlaps a pause"));
        }
    }
    bad
}
