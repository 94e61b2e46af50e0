//! Places a fixed visit sequence on the time axis.
//!
//! Pauses are fixed intervals; the vehicle never drives through one and only
//! services through one when the stop allows SPLIT mode (the pause is then
//! added to the service time). Otherwise a service that would overlap a pause
//! is deferred to after it. Waiting that overlaps a pause counts as pausing.
//!
//! Time windows constrain the service start. Visits are placed as early as
//! possible from the start of the vehicle's tour-start window. Whenever a
//! visit would arrive before its window opens, the whole prefix (not the
//! pauses) is shifted right by at most the remaining start buffer, and never
//! so far that any window's lateness grows. Any remaining gap is waited out
//! when the vehicle may wait, otherwise the visit is served early.
//!
//! Every event time is a non-decreasing function of the tour start, so the
//! lateness after all shifts equals the lateness of the earliest start, which
//! is the minimum over all admissible starts.

use serde::Serialize;

use crate::model::{Problem, Seconds, StopVisit, Vehicle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ScheduledVisit {
    pub visit: StopVisit,
    pub arrival: Seconds,
    pub service_start: Seconds,
    pub service_end: Seconds,
    /// Idle time before the service, excluding time spent in pauses.
    pub wait_before: Seconds,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScheduledTour {
    pub vehicle: usize,
    pub start_time: Seconds,
    pub end_time: Seconds,
    pub duration: Seconds,
    pub visits: Vec<ScheduledVisit>,
    pub pauses: Vec<(Seconds, Seconds)>,
    pub total_drive: Seconds,
    pub total_wait: Seconds,
    pub total_service: Seconds,
    pub total_dist: i64,
    pub distinct_locations: usize,
    pub chain_length: usize,
    /// Seconds by which service starts miss their window end.
    pub tw_penalty: Seconds,
    /// Seconds by which service starts precede their window start.
    pub tw_early: Seconds,
}

/// Index of the first pause that ends after `t`.
#[inline]
fn first_pause_after(pauses: &[(Seconds, Seconds)], t: Seconds) -> usize {
    pauses.partition_point(|&(_, e)| e <= t)
}

/// Performs `work` seconds of interruptible activity starting at `t`.
/// Pauses met on the way are sat out; returns the completion time.
pub(crate) fn work_through(pauses: &[(Seconds, Seconds)], mut t: Seconds, mut work: Seconds) -> Seconds {
    let mut i = first_pause_after(pauses, t);
    while work > 0 && i < pauses.len() {
        let (ps, pe) = pauses[i];
        if ps <= t {
            t = pe;
        } else if t + work <= ps {
            break;
        } else {
            work -= ps - t;
            t = pe;
        }
        i += 1;
    }
    t + work
}

/// Earliest start `>= t` outside every pause such that `[start, start + d)`
/// touches no pause.
pub(crate) fn uninterrupted_start(pauses: &[(Seconds, Seconds)], mut t: Seconds, d: Seconds) -> Seconds {
    let mut i = first_pause_after(pauses, t);
    while i < pauses.len() {
        let (ps, pe) = pauses[i];
        if ps <= t || t + d > ps {
            t = pe;
            i += 1;
        } else {
            break;
        }
    }
    t
}

/// Earliest instant `>= t` not inside a pause.
#[inline]
fn outside_pause(pauses: &[(Seconds, Seconds)], t: Seconds) -> Seconds {
    uninterrupted_start(pauses, t, 0)
}

fn pause_overlap(pauses: &[(Seconds, Seconds)], a: Seconds, b: Seconds) -> Seconds {
    pauses[first_pause_after(pauses, a)..]
        .iter()
        .take_while(|&&(s, _)| s < b)
        .map(|&(s, e)| e.min(b) - s.max(a))
        .filter(|&x| x > 0)
        .sum()
}

/// Effective service time of a stop on a vehicle.
pub fn effective_service(problem: &Problem, vehicle: &Vehicle, stop: usize) -> Seconds {
    let s = problem.stop(stop);
    if vehicle.fast_loading && s.fast_loading_modifier > 0.0 {
        (s.service_duration as f64 * (1.0 - s.fast_loading_modifier)).round() as Seconds
    } else {
        s.service_duration
    }
}

/// Per-visit times from one forward pass, plus the total lateness.
struct Pass {
    times: Vec<(Seconds, Seconds, Seconds)>,
    lateness: Seconds,
}

struct Simulator<'a> {
    problem: &'a Problem,
    vehicle: &'a Vehicle,
    chain: &'a [StopVisit],
    travel: Vec<Seconds>,
    service: Vec<Seconds>,
}

impl<'a> Simulator<'a> {
    fn new(problem: &'a Problem, vehicle_ix: usize, chain: &'a [StopVisit]) -> Self {
        let vehicle = problem.vehicle(vehicle_ix);
        let travel = chain.windows(2).map(|w| problem.time(w[0], w[1])).collect();
        let service = chain.iter().map(|v| effective_service(problem, vehicle, v.stop)).collect();
        Self {
            problem,
            vehicle,
            chain,
            travel,
            service,
        }
    }

    /// Forward pass from tour start `t0`.
    fn run(&self, t0: Seconds, pass: &mut Pass) {
        let pauses = self.problem.pauses();
        pass.times.clear();
        pass.lateness = 0;
        let mut t = t0;
        for (k, visit) in self.chain.iter().enumerate() {
            let arrival = if k == 0 { t0 } else { work_through(pauses, t, self.travel[k - 1]) };
            let stop = self.problem.stop(visit.stop);
            if !stop.is_service() {
                pass.times.push((arrival, arrival, arrival));
                t = arrival;
                continue;
            }
            let mut s = arrival;
            if let Some(tw) = stop.tw {
                if self.vehicle.can_wait {
                    s = s.max(tw.start);
                }
            }
            let d = self.service[k];
            let end = if stop.split_allowed {
                s = outside_pause(pauses, s);
                work_through(pauses, s, d)
            } else {
                s = uninterrupted_start(pauses, s, d);
                s + d
            };
            if let Some(tw) = stop.tw {
                pass.lateness += (s - tw.end).max(0);
            }
            pass.times.push((arrival, s, end));
            t = end;
        }
    }
}

/// Schedules `chain` for vehicle `vehicle`.
pub fn schedule_tour(problem: &Problem, vehicle: usize, chain: &[StopVisit]) -> ScheduledTour {
    let sim = Simulator::new(problem, vehicle, chain);
    let veh = sim.vehicle;
    let window = veh.tour_start_window;
    let mut t0 = window.start;
    let mut buffer = window.len().max(0);
    let mut pass = Pass {
        times: Vec::with_capacity(chain.len()),
        lateness: 0,
    };
    let mut probe = Pass {
        times: Vec::with_capacity(chain.len()),
        lateness: 0,
    };
    sim.run(t0, &mut pass);

    for (k, visit) in chain.iter().enumerate() {
        if buffer == 0 {
            break;
        }
        let Some(tw) = problem.stop(visit.stop).tw else { continue };
        let arrival = pass.times[k].0;
        if arrival >= tw.start {
            continue;
        }
        let base_late = pass.lateness;
        let want = buffer.min(tw.start - arrival);
        // Arrival at k and total lateness are both non-decreasing in the
        // start time, so the admissible shifts form a prefix [0, best].
        let ok = |delta: Seconds, probe: &mut Pass| {
            sim.run(t0 + delta, probe);
            probe.times[k].0 <= tw.start && probe.lateness == base_late
        };
        let shift = if ok(want, &mut probe) {
            want
        } else {
            let (mut lo, mut hi) = (0, want);
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if ok(mid, &mut probe) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if shift > 0 {
            t0 += shift;
            buffer -= shift;
            sim.run(t0, &mut pass);
        }
    }

    build_tour(&sim, vehicle, t0, &pass)
}

fn build_tour(sim: &Simulator, vehicle: usize, t0: Seconds, pass: &Pass) -> ScheduledTour {
    let problem = sim.problem;
    let pauses = problem.pauses();
    let mut visits = Vec::with_capacity(sim.chain.len());
    let mut total_wait = 0;
    let mut total_service = 0;
    let mut tw_penalty = 0;
    let mut tw_early = 0;
    let mut locations: Vec<usize> = Vec::new();
    let mut prev_end = t0;
    for (k, (&visit, &(arrival, start, end))) in sim.chain.iter().zip(&pass.times).enumerate() {
        let stop = problem.stop(visit.stop);
        let wait = if stop.is_service() {
            (start - arrival) - pause_overlap(pauses, arrival, start)
        } else {
            0
        };
        if stop.is_service() {
            total_wait += wait;
            total_service += sim.service[k];
            locations.push(problem.location(visit));
            if let Some(tw) = stop.tw {
                tw_penalty += (start - tw.end).max(0);
                tw_early += (tw.start - start).max(0);
            }
        }
        visits.push(ScheduledVisit {
            visit,
            arrival,
            service_start: start,
            service_end: end,
            wait_before: wait,
        });
        prev_end = end;
    }
    let end_time = prev_end;
    locations.sort_unstable();
    locations.dedup();
    let chain_length = sim.chain.iter().filter(|v| problem.stop(v.stop).is_service()).count();
    let total_dist = sim.chain.windows(2).map(|w| problem.dist(w[0], w[1])).sum();
    let tour_pauses = pauses
        .iter()
        .copied()
        .filter(|&(s, e)| s < end_time && e > t0)
        .collect();
    ScheduledTour {
        vehicle,
        start_time: t0,
        end_time,
        duration: end_time - t0,
        visits,
        pauses: tour_pauses,
        total_drive: sim.travel.iter().sum(),
        total_wait,
        total_service,
        total_dist,
        distinct_locations: locations.len(),
        chain_length,
        tw_penalty,
        tw_early,
    }
}
