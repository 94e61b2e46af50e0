//! Human-readable JSON rendering of a solved instance.

use serde::Serialize;

use super::run::{Algorithm, SolveOutcome};
use crate::model::{clock::format_clock, Problem, StopKind};
use crate::score::{is_used, Score};
use crate::timeline::ScheduledTour;

#[derive(Clone, Debug, Serialize)]
pub struct VisitReport {
    pub kind: StopKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<String>,
    pub location: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub service_start: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TourReport {
    pub vehicle: String,
    pub drivers: Vec<String>,
    pub visits: Vec<VisitReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolutionReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub score: Score,
    pub score_text: String,
    pub feasible: bool,
    pub tw_met: bool,
    pub wall_time: f64,
    pub partial: bool,
    /// Used tours only.
    pub tours: Vec<TourReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedules: Option<Vec<ScheduledTour>>,
}

/// Builds the report; `emit_schedule` adds the full timeline of every used tour.
pub fn solution_report(problem: &Problem, algo: Algorithm, seed: u64, out: &SolveOutcome, emit_schedule: bool) -> SolutionReport {
    let inst = problem.instance();
    let ev = &out.result;
    let start_of = |v: usize, k: usize| {
        ev.schedules
            .iter()
            .find(|t| t.vehicle == v)
            .and_then(|t| t.visits.get(k))
            .map(|sv| format_clock(sv.service_start))
    };
    let tours = ev
        .solution
        .chains
        .iter()
        .enumerate()
        .filter(|(_, c)| is_used(problem, c))
        .map(|(v, chain)| TourReport {
            vehicle: inst.vehicles[v].id.clone(),
            drivers: ev
                .solution
                .drivers
                .get(v)
                .map(|ds| ds.iter().map(|&d| inst.drivers[d].id.clone()).collect())
                .unwrap_or_default(),
            visits: chain
                .iter()
                .enumerate()
                .map(|(k, visit)| {
                    let stop = problem.stop(visit.stop);
                    VisitReport {
                        kind: stop.kind,
                        order: stop.order().map(|o| inst.orders[o].id.clone()),
                        location: inst.locations[problem.location(*visit)].id.clone(),
                        service_start: start_of(v, k),
                    }
                })
                .collect(),
        })
        .collect();
    let schedules = emit_schedule.then(|| {
        ev.schedules
            .iter()
            .filter(|t| is_used(problem, &ev.solution.chains[t.vehicle]))
            .cloned()
            .collect()
    });
    SolutionReport {
        instance: inst.name.clone(),
        algorithm: algo,
        seed,
        score: ev.score,
        score_text: ev.score.to_string(),
        feasible: ev.score.is_feasible(),
        tw_met: ev.score.windows_met(),
        wall_time: out.wall_time,
        partial: out.partial,
        tours,
        schedules,
    }
}
