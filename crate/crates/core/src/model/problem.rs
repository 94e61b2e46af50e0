use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use thiserror::Error;

use super::types::*;
use super::validate::{location_index, validate_instance, ValidationError};
use crate::distance::{DistanceError, DistanceSource, TravelMatrix};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("instance failed validation ({} errors): {}", .0.len(), .0.first().map(|e| e.to_string()).unwrap_or_default())]
    Invalid(Vec<ValidationError>),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

/// Expands orders into stops.
///
/// Stop ids are positional and stable: order `o` yields pickup `2o` and
/// delivery `2o + 1`; vehicle `v` then yields tour-begin `2|O| + 2v` and
/// tour-end `2|O| + 2v + 1`. Every location reference must resolve.
pub fn expand_stops(inst: &Instance) -> Vec<Stop> {
    let loc = location_index(inst);
    let resolve = |id: &String| *loc.get(id.as_str()).unwrap_or_else(|| panic!("unresolved location {id:?}"));
    let mut stops = Vec::with_capacity(2 * inst.orders.len() + 2 * inst.vehicles.len());
    for (o, order) in inst.orders.iter().enumerate() {
        stops.push(Stop {
            id: stops.len(),
            owner: o,
            kind: StopKind::Pickup,
            options: order.pickup_options.iter().map(resolve).collect(),
            service_duration: order.service_duration_pickup,
            tw: order.tw_pickup,
            split_allowed: order.split_allowed,
            fast_loading_modifier: order.fast_loading_modifier,
        });
        stops.push(Stop {
            id: stops.len(),
            owner: o,
            kind: StopKind::Delivery,
            options: vec![resolve(&order.delivery_location)],
            service_duration: order.service_duration_delivery,
            tw: order.tw_delivery,
            split_allowed: order.split_allowed,
            fast_loading_modifier: order.fast_loading_modifier,
        });
    }
    for (v, vehicle) in inst.vehicles.iter().enumerate() {
        for (kind, options) in [
            (StopKind::TourBegin, &vehicle.start_options),
            (StopKind::TourEnd, &vehicle.end_options),
        ] {
            stops.push(Stop {
                id: stops.len(),
                owner: v,
                kind,
                options: options.iter().map(resolve).collect(),
                service_duration: 0,
                tw: None,
                split_allowed: false,
                fast_loading_modifier: 0.0,
            });
        }
    }
    stops
}

/// A validated instance compiled into index form together with its travel matrix.
///
/// Every solver works on `&Problem`; it is immutable and shareable across threads.
#[derive(Clone, Debug)]
pub struct Problem {
    instance: Instance,
    matrix: TravelMatrix,
    stops: Vec<Stop>,
    demand: Vec<Load>,
    capacity: Vec<Load>,
    trailer_capacity: Vec<Load>,
    pauses: Vec<(Seconds, Seconds)>,
    colocated: Vec<(usize, usize)>,
    separated: Vec<(usize, usize)>,
    required_vehicle: Vec<Option<usize>>,
    required_driver: Vec<Option<usize>>,
    stop_dist: Vec<i64>,
    s2_mode: crate::score::S2Mode,
}

impl Problem {
    /// Compiles `instance`; `matrix` may list locations in any order as long
    /// as it covers every instance location.
    pub fn new(instance: Instance, matrix: TravelMatrix) -> Result<Self, ProblemError> {
        let errs: Vec<_> = validate_instance(&instance).into_iter().filter(|e| e.is_structural()).collect();
        if !errs.is_empty() {
            return Err(ProblemError::Invalid(errs));
        }
        let ids: Vec<String> = instance.locations.iter().map(|l| l.id.clone()).collect();
        let matrix = if matrix.ids() == ids.as_slice() {
            matrix
        } else {
            matrix.reindexed(&ids)?
        };

        let stops = expand_stops(&instance);
        let order_ix: HashMap<&str, usize> =
            instance.orders.iter().enumerate().map(|(i, o)| (o.id.as_str(), i)).collect();
        let vehicle_ix: HashMap<&str, usize> =
            instance.vehicles.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();
        let driver_ix: HashMap<&str, usize> =
            instance.drivers.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();

        let mut colocated = BTreeSet::new();
        let mut separated = BTreeSet::new();
        for (a, o) in instance.orders.iter().enumerate() {
            for (set, out) in [(&o.colocated_with, &mut colocated), (&o.not_colocated_with, &mut separated)] {
                for other in set {
                    let b = order_ix[other.as_str()];
                    if a != b {
                        out.insert((a.min(b), a.max(b)));
                    }
                }
            }
        }

        let mut pauses: Vec<(Seconds, Seconds)> = instance
            .pause_rules
            .iter()
            .filter(|p| p.window.len() > 0)
            .map(|p| (p.window.start, p.window.end))
            .collect();
        pauses.sort_unstable();
        let mut merged: Vec<(Seconds, Seconds)> = Vec::with_capacity(pauses.len());
        for (s, e) in pauses {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        let pauses = merged;

        let n = stops.len();
        let mut stop_dist = vec![0; n * n];
        let m = &matrix;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    stop_dist[a * n + b] = stops[a]
                        .options
                        .iter()
                        .flat_map(|&la| stops[b].options.iter().map(move |&lb| m.dist(la, lb)))
                        .min()
                        .unwrap_or(0);
                }
            }
        }

        Ok(Self {
            demand: instance.orders.iter().map(|o| o.demand.load()).collect(),
            capacity: instance.vehicles.iter().map(|v| v.capacity.load()).collect(),
            trailer_capacity: instance.trailers.iter().map(|t| t.capacity.load()).collect(),
            required_vehicle: instance
                .orders
                .iter()
                .map(|o| o.required_vehicle.as_ref().map(|v| vehicle_ix[v.as_str()]))
                .collect(),
            required_driver: instance
                .orders
                .iter()
                .map(|o| o.required_driver.as_ref().map(|d| driver_ix[d.as_str()]))
                .collect(),
            colocated: colocated.into_iter().collect(),
            separated: separated.into_iter().collect(),
            pauses,
            stop_dist,
            s2_mode: Default::default(),
            stops,
            matrix,
            instance,
        })
    }

    /// Compiles `instance` using its own distance source. Relative matrix
    /// paths resolve against `base_dir`.
    pub fn from_instance(instance: Instance, base_dir: Option<&Path>) -> Result<Self, ProblemError> {
        let errs: Vec<_> = validate_instance(&instance).into_iter().filter(|e| e.is_structural()).collect();
        if !errs.is_empty() {
            return Err(ProblemError::Invalid(errs));
        }
        let matrix = match &instance.distance {
            DistanceSource::Euclidean { speed_mps } => TravelMatrix::build_euclidean(&instance.locations, *speed_mps)?,
            DistanceSource::Matrix { path } => {
                let p = Path::new(path);
                let full = match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.to_path_buf(),
                };
                TravelMatrix::load_matrix(full)?
            }
        };
        Self::new(instance, matrix)
    }

    /// Switches how the second soft level is computed.
    pub fn with_s2_mode(mut self, mode: crate::score::S2Mode) -> Self {
        self.s2_mode = mode;
        self
    }

    pub fn s2_mode(&self) -> crate::score::S2Mode {
        self.s2_mode
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn matrix(&self) -> &TravelMatrix {
        &self.matrix
    }

    pub fn stops(&self) -> &[Stop] {
        &self.stops
    }

    #[inline]
    pub fn stop(&self, id: usize) -> &Stop {
        &self.stops[id]
    }

    pub fn n_orders(&self) -> usize {
        self.instance.orders.len()
    }

    pub fn n_vehicles(&self) -> usize {
        self.instance.vehicles.len()
    }

    pub fn order(&self, o: usize) -> &Order {
        &self.instance.orders[o]
    }

    pub fn vehicle(&self, v: usize) -> &Vehicle {
        &self.instance.vehicles[v]
    }

    #[inline]
    pub fn pickup(&self, o: usize) -> usize {
        2 * o
    }

    #[inline]
    pub fn delivery(&self, o: usize) -> usize {
        2 * o + 1
    }

    #[inline]
    pub fn tour_begin(&self, v: usize) -> usize {
        2 * self.n_orders() + 2 * v
    }

    #[inline]
    pub fn tour_end(&self, v: usize) -> usize {
        2 * self.n_orders() + 2 * v + 1
    }

    /// `[TourBegin, TourEnd]` with the first start and end options.
    pub fn empty_chain(&self, v: usize) -> Vec<StopVisit> {
        vec![StopVisit::new(self.tour_begin(v), 0), StopVisit::new(self.tour_end(v), 0)]
    }

    pub fn empty_solution(&self) -> Solution {
        Solution::from_chains((0..self.n_vehicles()).map(|v| self.empty_chain(v)).collect())
    }

    /// Location index of a visit.
    #[inline]
    pub fn location(&self, visit: StopVisit) -> usize {
        self.stops[visit.stop].options[visit.option]
    }

    #[inline]
    pub fn dist(&self, a: StopVisit, b: StopVisit) -> i64 {
        self.matrix.dist(self.location(a), self.location(b))
    }

    #[inline]
    pub fn time(&self, a: StopVisit, b: StopVisit) -> i64 {
        self.matrix.time(self.location(a), self.location(b))
    }

    /// Shortest distance between any option of stop `a` and any option of stop `b`.
    #[inline]
    pub fn stop_dist(&self, a: usize, b: usize) -> i64 {
        self.stop_dist[a * self.stops.len() + b]
    }

    pub fn demand(&self, o: usize) -> Load {
        self.demand[o]
    }

    pub fn capacity(&self, v: usize) -> Load {
        self.capacity[v]
    }

    pub fn trailer_capacity(&self, t: usize) -> Load {
        self.trailer_capacity[t]
    }

    /// Fixed pause intervals, sorted and merged so they are pairwise disjoint.
    pub fn pauses(&self) -> &[(Seconds, Seconds)] {
        &self.pauses
    }

    /// Unordered order pairs `(a, b)`, `a < b`, that must share a vehicle.
    pub fn colocated_pairs(&self) -> &[(usize, usize)] {
        &self.colocated
    }

    /// Unordered order pairs `(a, b)`, `a < b`, that must not share a vehicle.
    pub fn separated_pairs(&self) -> &[(usize, usize)] {
        &self.separated
    }

    pub fn required_vehicle(&self, o: usize) -> Option<usize> {
        self.required_vehicle[o]
    }

    pub fn required_driver(&self, o: usize) -> Option<usize> {
        self.required_driver[o]
    }

    /// Order-restriction faults that depend only on the (order, vehicle) pair:
    /// vehicle group, hazmat capability, dimension limit and lorry-only.
    pub fn static_faults(&self, o: usize, v: usize) -> i64 {
        let order = self.order(o);
        let vehicle = self.vehicle(v);
        let mut faults = 0;
        if let Some(group) = &order.required_vehicle_group {
            if vehicle.group.as_ref() != Some(group) {
                faults += 1;
            }
        }
        if order.hazardous && !vehicle.hazmat_capable {
            faults += 1;
        }
        if let Some(limit) = &order.max_vehicle_dims {
            if !vehicle.dims.within(limit) {
                faults += 1;
            }
        }
        if order.lorry_only && !vehicle.lorry {
            faults += 1;
        }
        faults
    }

    /// Whether `v` satisfies every vehicle-side restriction of order `o`.
    pub fn compatible(&self, o: usize, v: usize) -> bool {
        self.static_faults(o, v) == 0 && self.required_vehicle[o].is_none_or(|rv| rv == v)
    }

    /// Whether order `o` carries any vehicle-side restriction at all.
    pub fn is_constrained(&self, o: usize) -> bool {
        let order = self.order(o);
        order.required_vehicle.is_some()
            || order.required_vehicle_group.is_some()
            || order.hazardous
            || order.max_vehicle_dims.is_some()
            || order.lorry_only
            || !order.colocated_with.is_empty()
            || !order.not_colocated_with.is_empty()
    }

    /// Number of stops with more than one location option.
    pub fn multi_option_stops(&self) -> usize {
        self.stops.iter().filter(|s| s.is_service() && s.options.len() > 1).count()
    }
}

/// Orders served on a chain, in first-appearance order.
pub fn chain_orders(problem: &Problem, chain: &[StopVisit]) -> Vec<usize> {
    let mut seen = vec![false; problem.n_orders()];
    let mut out = Vec::new();
    for visit in chain {
        if let Some(o) = problem.stop(visit.stop).order() {
            if !seen[o] {
                seen[o] = true;
                out.push(o);
            }
        }
    }
    out
}

/// Checks the structural solution invariants: one chain per vehicle, each
/// bracketed by its own tour stops, every order's pickup and delivery exactly
/// once on the same chain with the pickup first. Returns a description of the
/// first violation.
pub fn check_solution(problem: &Problem, solution: &Solution) -> Result<(), String> {
    if solution.chains.len() != problem.n_vehicles() {
        return Err(format!("{} chains for {} vehicles", solution.chains.len(), problem.n_vehicles()));
    }
    let mut seen: Vec<Option<(usize, usize)>> = vec![None; problem.stops().len()];
    for (v, chain) in solution.chains.iter().enumerate() {
        if chain.len() < 2 || chain[0].stop != problem.tour_begin(v) || chain[chain.len() - 1].stop != problem.tour_end(v) {
            return Err(format!("chain {v} is not bracketed by its tour stops"));
        }
        for (pos, visit) in chain.iter().enumerate() {
            let stop = problem.stops().get(visit.stop).ok_or_else(|| format!("unknown stop {}", visit.stop))?;
            if visit.option >= stop.options.len() {
                return Err(format!("stop {} has no option {}", visit.stop, visit.option));
            }
            if stop.is_service() {
                if seen[visit.stop].is_some() {
                    return Err(format!("stop {} appears twice", visit.stop));
                }
                seen[visit.stop] = Some((v, pos));
            } else if pos != 0 && pos != chain.len() - 1 {
                return Err(format!("tour stop {} inside chain {v}", visit.stop));
            }
        }
    }
    for o in 0..problem.n_orders() {
        match (seen[problem.pickup(o)], seen[problem.delivery(o)]) {
            (Some((vp, pp)), Some((vd, pd))) => {
                if vp != vd {
                    return Err(format!("order {o} split across vehicles {vp} and {vd}"));
                }
                if pp > pd {
                    return Err(format!("order {o} delivered before pickup"));
                }
            }
            _ => return Err(format!("order {o} is not fully assigned")),
        }
    }
    Ok(())
}
