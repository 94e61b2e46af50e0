use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::types::*;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{context} references unknown {kind} {id:?}")]
    UnresolvedReference {
        context: String,
        kind: &'static str,
        id: String,
    },
    #[error("order {order:?} is both co-located and not co-located with {other:?}")]
    Contradiction { order: String, other: String },
    #[error("{context}: {message}")]
    InvalidValue { context: String, message: String },
    #[error("instance has no {0}")]
    Empty(&'static str),
}

impl ValidationError {
    /// Errors that make an instance unusable; an instance with zero orders is
    /// reported but still solvable (trivially).
    pub fn is_structural(&self) -> bool {
        !matches!(self, ValidationError::Empty("orders"))
    }
}

fn check_window(errs: &mut Vec<ValidationError>, context: String, tw: &TimeWindow) {
    if !(0 <= tw.start && tw.start <= tw.end && tw.end <= MAX_TIME) {
        errs.push(ValidationError::InvalidValue {
            context,
            message: format!("time window [{}, {}] must satisfy 0 <= start <= end <= {MAX_TIME}", tw.start, tw.end),
        });
    }
}

fn check_unique<'a>(
    errs: &mut Vec<ValidationError>,
    kind: &'static str,
    ids: impl Iterator<Item = &'a String>,
) -> HashSet<&'a str> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            errs.push(ValidationError::DuplicateId { kind, id: id.clone() });
        }
    }
    seen
}

/// Returns every violated invariant; an empty list means the instance is well-formed.
pub fn validate_instance(inst: &Instance) -> Vec<ValidationError> {
    let mut errs = Vec::new();
    let locations = check_unique(&mut errs, "location", inst.locations.iter().map(|l| &l.id));
    let vehicles = check_unique(&mut errs, "vehicle", inst.vehicles.iter().map(|v| &v.id));
    check_unique(&mut errs, "trailer", inst.trailers.iter().map(|t| &t.id));
    let drivers = check_unique(&mut errs, "driver", inst.drivers.iter().map(|d| &d.id));
    let orders = check_unique(&mut errs, "order", inst.orders.iter().map(|o| &o.id));

    let resolve = |errs: &mut Vec<ValidationError>, set: &HashSet<&str>, kind, context: &str, id: &String| {
        if !set.contains(id.as_str()) {
            errs.push(ValidationError::UnresolvedReference {
                context: context.to_string(),
                kind,
                id: id.clone(),
            });
        }
    };
    let invalid = |errs: &mut Vec<ValidationError>, context: String, message: &str| {
        errs.push(ValidationError::InvalidValue {
            context,
            message: message.to_string(),
        })
    };

    for l in &inst.locations {
        if !(l.x.is_finite() && l.y.is_finite()) {
            invalid(&mut errs, format!("location {:?}", l.id), "coordinates must be finite");
        }
    }

    for v in &inst.vehicles {
        let ctx = format!("vehicle {:?}", v.id);
        if !v.capacity.is_valid() {
            invalid(&mut errs, ctx.clone(), "capacity components must be finite and >= 0");
        }
        if v.start_options.is_empty() {
            invalid(&mut errs, ctx.clone(), "start_options must not be empty");
        }
        if v.end_options.is_empty() {
            invalid(&mut errs, ctx.clone(), "end_options must not be empty");
        }
        for id in v.start_options.iter().chain(&v.end_options) {
            resolve(&mut errs, &locations, "location", &ctx, id);
        }
        if v.max_tour_duration <= 0 {
            invalid(&mut errs, ctx.clone(), "max_tour_duration must be positive");
        }
        check_window(&mut errs, ctx.clone(), &v.tour_start_window);
        if !(0..=MAX_TIME).contains(&v.tour_end_limit) {
            invalid(&mut errs, ctx, "tour_end_limit out of range");
        }
    }

    for t in &inst.trailers {
        if !t.capacity.is_valid() {
            invalid(&mut errs, format!("trailer {:?}", t.id), "capacity components must be finite and >= 0");
        }
    }

    for p in &inst.pause_rules {
        check_window(&mut errs, "pause rule".into(), &p.window);
        if p.duration != p.window.len() {
            invalid(&mut errs, "pause rule".into(), "duration must equal the window length");
        }
    }

    for o in &inst.orders {
        let ctx = format!("order {:?}", o.id);
        if !o.demand.is_valid() {
            invalid(&mut errs, ctx.clone(), "demand components must be finite and >= 0");
        }
        if o.pickup_options.is_empty() {
            invalid(&mut errs, ctx.clone(), "pickup_options must not be empty");
        }
        for id in o.pickup_options.iter().chain(std::iter::once(&o.delivery_location)) {
            resolve(&mut errs, &locations, "location", &ctx, id);
        }
        if o.service_duration_pickup < 0 || o.service_duration_delivery < 0 {
            invalid(&mut errs, ctx.clone(), "service durations must be >= 0");
        }
        for tw in o.tw_pickup.iter().chain(o.tw_delivery.iter()) {
            check_window(&mut errs, ctx.clone(), tw);
        }
        if let Some(d) = &o.required_driver {
            resolve(&mut errs, &drivers, "driver", &ctx, d);
        }
        if let Some(v) = &o.required_vehicle {
            resolve(&mut errs, &vehicles, "vehicle", &ctx, v);
        }
        for other in o.colocated_with.iter().chain(&o.not_colocated_with) {
            resolve(&mut errs, &orders, "order", &ctx, other);
        }
        for other in o.colocated_with.intersection(&o.not_colocated_with) {
            errs.push(ValidationError::Contradiction {
                order: o.id.clone(),
                other: other.clone(),
            });
        }
        if !(0.0..=1.0).contains(&o.fast_loading_modifier) {
            invalid(&mut errs, ctx, "fast_loading_modifier must lie in [0, 1]");
        }
    }

    if inst.vehicles.is_empty() {
        errs.push(ValidationError::Empty("vehicles"));
    }
    if inst.orders.is_empty() {
        errs.push(ValidationError::Empty("orders"));
    }
    errs
}

/// Location id → index map; only meaningful for validated instances.
pub(crate) fn location_index(inst: &Instance) -> HashMap<&str, usize> {
    inst.locations.iter().enumerate().map(|(i, l)| (l.id.as_str(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> Instance {
        Instance {
            name: None,
            locations: vec![
                Location { id: "depot".into(), x: 0.0, y: 0.0 },
                Location { id: "c1".into(), x: 100.0, y: 0.0 },
            ],
            vehicles: vec![Vehicle::simple("v1", "depot", Amount::new(10, 1.0, 100.0))],
            trailers: vec![],
            drivers: vec![],
            orders: vec![Order::simple("o1", "depot", "c1", Amount::new(1, 0.1, 10.0))],
            pause_rules: vec![],
            max_runtime_s: 60,
            distance: Default::default(),
        }
    }

    #[test]
    fn well_formed_is_clean() {
        assert!(validate_instance(&tiny()).is_empty());
    }

    #[test]
    fn missing_location_is_one_error() {
        let mut inst = tiny();
        inst.orders[0].delivery_location = "nowhere".into();
        let errs = validate_instance(&inst);
        assert_eq!(errs.len(), 1);
        assert!(matches!(&errs[0], ValidationError::UnresolvedReference { id, .. } if id == "nowhere"));
    }

    #[test]
    fn colocation_contradiction() {
        let mut inst = tiny();
        let mut o2 = Order::simple("o2", "depot", "c1", Amount::default());
        o2.colocated_with.insert("o1".into());
        o2.not_colocated_with.insert("o1".into());
        inst.orders.push(o2);
        let errs = validate_instance(&inst);
        assert_eq!(errs, vec![ValidationError::Contradiction { order: "o2".into(), other: "o1".into() }]);
    }

    #[test]
    fn other_invariants() {
        let mut inst = tiny();
        inst.vehicles[0].end_options.clear();
        inst.vehicles[0].max_tour_duration = 0;
        inst.pause_rules.push(PauseRule { window: TimeWindow::new(100, 200), duration: 50 });
        inst.orders[0].tw_delivery = Some(TimeWindow::new(500, 100));
        inst.locations.push(Location { id: "c1".into(), x: 1.0, y: 1.0 });
        let errs = validate_instance(&inst);
        assert_eq!(errs.len(), 5, "{errs:?}");
        inst.orders.clear();
        assert!(validate_instance(&inst).contains(&ValidationError::Empty("orders")));
    }
}
