//! Synthetic instances shaped like the eight benchmark problem instances.
//!
//! Locations are uniform in a 50 km square. Non-PD shapes pick every order up
//! at the shared depot; PD shapes draw a separate pickup point per order.
//! Every order carries time windows. The fleet is homogeneous and sized by
//! first-fit decreasing on weight, with 15% headroom on every dimension.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Amount, Instance, Location, Order, PauseRule, Seconds, TimeWindow, Vehicle};
use crate::solver::{derive_seed, rng_from};

/// Side of the square holding all locations, in meters.
pub const AREA_SIDE_M: f64 = 50_000.0;

/// Fixed breaks of the pause shapes: 09:30–10:00, 11:30–12:00, 14:30–15:00.
pub const PAUSE_WINDOWS: [(Seconds, Seconds); 3] = [(34_200, 36_000), (41_400, 43_200), (52_200, 54_000)];

/// Capacity headroom over the first-fit-decreasing packing.
const HEADROOM: f64 = 1.15;

const HOUR: Seconds = 3600;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shape {
    #[serde(rename = "TSP-I")]
    TspI,
    #[serde(rename = "TSP-II")]
    TspII,
    #[serde(rename = "TSP-II-P")]
    TspIIP,
    #[serde(rename = "VRP-I")]
    VrpI,
    #[serde(rename = "VRP-I-P")]
    VrpIP,
    #[serde(rename = "VRP-II")]
    VrpII,
    #[serde(rename = "TSP-PD")]
    TspPd,
    #[serde(rename = "VRP-PD-P")]
    VrpPdP,
}

impl Shape {
    pub const ALL: [Shape; 8] = [
        Shape::TspI,
        Shape::TspII,
        Shape::TspIIP,
        Shape::VrpI,
        Shape::VrpIP,
        Shape::VrpII,
        Shape::TspPd,
        Shape::VrpPdP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::TspI => "TSP-I",
            Shape::TspII => "TSP-II",
            Shape::TspIIP => "TSP-II-P",
            Shape::VrpI => "VRP-I",
            Shape::VrpIP => "VRP-I-P",
            Shape::VrpII => "VRP-II",
            Shape::TspPd => "TSP-PD",
            Shape::VrpPdP => "VRP-PD-P",
        }
    }

    pub fn orders(self) -> usize {
        match self {
            Shape::TspI | Shape::TspPd => 10,
            Shape::TspII | Shape::TspIIP => 30,
            Shape::VrpI | Shape::VrpIP => 53,
            Shape::VrpII => 100,
            Shape::VrpPdP => 62,
        }
    }

    pub fn vehicles(self) -> usize {
        match self {
            Shape::TspI | Shape::TspII | Shape::TspIIP | Shape::TspPd => 1,
            Shape::VrpI | Shape::VrpIP => 5,
            Shape::VrpII => 13,
            Shape::VrpPdP => 7,
        }
    }

    pub fn has_pauses(self) -> bool {
        matches!(self, Shape::TspIIP | Shape::VrpIP | Shape::VrpPdP)
    }

    pub fn is_pd(self) -> bool {
        matches!(self, Shape::TspPd | Shape::VrpPdP)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown shape {0:?}; expected one of TSP-I, TSP-II, TSP-II-P, VRP-I, VRP-I-P, VRP-II, TSP-PD, VRP-PD-P")]
pub struct UnknownShape(pub String);

impl FromStr for Shape {
    type Err = UnknownShape;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase().replace('_', "-");
        Shape::ALL
            .into_iter()
            .find(|sh| sh.name() == key)
            .ok_or_else(|| UnknownShape(s.to_string()))
    }
}

fn point(rng: &mut impl Rng, id: String) -> Location {
    // whole meters keep the JSON short and exact
    Location {
        id,
        x: rng.gen_range(0..=AREA_SIDE_M as i64) as f64,
        y: rng.gen_range(0..=AREA_SIDE_M as i64) as f64,
    }
}

/// First-fit decreasing bins (item indices) at bin size `cap`.
fn ffd_bins(sorted_desc: &[i64], cap: i64) -> Vec<Vec<usize>> {
    let mut bins: Vec<(i64, Vec<usize>)> = Vec::new();
    for (i, &w) in sorted_desc.iter().enumerate() {
        match bins.iter_mut().find(|b| b.0 + w <= cap) {
            Some(b) => {
                b.0 += w;
                b.1.push(i);
            }
            None => bins.push((w, vec![i])),
        }
    }
    bins.into_iter().map(|b| b.1).collect()
}

/// Smallest capacity, grown in 1% steps from the averaging bound, for which
/// first-fit decreasing by weight packs `demands` into `vehicles` bins; then
/// every dimension gets the largest bin total times the headroom.
pub fn calibrate_capacity(demands: &[Amount], vehicles: usize) -> Amount {
    let mut idx: Vec<usize> = (0..demands.len()).collect();
    idx.sort_by(|&a, &b| demands[b].weight.total_cmp(&demands[a].weight).then(a.cmp(&b)));
    let weights: Vec<i64> = idx.iter().map(|&i| demands[i].weight.ceil() as i64).collect();
    let total: i64 = weights.iter().sum();
    let largest = weights.first().copied().unwrap_or(0);
    let mut cap = largest.max((total + vehicles as i64 - 1) / vehicles.max(1) as i64).max(1);
    let bins = loop {
        let bins = ffd_bins(&weights, cap);
        if bins.len() <= vehicles.max(1) {
            break bins;
        }
        cap = cap + cap / 100 + 1;
    };
    let mut peak = Amount::default();
    for bin in &bins {
        let items = bin.iter().map(|&k| &demands[idx[k]]);
        let (mut p, mut v, mut w) = (0, 0.0, 0.0);
        for d in items {
            p += d.pieces;
            v += d.volume;
            w += d.weight;
        }
        peak.pieces = peak.pieces.max(p);
        peak.volume = peak.volume.max(v);
        peak.weight = peak.weight.max(w);
    }
    Amount::new(
        (peak.pieces as f64 * HEADROOM).ceil() as i64,
        (peak.volume * HEADROOM * 100.0).ceil() / 100.0,
        (peak.weight * HEADROOM).ceil(),
    )
}

/// Deterministic synthetic instance for `(shape, seed)`.
pub fn generate_instance(shape: Shape, seed: u64) -> Instance {
    let mut rng = rng_from(derive_seed(seed, &[shape as u64, 0x5eed]));
    let n = shape.orders();
    let mut locations = vec![point(&mut rng, "depot".into())];
    let mut orders = Vec::with_capacity(n);
    for i in 0..n {
        let customer = format!("c{i}");
        locations.push(point(&mut rng, customer.clone()));
        let pickup = if shape.is_pd() {
            let p = format!("p{i}");
            locations.push(point(&mut rng, p.clone()));
            p
        } else {
            "depot".to_string()
        };
        let demand = Amount::new(
            rng.gen_range(1..=4),
            rng.gen_range(5..=150) as f64 / 100.0,
            rng.gen_range(20..=400) as f64,
        );
        let mut order = Order::simple(&format!("o{i}"), &pickup, &customer, demand);
        order.service_duration_pickup = if shape.is_pd() { 10 * 60 } else { 5 * 60 };
        order.service_duration_delivery = 10 * 60;
        // delivery window opens on a quarter hour between 08:00 and 15:00
        let open = 8 * HOUR + rng.gen_range(0..=28) * 900;
        let width = rng.gen_range(2..=4) * HOUR;
        order.tw_delivery = Some(TimeWindow::new(open, open + width));
        order.tw_pickup = Some(if shape.is_pd() {
            TimeWindow::new((open - 3 * HOUR).max(6 * HOUR), open)
        } else {
            TimeWindow::new(6 * HOUR, 18 * HOUR)
        });
        orders.push(order);
    }
    let demands: Vec<Amount> = orders.iter().map(|o| o.demand).collect();
    let capacity = calibrate_capacity(&demands, shape.vehicles());
    let vehicles = (0..shape.vehicles())
        .map(|k| {
            let mut v = Vehicle::simple(&format!("v{k}"), "depot", capacity);
            v.tour_start_window = TimeWindow::new(6 * HOUR, 8 * HOUR);
            v.tour_end_limit = 23 * HOUR;
            v.max_tour_duration = 16 * HOUR;
            v
        })
        .collect();
    let pause_rules = if shape.has_pauses() {
        PAUSE_WINDOWS.iter().map(|&(s, e)| PauseRule::fixed(s, e)).collect()
    } else {
        Vec::new()
    };
    Instance {
        name: Some(format!("synthetic {shape} seed {seed}")),
        locations,
        vehicles,
        trailers: vec![],
        drivers: vec![],
        orders,
        pause_rules,
        max_runtime_s: 300,
        distance: Default::default(),
    }
}
