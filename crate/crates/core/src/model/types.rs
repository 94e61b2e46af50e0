use std::collections::BTreeSet;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use super::clock;
use crate::distance::DistanceSource;

/// Integer seconds. Times of day count from midnight of the planning day.
pub type Seconds = i64;

/// Latest admissible time value (end of the following day).
pub const MAX_TIME: Seconds = 172_800;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    #[serde(with = "clock")]
    pub start: Seconds,
    #[serde(with = "clock")]
    pub end: Seconds,
}

impl TimeWindow {
    pub fn new(start: Seconds, end: Seconds) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> Seconds {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, t: Seconds) -> bool {
        self.start <= t && t <= self.end
    }
}

/// A fixed break: the driver rests for the whole window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauseRule {
    pub window: TimeWindow,
    #[serde(with = "clock")]
    pub duration: Seconds,
}

impl PauseRule {
    pub fn fixed(start: Seconds, end: Seconds) -> Self {
        Self {
            window: TimeWindow::new(start, end),
            duration: end - start,
        }
    }
}

/// Pieces, volume (m³) and weight (kg). Used for both capacities and demands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Amount {
    pub pieces: i64,
    pub volume: f64,
    pub weight: f64,
}

impl Amount {
    pub fn new(pieces: i64, volume: f64, weight: f64) -> Self {
        Self {
            pieces,
            volume,
            weight,
        }
    }

    /// Integer load with volume in liters and weight in whole kilograms.
    pub fn load(&self) -> Load {
        Load {
            pieces: self.pieces,
            liters: (self.volume * 1000.0).round() as i64,
            kg: self.weight.round() as i64,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.pieces >= 0
            && self.volume.is_finite()
            && self.weight.is_finite()
            && self.volume >= 0.0
            && self.weight >= 0.0
    }
}

/// Integer-valued load vector; the unit of capacity arithmetic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Load {
    pub pieces: i64,
    pub liters: i64,
    pub kg: i64,
}

impl Load {
    pub fn max(self, other: Load) -> Load {
        Load {
            pieces: self.pieces.max(other.pieces),
            liters: self.liters.max(other.liters),
            kg: self.kg.max(other.kg),
        }
    }

    /// Sum of per-dimension excess over `cap`, each clamped at zero.
    pub fn excess_over(&self, cap: &Load) -> i64 {
        (self.pieces - cap.pieces).max(0)
            + (self.liters - cap.liters).max(0)
            + (self.kg - cap.kg).max(0)
    }

    pub fn fits_in(&self, cap: &Load) -> bool {
        self.pieces <= cap.pieces && self.liters <= cap.liters && self.kg <= cap.kg
    }

    /// Smallest free fraction over the dimensions that have a positive capacity.
    pub fn free_ratio(&self, cap: &Load) -> f64 {
        let mut ratio: f64 = 1.0;
        for (used, total) in [
            (self.pieces, cap.pieces),
            (self.liters, cap.liters),
            (self.kg, cap.kg),
        ] {
            if total > 0 {
                ratio = ratio.min((total - used) as f64 / total as f64);
            }
        }
        ratio.max(0.0)
    }
}

impl Add for Load {
    type Output = Load;
    fn add(self, o: Load) -> Load {
        Load {
            pieces: self.pieces + o.pieces,
            liters: self.liters + o.liters,
            kg: self.kg + o.kg,
        }
    }
}

impl AddAssign for Load {
    fn add_assign(&mut self, o: Load) {
        *self = *self + o;
    }
}

impl Sub for Load {
    type Output = Load;
    fn sub(self, o: Load) -> Load {
        Load {
            pieces: self.pieces - o.pieces,
            liters: self.liters - o.liters,
            kg: self.kg - o.kg,
        }
    }
}

impl SubAssign for Load {
    fn sub_assign(&mut self, o: Load) {
        *self = *self - o;
    }
}

/// Vehicle dimensions: height, width, length in cm and empty weight in kg.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Dims {
    pub h: f64,
    pub w: f64,
    pub l: f64,
    pub weight: f64,
}

impl Dims {
    /// Scalar-wise comparison; no packing geometry.
    pub fn within(&self, limit: &Dims) -> bool {
        self.h <= limit.h && self.w <= limit.w && self.l <= limit.l && self.weight <= limit.weight
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostRates {
    pub per_hour: f64,
    pub per_km: f64,
    pub per_tour: f64,
    pub per_stop: f64,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: String,
    pub capacity: Amount,
    #[serde(default)]
    pub dims: Dims,
    #[serde(default)]
    pub cost_rates: CostRates,
    #[serde(with = "clock")]
    pub max_tour_duration: Seconds,
    pub start_options: Vec<String>,
    pub end_options: Vec<String>,
    pub tour_start_window: TimeWindow,
    #[serde(with = "clock")]
    pub tour_end_limit: Seconds,
    #[serde(default)]
    pub trailer_allowed: bool,
    #[serde(default)]
    pub hazmat_capable: bool,
    #[serde(default)]
    pub fast_loading: bool,
    #[serde(default = "yes")]
    pub can_wait: bool,
    #[serde(default = "yes")]
    pub allow_return: bool,
    /// Vehicle group tag matched against `Order::required_vehicle_group`.
    #[serde(default)]
    pub group: Option<String>,
    /// Whether this vehicle counts as a lorry for lorry-only orders.
    #[serde(default)]
    pub lorry: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trailer {
    pub id: String,
    pub capacity: Amount,
    #[serde(default)]
    pub dims: Dims,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Driver {
    pub id: String,
    #[serde(default)]
    pub certificates: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: String,
    #[serde(default)]
    pub demand: Amount,
    pub pickup_options: Vec<String>,
    pub delivery_location: String,
    #[serde(with = "clock", default)]
    pub service_duration_pickup: Seconds,
    #[serde(with = "clock", default)]
    pub service_duration_delivery: Seconds,
    #[serde(default)]
    pub tw_pickup: Option<TimeWindow>,
    #[serde(default)]
    pub tw_delivery: Option<TimeWindow>,
    #[serde(default)]
    pub needs_codriver: bool,
    #[serde(default)]
    pub required_driver: Option<String>,
    #[serde(default)]
    pub required_certificates: BTreeSet<String>,
    #[serde(default)]
    pub colocated_with: BTreeSet<String>,
    #[serde(default)]
    pub not_colocated_with: BTreeSet<String>,
    #[serde(default)]
    pub max_vehicle_dims: Option<Dims>,
    #[serde(default)]
    pub required_vehicle_group: Option<String>,
    /// Both stops of this order must be served by this exact vehicle.
    #[serde(default)]
    pub required_vehicle: Option<String>,
    #[serde(default)]
    pub lorry_only: bool,
    #[serde(default)]
    pub hazardous: bool,
    #[serde(default)]
    pub split_allowed: bool,
    /// Fraction of service time saved on fast-loading vehicles.
    #[serde(default)]
    pub fast_loading_modifier: f64,
}

impl Order {
    /// Minimal order with no restrictions.
    pub fn simple(id: &str, pickup: &str, delivery: &str, demand: Amount) -> Self {
        Order {
            id: id.to_string(),
            demand,
            pickup_options: vec![pickup.to_string()],
            delivery_location: delivery.to_string(),
            service_duration_pickup: 0,
            service_duration_delivery: 0,
            tw_pickup: None,
            tw_delivery: None,
            needs_codriver: false,
            required_driver: None,
            required_certificates: BTreeSet::new(),
            colocated_with: BTreeSet::new(),
            not_colocated_with: BTreeSet::new(),
            max_vehicle_dims: None,
            required_vehicle_group: None,
            required_vehicle: None,
            lorry_only: false,
            hazardous: false,
            split_allowed: false,
            fast_loading_modifier: 0.0,
        }
    }
}

impl Vehicle {
    /// Vehicle starting and ending at `depot` with a wide day and no restrictions.
    pub fn simple(id: &str, depot: &str, capacity: Amount) -> Self {
        Vehicle {
            id: id.to_string(),
            capacity,
            dims: Dims::default(),
            cost_rates: CostRates::default(),
            max_tour_duration: 24 * 3600,
            start_options: vec![depot.to_string()],
            end_options: vec![depot.to_string()],
            tour_start_window: TimeWindow::new(0, 0),
            tour_end_limit: MAX_TIME,
            trailer_allowed: false,
            hazmat_capable: false,
            fast_loading: false,
            can_wait: true,
            allow_return: true,
            group: None,
            lorry: false,
        }
    }
}

fn default_runtime() -> Seconds {
    300
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Free-form provenance label, e.g. "synthetic VRP-II seed 7".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub locations: Vec<Location>,
    pub vehicles: Vec<Vehicle>,
    #[serde(default)]
    pub trailers: Vec<Trailer>,
    #[serde(default)]
    pub drivers: Vec<Driver>,
    pub orders: Vec<Order>,
    #[serde(default)]
    pub pause_rules: Vec<PauseRule>,
    #[serde(default = "default_runtime")]
    pub max_runtime_s: Seconds,
    #[serde(default)]
    pub distance: DistanceSource,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization is infallible")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StopKind {
    Pickup,
    Delivery,
    TourBegin,
    TourEnd,
    Pause,
}

/// A schedulable stop. `options` hold location indices into `Instance::locations`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stop {
    pub id: usize,
    /// Owning order for pickups and deliveries; owning vehicle index for tour stops.
    pub owner: usize,
    pub kind: StopKind,
    pub options: Vec<usize>,
    pub service_duration: Seconds,
    pub tw: Option<TimeWindow>,
    pub split_allowed: bool,
    pub fast_loading_modifier: f64,
}

impl Stop {
    pub fn is_service(&self) -> bool {
        matches!(self.kind, StopKind::Pickup | StopKind::Delivery)
    }

    pub fn order(&self) -> Option<usize> {
        self.is_service().then_some(self.owner)
    }
}

/// One scheduled visit: a stop and the chosen location option.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StopVisit {
    pub stop: usize,
    pub option: usize,
}

impl StopVisit {
    pub fn new(stop: usize, option: usize) -> Self {
        Self { stop, option }
    }
}

/// Per-vehicle chains (indexed like `Instance::vehicles`) plus driver teams.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Solution {
    pub chains: Vec<Vec<StopVisit>>,
    pub drivers: Vec<Vec<usize>>,
}

impl Solution {
    pub fn from_chains(chains: Vec<Vec<StopVisit>>) -> Self {
        let drivers = vec![Vec::new(); chains.len()];
        Self { chains, drivers }
    }
}
