//! Domain model: instance types, validation, stop expansion and driver assignment.

pub mod clock;
mod drivers;
mod problem;
mod types;
mod validate;

pub use drivers::{assign_drivers, DriverPool};
pub use problem::{chain_orders, check_solution, expand_stops, Problem, ProblemError};
pub use types::*;
pub use validate::{validate_instance, ValidationError};
