//! Reference solvers: exhaustive enumeration, savings construction and tabu search.

mod brute;
mod savings;
mod tabu;

pub use brute::{brute_force_tsp, brute_force_vrp, BruteError, BruteOptions, MAX_TSP_STOPS, MAX_VRP_ORDERS, MAX_VRP_VEHICLES};
pub use savings::savings_construct;
pub use tabu::{random_solution, tabu_search, tabu_search_observed, TabuParams};
