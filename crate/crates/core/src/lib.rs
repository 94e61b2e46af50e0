//! Rich vehicle routing: model, timeline scheduling, lexicographic scoring and
//! two-stage genetic and ant-colony solvers with baselines and a benchmark harness.

pub mod aco;
pub mod baselines;
pub mod distance;
pub mod ga;
pub mod harness;
pub mod model;
pub mod score;
pub mod solver;
pub mod timeline;
