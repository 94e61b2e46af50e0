//! Solver dispatch and the multi-seed experiment runner.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_instance, Shape};
use super::HarnessError;
use crate::aco::{run_vrp_aco_observed, AcoParams, AcoTsp};
use crate::baselines::{
    brute_force_tsp, brute_force_vrp, savings_construct, tabu_search_observed, BruteError, BruteOptions, TabuParams,
    MAX_TSP_STOPS,
};
use crate::ga::{run_vrp_ga_observed, GaParams, GaTsp};
use crate::model::{Instance, Problem, Solution};
use crate::score::{evaluate_solution, EvaluatedSolution, Score};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ga,
    Aco,
    Tabu,
    Savings,
    #[serde(alias = "bruteforce")]
    Brute,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Algorithm::Ga, Algorithm::Aco, Algorithm::Tabu, Algorithm::Savings, Algorithm::Brute];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ga => "ga",
            Algorithm::Aco => "aco",
            Algorithm::Tabu => "tabu",
            Algorithm::Savings => "savings",
            Algorithm::Brute => "brute",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Algorithm::Ga | Algorithm::Aco | Algorithm::Tabu)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ga" => Ok(Algorithm::Ga),
            "aco" => Ok(Algorithm::Aco),
            "tabu" | "ls" => Ok(Algorithm::Tabu),
            "savings" => Ok(Algorithm::Savings),
            "brute" | "bruteforce" | "brute-force" => Ok(Algorithm::Brute),
            _ => Err(HarnessError::Invalid(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Result of one solver call.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub result: EvaluatedSolution,
    /// `(elapsed seconds, best score)`, non-increasing in score.
    pub trajectory: Vec<(f64, Score)>,
    pub wall_time: f64,
    /// The brute force hit its budget; `result` is the best found so far.
    pub partial: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Seconds.
    pub budget: f64,
    pub seed: u64,
    /// Lifts the brute-force size guards.
    pub allow_huge: bool,
}

/// Runs `algo` on `problem` under the common solver contract.
pub fn solve(problem: &Problem, algo: Algorithm, opts: SolveOptions) -> Result<SolveOutcome, HarnessError> {
    let start = Instant::now();
    let mut trajectory: Vec<(f64, Score)> = Vec::new();
    let mut observer = |t: f64, s: &Score| trajectory.push((t, *s));
    let mut partial = false;
    let result = match algo {
        Algorithm::Ga => {
            let params = GaParams {
                max_runtime: opts.budget,
                rng_seed: opts.seed,
                ..GaParams::default()
            };
            run_vrp_ga_observed(problem, &params, &GaTsp(params.tsp.clone()), &mut observer)
        }
        Algorithm::Aco => {
            let params = AcoParams {
                max_runtime: opts.budget,
                rng_seed: opts.seed,
                ..AcoParams::default()
            };
            run_vrp_aco_observed(problem, &params, &AcoTsp(params.tsp.clone()), &mut observer)
        }
        Algorithm::Tabu => {
            let params = TabuParams {
                max_runtime: opts.budget,
                rng_seed: opts.seed,
                ..TabuParams::default()
            };
            tabu_search_observed(problem, savings_construct(problem), &params, &mut observer)
        }
        Algorithm::Savings => {
            let ev = evaluate_solution(problem, savings_construct(problem));
            observer(start.elapsed().as_secs_f64(), &ev.score);
            ev
        }
        Algorithm::Brute => {
            let bo = BruteOptions {
                budget: opts.budget,
                allow_huge: opts.allow_huge,
            };
            let ev = match brute_single_vehicle(problem, bo).unwrap_or_else(|| brute_force_vrp(problem, bo)) {
                Ok(ev) => ev,
                Err(BruteError::BudgetExceeded { best: Some(ev) }) => {
                    partial = true;
                    ev
                }
                Err(BruteError::BudgetExceeded { best: None }) => {
                    return Err(HarnessError::BudgetExceeded("brute force found no solution within the budget".into()))
                }
                Err(e @ BruteError::TooLarge { .. }) => return Err(HarnessError::Invalid(e.to_string())),
            };
            observer(start.elapsed().as_secs_f64(), &ev.score);
            ev
        }
    };
    Ok(SolveOutcome {
        result,
        trajectory,
        wall_time: start.elapsed().as_secs_f64(),
        partial,
    })
}

/// Single-vehicle instances go through the TSP enumeration, whose guard is
/// counted in stops rather than orders.
fn brute_single_vehicle(problem: &Problem, bo: BruteOptions) -> Option<Result<EvaluatedSolution, BruteError<EvaluatedSolution>>> {
    let stops: Vec<usize> = (0..problem.n_orders()).flat_map(|o| [problem.pickup(o), problem.delivery(o)]).collect();
    if problem.n_vehicles() != 1 || stops.len() > MAX_TSP_STOPS {
        return None;
    }
    let wrap = |chain| evaluate_solution(problem, Solution::from_chains(vec![chain]));
    Some(match brute_force_tsp(problem, 0, &stops, bo) {
        Ok((chain, _)) => Ok(wrap(chain)),
        Err(BruteError::BudgetExceeded { best }) => Err(BruteError::BudgetExceeded {
            best: best.map(|(c, _)| wrap(c)),
        }),
        Err(BruteError::TooLarge { what, count, limit }) => Err(BruteError::TooLarge { what, count, limit }),
    })
}

/// An instance file or a generated shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceRef {
    Generated { shape: Shape, seed: u64 },
    Path(String),
}

impl InstanceRef {
    pub fn label(&self) -> String {
        match self {
            InstanceRef::Generated { shape, seed } => format!("synthetic {shape} seed {seed}"),
            InstanceRef::Path(p) => p.clone(),
        }
    }

    pub fn load(&self, base_dir: Option<&Path>) -> Result<Problem, HarnessError> {
        match self {
            InstanceRef::Generated { shape, seed } => {
                Problem::from_instance(generate_instance(*shape, *seed), None).map_err(|e| HarnessError::Invalid(e.to_string()))
            }
            InstanceRef::Path(p) => {
                let path = match base_dir {
                    Some(dir) if Path::new(p).is_relative() => dir.join(p),
                    _ => PathBuf::from(p),
                };
                load_problem(&path)
            }
        }
    }
}

/// Reads and compiles an instance file.
pub fn load_problem(path: &Path) -> Result<Problem, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let inst = Instance::from_json(&text).map_err(|e| HarnessError::Invalid(format!("{}: {e}", path.display())))?;
    Problem::from_instance(inst, path.parent()).map_err(|e| HarnessError::Invalid(format!("{}: {e}", path.display())))
}

fn default_seeds() -> Vec<u64> {
    (1..=30).collect()
}

fn default_budget() -> f64 {
    60.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub instances: Vec<InstanceRef>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seconds per run.
    #[serde(default = "default_budget")]
    pub time_budget: f64,
    /// Worker threads; defaults to the available cores.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.instances.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            return Err(HarnessError::Invalid("plan needs at least one instance, algorithm and seed".into()));
        }
        if !(1.0..=3600.0).contains(&self.time_budget) {
            return Err(HarnessError::Invalid(format!("time_budget {} outside [1, 3600] s", self.time_budget)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let plan: Self = serde_json::from_str(text).map_err(|e| HarnessError::Invalid(format!("plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub final_score: Score,
    pub trajectory: Vec<(f64, Score)>,
    /// Every time window met (`s1 == 0`).
    pub tw_met: bool,
    pub wall_time: f64,
    /// Brute force stopped at the budget; the score is the best found so far.
    #[serde(default)]
    pub partial: bool,
    /// Panic or error message of a failed run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn failed(instance: String, algorithm: Algorithm, seed: u64, wall_time: f64, error: String) -> Self {
        Self {
            instance,
            algorithm,
            seed,
            final_score: Score::WORST,
            trajectory: Vec::new(),
            tw_met: false,
            wall_time,
            partial: false,
            error: Some(error),
        }
    }
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "solver panicked".into())
}

/// One isolated run. Panics and solver errors become failed records.
pub fn run_one(problem: &Problem, instance: &str, algo: Algorithm, seed: u64, budget: f64) -> RunRecord {
    let start = Instant::now();
    let opts = SolveOptions {
        budget,
        seed,
        allow_huge: false,
    };
    match catch_unwind(AssertUnwindSafe(|| solve(problem, algo, opts))) {
        Ok(Ok(out)) => {
            assert!(
                out.trajectory.windows(2).all(|w| w[1].1 <= w[0].1),
                "trajectory of {algo} on {instance} seed {seed} increased"
            );
            let score = out.result.score;
            RunRecord {
                instance: instance.to_string(),
                algorithm: algo,
                seed,
                final_score: score,
                trajectory: out.trajectory,
                tw_met: score.windows_met(),
                wall_time: out.wall_time,
                partial: out.partial,
                error: None,
            }
        }
        Ok(Err(e)) => RunRecord::failed(instance.into(), algo, seed, start.elapsed().as_secs_f64(), e.to_string()),
        Err(p) => RunRecord::failed(instance.into(), algo, seed, start.elapsed().as_secs_f64(), panic_message(&*p)),
    }
}

/// Executes the plan's cartesian product on a worker pool.
///
/// With `journal`, each finished record is appended to that JSON-lines file
/// right away, so a crash loses at most the runs in flight. Records come back
/// in plan order (instance, algorithm, seed).
pub fn run_experiment(plan: &ExperimentPlan, base_dir: Option<&Path>, journal: Option<&Path>) -> Result<Vec<RunRecord>, HarnessError> {
    plan.validate()?;
    let problems: Vec<(String, Problem)> = plan
        .instances
        .iter()
        .map(|r| Ok((r.label(), r.load(base_dir)?)))
        .collect::<Result<_, HarnessError>>()?;
    let sink: Option<Mutex<BufWriter<File>>> = match journal {
        Some(p) => {
            let f = OpenOptions::new().create(true).append(true).open(p).map_err(|e| HarnessError::io(p, e))?;
            Some(Mutex::new(BufWriter::new(f)))
        }
        None => None,
    };
    let jobs: Vec<(usize, Algorithm, u64)> = (0..problems.len())
        .flat_map(|i| plan.algorithms.iter().flat_map(move |&a| plan.seeds.iter().map(move |&s| (i, a, s))))
        .collect();
    let threads = plan
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Invalid(format!("thread pool: {e}")))?;
    info!("running {} jobs on {threads} threads", jobs.len());
    let records: Vec<Result<RunRecord, HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, algo, seed)| {
                let (label, problem) = &problems[i];
                let rec = run_one(problem, label, algo, seed, plan.time_budget);
                if let Some(e) = &rec.error {
                    warn!("{label} {algo} seed {seed}: {e}");
                }
                if let (Some(sink), Some(path)) = (&sink, journal) {
                    let line = serde_json::to_string(&rec).expect("records serialize");
                    let mut w = sink.lock().unwrap_or_else(|p| p.into_inner());
                    writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))?;
                }
                Ok(rec)
            })
            .collect()
    });
    records.into_iter().collect()
}
