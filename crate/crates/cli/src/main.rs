//! `rvrp` command line: solve, generate, bench and stats.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rvrp::harness::{
    export_results, generate_instance, load_problem, run_experiment, solution_report, solve, wilcoxon_signed_rank,
    Algorithm, ExperimentPlan, HarnessError, Shape, SolveOptions,
};

#[derive(Parser)]
#[command(name = "rvrp", version, about = "Rich vehicle routing solvers and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print the solution as JSON.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// ga, aco, tabu, savings or brute
        #[arg(long)]
        algo: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Wall-clock budget in seconds.
        #[arg(long, default_value_t = 60.0)]
        budget: f64,
        /// Include the full timeline of every tour.
        #[arg(long)]
        emit_schedule: bool,
        /// Lift the brute-force size guards.
        #[arg(long = "i-know-this-is-huge")]
        huge: bool,
        /// Write the JSON here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic instance of a benchmark shape.
    Generate {
        /// TSP-I, TSP-II, TSP-II-P, VRP-I, VRP-I-P, VRP-II, TSP-PD or VRP-PD-P
        #[arg(long)]
        shape: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run an experiment plan and export CSV/JSON results.
    Bench {
        #[arg(long)]
        plan: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Paired Wilcoxon signed-rank test on final S2 of two run sets.
    ///
    /// Each side is `runs.csv:filter` where filter is comma-separated
    /// `column=value` terms, e.g. `out/runs.csv:algorithm=ga,instance=X`.
    /// Runs are paired by instance and seed.
    Stats {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn cmd_solve(
    instance: &Path,
    algo: &str,
    seed: u64,
    budget: f64,
    emit_schedule: bool,
    huge: bool,
    output: Option<&Path>,
) -> Result<ExitCode, HarnessError> {
    let algo: Algorithm = algo.parse()?;
    if !(budget > 0.0) {
        return Err(HarnessError::Invalid(format!("budget must be positive, got {budget}")));
    }
    let problem = load_problem(instance)?;
    let opts = SolveOptions {
        budget,
        seed,
        allow_huge: huge,
    };
    let out = solve(&problem, algo, opts)?;
    let report = solution_report(&problem, algo, seed, &out, emit_schedule);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match output {
        Some(p) => write_file(p, &text)?,
        None => println!("{text}"),
    }
    log::info!("{algo} finished with {}", out.result.score);
    Ok(if out.partial { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn cmd_generate(shape: &str, seed: u64, output: &Path) -> Result<ExitCode, HarnessError> {
    let shape: Shape = shape.parse().map_err(|e: rvrp::harness::UnknownShape| HarnessError::Invalid(e.to_string()))?;
    write_file(output, &generate_instance(shape, seed).to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(plan_path: &Path, output: &Path) -> Result<ExitCode, HarnessError> {
    let text = std::fs::read_to_string(plan_path).map_err(|e| HarnessError::io(plan_path, e))?;
    let plan = ExperimentPlan::from_json(&text)?;
    std::fs::create_dir_all(output).map_err(|e| HarnessError::io(output, e))?;
    let records = run_experiment(&plan, plan_path.parent(), Some(&output.join("runs.jsonl")))?;
    for p in export_results(&records, output)? {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// Rows of a runs CSV matching the filter, as `(instance, seed) -> s2`.
fn load_side(spec: &str) -> Result<Vec<((String, String), f64)>, HarnessError> {
    let (path, filter) = match spec.rsplit_once(':') {
        Some((p, f)) if f.contains('=') || f.is_empty() => (p, f),
        _ => (spec, ""),
    };
    let terms: Vec<(&str, &str)> = filter
        .split(',')
        .filter(|t| !t.is_empty())
        .map(|t| t.split_once('=').ok_or_else(|| HarnessError::Invalid(format!("bad filter term {t:?}"))))
        .collect::<Result<_, _>>()?;
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(Path::new(path), io),
        k => HarnessError::Invalid(format!("{path}: {k:?}")),
    })?;
    let headers = rdr.headers().map_err(|e| HarnessError::Invalid(format!("{path}: {e}")))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Invalid(format!("{path}: no column {name:?}")))
    };
    let (ci, cs, c2) = (col("instance")?, col("seed")?, col("s2")?);
    let filters: Vec<(usize, &str)> = terms.iter().map(|(k, v)| Ok((col(k)?, *v))).collect::<Result<_, HarnessError>>()?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| HarnessError::Invalid(format!("{path}: {e}")))?;
        if filters.iter().any(|&(c, v)| &row[c] != v) {
            continue;
        }
        let s2: f64 = row[c2]
            .parse()
            .map_err(|_| HarnessError::Invalid(format!("{path}: run without an evaluated s2 ({}, seed {})", &row[ci], &row[cs])))?;
        out.push(((row[ci].to_string(), row[cs].to_string()), s2));
    }
    Ok(out)
}

fn cmd_stats(a: &str, b: &str, alpha: f64) -> Result<ExitCode, HarnessError> {
    let left = load_side(a)?;
    let right: std::collections::HashMap<_, _> = load_side(b)?.into_iter().collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = left.iter().filter_map(|(k, x)| right.get(k).map(|y| (*x, *y))).unzip();
    let r = wilcoxon_signed_rank(&xs, &ys, alpha).map_err(|e| HarnessError::Invalid(e.to_string()))?;
    let doc = serde_json::json!({
        "pairs": xs.len(),
        "alpha": alpha,
        "result": r,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let res = match &cli.command {
        Command::Solve {
            instance,
            algo,
            seed,
            budget,
            emit_schedule,
            huge,
            output,
        } => cmd_solve(instance, algo, *seed, *budget, *emit_schedule, *huge, output.as_deref()),
        Command::Generate { shape, seed, output } => cmd_generate(shape, *seed, output),
        Command::Bench { plan, output } => cmd_bench(plan, output),
        Command::Stats { a, b, alpha } => cmd_stats(a, b, *alpha),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
